"""Diffusion-limit quantities: Wright's distribution, tail and sampling sequences, derivatives.

Both ``alpha`` and ``beta`` are the minimal solutions of their three-term
recursions, so a truncated solve with a zero far boundary converges
super-exponentially in the truncation index. ``beta`` itself decays only
polynomially, which is why convergence is monitored on a prefix rather
than on the last entry.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DegenerateBeta, NoConvergence, QuadratureFailure, SigmaZero
from .finite import FluxReport
from .numerics import TridiagonalSystem, solve_tridiagonal
from .params import DiffusionParams

DEFAULT_TOL = 1e-12
M_START = 128
M_CAP = 2**20
QUAD_ABS_TOL = 1e-10


# --- Wright's distribution -------------------------------------------------


def wright_density(p: DiffusionParams, eta) -> np.ndarray:
    """Normalised stationary density of the Wright-Fisher diffusion on (0, 1)."""
    eta = np.asarray(eta, dtype=float)
    c = wright_normalizer(p)
    with np.errstate(divide="ignore"):
        return c * eta ** (p.theta * p.nu1 - 1) * (1 - eta) ** (p.theta * p.nu0 - 1) * np.exp(-p.sigma * eta)


def _weighted_moment(p: DiffusionParams, n: int, epsabs: float) -> tuple[float, float]:
    # algebraic endpoint weights are integrated exactly by QUADPACK's QAWS rule
    wvar = (p.theta * p.nu1 - 1.0, p.theta * p.nu0 - 1.0)
    sigma = p.sigma
    val, err = integrate.quad(
        lambda x: x**n * math.exp(-sigma * x),
        0.0,
        1.0,
        weight="alg",
        wvar=wvar,
        epsabs=epsabs,
        epsrel=1e-13,
        limit=200,
    )
    return val, err


def _unnormalized_mass(p: DiffusionParams) -> float:
    val, err = _weighted_moment(p, 0, 0.0)
    if not val > 0 or err > QUAD_ABS_TOL * val:
        raise QuadratureFailure(f"normalising integral failed: {val} +- {err}")
    return val


def wright_normalizer(p: DiffusionParams) -> float:
    """``1 / integral`` of the unnormalised density."""
    return 1.0 / _unnormalized_mass(p.validate())


def wright_moments(p: DiffusionParams, M: int) -> np.ndarray:
    """``beta[n] = E[Y^n]`` under Wright's distribution by adaptive quadrature, ``n = 0..M``."""
    p.validate()
    d0 = _unnormalized_mass(p)
    beta = np.empty(M + 1)
    beta[0] = 1.0
    for n in range(1, M + 1):
        val, err = _weighted_moment(p, n, 1e-3 * QUAD_ABS_TOL * d0)
        if err > QUAD_ABS_TOL * d0:
            raise QuadratureFailure(f"moment {n}: error estimate {err / d0:.3g} exceeds {QUAD_ABS_TOL}")
        beta[n] = val / d0
    return beta


# --- recursions -------------------------------------------------------------


def _beta_truncated(p: DiffusionParams, M: int) -> np.ndarray:
    """Solve the sampling recursion for ``n = 1..M`` with ``beta[M+1] = 0``."""
    sigma, theta = p.sigma, p.theta
    n = np.arange(1, M + 1, dtype=float)
    down = n - 1 + theta * p.nu1
    diag = n - 1 + sigma + theta
    rhs = np.zeros(M)
    rhs[0] = down[0]
    sys = TridiagonalSystem(sub=-down[1:], diag=diag, sup=np.full(M - 1, -sigma), rhs=rhs)
    out = np.empty(M + 1)
    out[0] = 1.0
    out[1:] = solve_tridiagonal(sys)
    return out


def _alpha_truncated(p: DiffusionParams, M: int) -> np.ndarray:
    """Solve the tail recursion for ``n = 1..M`` with ``alpha[M+1] = 0``."""
    sigma, theta = p.sigma, p.theta
    n = np.arange(1, M + 1, dtype=float)
    up = n + 1 + theta * p.nu1
    diag = n + 1 + sigma + theta
    rhs = np.zeros(M)
    rhs[0] = sigma
    sys = TridiagonalSystem(sub=np.full(M - 1, -sigma), diag=diag, sup=-up[:-1], rhs=rhs)
    out = np.empty(M + 1)
    out[0] = 1.0
    out[1:] = solve_tridiagonal(sys)
    return out


def _converge(solve_at, tol: float, M0: int, cap: int) -> tuple[np.ndarray, int, float]:
    """Double ``M`` until the leading half of the truncated solution is stable to ``tol``.

    Returns the stable prefix (length ``M + 1``), ``M`` and the achieved change.
    """
    M = M0
    prev = solve_at(M)
    while True:
        if 2 * M > cap:
            raise NoConvergence(f"truncation index exceeded cap {cap}")
        cur = solve_at(2 * M)
        # entries near the truncation boundary of ``prev`` are not yet trustworthy
        half = M // 2 + 1
        change = float(np.max(np.abs(cur[:half] - prev[:half])))
        if change < tol:
            return cur[: M + 1].copy(), M, change
        prev, M = cur, 2 * M


def beta_recursion(p: DiffusionParams, tol: float = DEFAULT_TOL, M0: int = M_START, cap: int = M_CAP) -> np.ndarray:
    p.validate()
    beta, _, _ = _converge(lambda M: _beta_truncated(p, M), tol, M0, cap)
    return beta


def alpha_tail(p: DiffusionParams, tol: float = DEFAULT_TOL, M0: int = M_START, cap: int = M_CAP) -> np.ndarray:
    p.validate()
    alpha, _, _ = _converge(lambda M: _alpha_truncated(p, M), tol, M0, cap)
    return alpha


def alpha_from_beta(p: DiffusionParams, beta: np.ndarray) -> np.ndarray:
    """Tail probabilities from sampling probabilities.

    ``alpha[n] = sigma^n / prod_{j<=n}(j + theta nu1) * (beta[n+1] - beta[n+2]) / (beta[1] - beta[2])``
    for ``n = 0..len(beta) - 3``.
    """
    beta = np.asarray(beta, dtype=float)
    M = len(beta) - 3
    gap = beta[1] - beta[2]
    if not gap > 0:
        raise DegenerateBeta(f"beta[1] - beta[2] = {gap}")
    alpha = np.zeros(M + 1)
    alpha[0] = 1.0
    if p.sigma == 0.0 or M < 1:
        return alpha
    n = np.arange(1, M + 1, dtype=float)
    log_pref = n * math.log(p.sigma) - np.cumsum(np.log(n + p.theta * p.nu1))
    diffs = beta[2 : M + 2] - beta[3 : M + 3]
    alpha[1:] = np.exp(log_pref) * diffs / gap
    return alpha


# --- solution bundle ----------------------------------------------------------


@dataclass(frozen=True)
class DiffusionSolution:
    params: DiffusionParams
    beta: np.ndarray
    alpha: np.ndarray
    M: int
    tol: float

    @property
    def omega(self) -> np.ndarray:
        """``omega[n] = alpha[n-1] - alpha[n]``, ``omega[0] = 0``."""
        o = np.zeros_like(self.alpha)
        o[1:] = self.alpha[:-1] - self.alpha[1:]
        return o

    @property
    def delta(self) -> np.ndarray:
        d = np.zeros_like(self.beta)
        d[1:] = self.beta[:-1] - self.beta[1:]
        return d

    @property
    def normalizer(self) -> float:
        return wright_normalizer(self.params)


@functools.lru_cache(maxsize=256)
def solve_diffusion(p: DiffusionParams, tol: float = DEFAULT_TOL) -> DiffusionSolution:
    """Alpha and beta on a common truncation, both converged to ``tol``."""
    p.validate()
    beta, Mb, cb = _converge(lambda M: _beta_truncated(p, M), tol, M_START, M_CAP)
    alpha, Ma, ca = _converge(lambda M: _alpha_truncated(p, M), tol, M_START, M_CAP)
    M = max(Ma, Mb)
    if Mb < M:
        beta = _beta_truncated(p, 2 * M)[: M + 1]
    if Ma < M:
        alpha = _alpha_truncated(p, 2 * M)[: M + 1]
    for x in (alpha, beta):
        x.setflags(write=False)
    return DiffusionSolution(p, beta, alpha, M, max(ca, cb))


def anc_type1_prob(p: DiffusionParams) -> float:
    sol = solve_diffusion(p)
    return float(np.dot(sol.omega[1:], sol.beta[1:]))


def anc_type0_prob(p: DiffusionParams) -> float:
    sol = solve_diffusion(p)
    return float(np.dot(sol.alpha[:-1], sol.delta[1:]))


def diffusion_fluxes_rates(p: DiffusionParams) -> FluxReport:
    """Marginal fluxes and rates of the common-ancestor type process, per-level identity residuals."""
    sol = solve_diffusion(p)
    th0, th1 = p.theta * p.nu0, p.theta * p.nu1
    alpha, beta, omega, delta = sol.alpha, sol.beta, sol.omega, sol.delta
    M = sol.M
    lvl10 = np.zeros(M + 1)
    lvl01 = np.zeros(M + 1)
    lvl10[1:] = th0 * alpha[:-1] * beta[1:]
    lvl01[1:] = th1 * omega[1:] * delta[1:]
    coal = omega * delta
    tail_after = np.zeros(M + 1)
    tail_after[:-1] = np.cumsum(coal[::-1])[::-1][1:]
    n = np.arange(M + 1, dtype=float)
    resid = lvl10 + tail_after - lvl01 - (n - 1) * coal
    resid[0] = 0.0
    p1 = float(np.dot(omega[1:], beta[1:]))
    p0 = float(np.dot(alpha[:-1], delta[1:]))
    f10, f01 = float(lvl10.sum()), float(lvl01.sum())
    return FluxReport(
        f10=f10,
        f01=f01,
        q10=f10 / p1,
        q01=f01 / p0,
        p1=p1,
        p0=p0,
        per_level10=lvl10,
        per_level01=lvl01,
        identity_residual=resid,
    )


@dataclass(frozen=True)
class DerivativeBundle:
    """Derivatives with respect to sigma. ``finite_difference`` flags the sigma = 0 fallback."""

    alpha_prime: np.ndarray
    beta_prime: np.ndarray
    K: float
    q10_prime: float
    q01_prime: float
    finite_difference: bool = False


def diffusion_derivatives(p: DiffusionParams) -> DerivativeBundle:
    """Analytic sigma-derivatives of alpha, beta and the two ancestral mutation rates."""
    if p.sigma == 0.0:
        raise SigmaZero("analytic derivatives divide by sigma; use derivatives_fd")
    sol = solve_diffusion(p)
    alpha, beta, delta = sol.alpha, sol.beta, sol.delta
    th0, th1 = p.theta * p.nu0, p.theta * p.nu1
    K = ((1 + th1) * (alpha[0] - alpha[1]) + p.sigma + th0) / p.sigma
    M = sol.M
    ap = np.zeros(M + 1)
    ap[1:] = alpha[:-1] - K * alpha[1:]
    bp = np.zeros(M + 1)
    bp[1:M] = beta[1] * beta[1:M] - beta[2 : M + 1]
    bp[M] = np.nan  # needs beta[M+1]
    A_minus_B = float(np.dot(alpha[:-1] - alpha[1:], beta[1:]))
    D = float(np.dot(alpha[:-1], delta[1:]))
    q10p = th0 * beta[1] * float(np.dot(ap[1:], beta[1:])) / A_minus_B**2
    q01p = -th1 * (beta[0] - beta[1]) * float(np.dot(ap[1:], delta[1:])) / D**2
    return DerivativeBundle(ap, bp, K, q10p, q01p)


def derivatives_fd(p: DiffusionParams, h: float | None = None) -> DerivativeBundle:
    """Finite-difference rate derivatives; one-sided at sigma = 0, central otherwise."""
    if h is None:
        h = 1e-4 * max(p.sigma, 1.0)
    lo = p.with_sigma(p.sigma - h) if p.sigma >= h else p
    hi = p.with_sigma(p.sigma + h)
    span = hi.sigma - lo.sigma
    r_lo, r_hi = diffusion_fluxes_rates(lo), diffusion_fluxes_rates(hi)
    s_lo, s_hi = solve_diffusion(lo), solve_diffusion(hi)
    M = min(s_lo.M, s_hi.M)
    ap = (s_hi.alpha[: M + 1] - s_lo.alpha[: M + 1]) / span
    bp = (s_hi.beta[: M + 1] - s_lo.beta[: M + 1]) / span
    return DerivativeBundle(
        alpha_prime=ap,
        beta_prime=bp,
        K=float("nan"),
        q10_prime=(r_hi.q10 - r_lo.q10) / span,
        q01_prime=(r_hi.q01 - r_lo.q01) / span,
        finite_difference=True,
    )
