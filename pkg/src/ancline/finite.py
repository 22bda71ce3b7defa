"""Exact stationary quantities of the finite Moran model and its ancestral line.

Arrays are indexed by the natural index of the quantity: ``pi[k]`` for
``k = 0..N``, ``a[n]`` for ``n = 0..N``, ``b[n]`` for ``n = 0..N+1`` and
``w[n]`` for ``n = 0..N`` with the unused ``w[0] = 0``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateDenominator, InvalidParameter, UndefinedConditional
from .numerics import TridiagonalSystem, solve_tridiagonal
from .params import FiniteParams

MOMENTS_MAX_N = 5000
_LOG_TINY = math.log(1e-320)


def _frozen(x: np.ndarray) -> np.ndarray:
    x.setflags(write=False)
    return x


def moran_rates(p: FiniteParams) -> tuple[np.ndarray, np.ndarray]:
    """Birth and death rates of the type-1 count ``Y``, indexed by ``k = 0..N``."""
    N = p.N
    k = np.arange(N + 1, dtype=float)
    up = k * (N - k) / N + p.u * p.nu1 * (N - k)
    down = (1.0 + p.s) * (N - k) * k / N + p.u * p.nu0 * k
    return up, down


def moran_stationary(p: FiniteParams) -> np.ndarray:
    """Reversible stationary law of ``Y`` from the birth-death ratios, in log space."""
    p.validate()
    up, down = moran_rates(p)
    logw = np.zeros(p.N + 1)
    logw[1:] = np.cumsum(np.log(up[:-1]) - np.log(down[1:]))
    return np.exp(logw - logsumexp(logw))


def tail_probs(p: FiniteParams) -> np.ndarray:
    """Tail probabilities ``a[n] = P(L > n)`` of the stationary line-counting process.

    Solves the full boundary-value recursion for ``0 < n < N`` with
    ``a[0] = 1`` and ``a[N] = 0``; no truncation.
    """
    p.validate()
    N, s, u = p.N, p.s, p.u
    a = np.zeros(N + 1)
    a[0] = 1.0
    if N == 1:
        return a
    n = np.arange(1, N, dtype=float)
    branch = s * (N - n) / N
    down = (n + 1) / N + u * p.nu1
    diag = (n + 1) / N + branch + u
    rhs = np.zeros(N - 1)
    rhs[0] = branch[0]  # times a[0] = 1
    sys = TridiagonalSystem(sub=-branch[1:], diag=diag, sup=-down[:-1], rhs=rhs)
    a[1:N] = solve_tridiagonal(sys)
    return a


def _b_system(p: FiniteParams) -> TridiagonalSystem:
    N, s, u = p.N, p.s, p.u
    n = np.arange(1, N + 1, dtype=float)
    branch = s * (N - n) / N
    down = (n - 1) / N + u * p.nu1
    diag = (n - 1) / N + branch + u
    rhs = np.zeros(N)
    rhs[0] = down[0]  # times b[0] = 1
    return TridiagonalSystem(sub=-down[1:], diag=diag, sup=-branch[:-1], rhs=rhs)


def sampling_probs(
    p: FiniteParams,
    method: str = "recursion",
    pi: np.ndarray | None = None,
    max_N: int = MOMENTS_MAX_N,
) -> np.ndarray:
    """Sampling probabilities ``b[n] = E[Y^(n) / N^(n)]`` for ``n = 0..N+1``.

    ``method="recursion"`` solves the sampling recursion exactly;
    ``method="moments"`` sums falling-factorial ratios against the
    stationary law (``O(N * n)``, refused above ``max_N``).
    """
    p.validate()
    N = p.N
    b = np.zeros(N + 2)
    b[0] = 1.0
    if method == "recursion":
        b[1 : N + 1] = solve_tridiagonal(_b_system(p))
        return b
    if method != "moments":
        raise InvalidParameter(f"unknown method {method!r}")
    if N > max_N:
        raise InvalidParameter(f"moments route capped at N <= {max_N}, got N={N}")
    if pi is None:
        pi = moran_stationary(p)
    with np.errstate(divide="ignore"):
        logpi = np.log(pi)
        k = np.arange(N + 1, dtype=float)
        cur = logpi.copy()
        for n in range(1, N + 1):
            cur = cur + np.log(np.maximum(k - n + 1, 0.0)) - math.log(N - n + 1)
            top = cur.max()
            if top < _LOG_TINY:
                break
            b[n] = np.exp(logsumexp(cur))
    return b


@dataclass(frozen=True)
class FiniteSolution:
    params: FiniteParams
    pi: np.ndarray
    a: np.ndarray
    b: np.ndarray
    w: np.ndarray

    @property
    def delta(self) -> np.ndarray:
        """``delta[n] = b[n-1] - b[n]`` for ``n = 1..N+1``; ``delta[0] = 0``."""
        d = np.zeros_like(self.b)
        d[1:] = self.b[:-1] - self.b[1:]
        return d


@functools.lru_cache(maxsize=128)
def solve_finite(p: FiniteParams) -> FiniteSolution:
    """Compute and cache ``pi``, ``a``, ``b`` and ``w`` for one parameter point."""
    p.validate()
    pi = moran_stationary(p)
    a = tail_probs(p)
    b = sampling_probs(p)
    w = np.zeros(p.N + 1)
    w[1:] = a[:-1] - a[1:]
    return FiniteSolution(p, _frozen(pi), _frozen(a), _frozen(b), _frozen(w))


@dataclass(frozen=True)
class AncestralSummary:
    p1: float
    p0: float
    gamma: np.ndarray
    per_type1: np.ndarray
    per_type0: np.ndarray


def _support(sol: FiniteSolution, floor: float = 1e-300) -> int:
    """Largest n with a[n-1] above ``floor``; sums beyond it vanish."""
    idx = np.nonzero(sol.a[:-1] > floor)[0]
    return int(idx[-1]) + 1 if idx.size else 1


def anc_type1_prob(p: FiniteParams) -> float:
    sol = solve_finite(p)
    return float(np.dot(sol.w[1:], sol.b[1 : p.N + 1]))


def anc_type0_prob(p: FiniteParams) -> float:
    sol = solve_finite(p)
    N = p.N
    return float(np.dot(sol.a[:N], sol.delta[1 : N + 1]))


def ancestral_type_distribution(p: FiniteParams) -> AncestralSummary:
    """Stationary type of the distant ancestor and per-individual ancestor probabilities.

    ``gamma[k]`` is ``P(ancestor unfit | Y = k)``; ``per_type1[k]`` and
    ``per_type0[k]`` are the chances that one given unfit (fit) individual
    is the ancestor, NaN where no such individual exists.
    """
    sol = solve_finite(p)
    N = p.N
    n_max = min(_support(sol), N)
    k = np.arange(N + 1, dtype=float)
    gamma = np.zeros(N + 1)
    one_minus = np.zeros(N + 1)
    # running logs of k^(n)/N^(n) and k^(n-1)/N^(n)
    log_r = np.zeros(N + 1)
    with np.errstate(divide="ignore"):
        for n in range(1, n_max + 1):
            log_prev = log_r
            log_r = log_r + np.log(np.maximum(k - n + 1, 0.0)) - math.log(N - n + 1)
            gamma += sol.w[n] * np.exp(log_r)
            one_minus += sol.a[n - 1] * np.exp(log_prev - math.log(N - n + 1)) * (N - k)
    gamma = np.clip(gamma, 0.0, 1.0)
    gamma[0], gamma[N] = 0.0, 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        per1 = np.where(k > 0, gamma / k, np.nan)
        per0 = np.where(k < N, one_minus / (N - k), np.nan)
    return AncestralSummary(
        p1=anc_type1_prob(p),
        p0=anc_type0_prob(p),
        gamma=gamma,
        per_type1=per1,
        per_type0=per0,
    )


def beneficial_rate(p: FiniteParams, ell: int, k: int) -> float:
    """Rate ``(ell, 1) -> (ell + k, 0)`` of the pair (reversed line count, ancestral type)."""
    sol = solve_finite(p)
    if not (1 <= ell <= p.N and 0 <= k <= p.N - ell):
        raise InvalidParameter(f"need 1 <= ell <= N and 0 <= k <= N - ell, got ell={ell}, k={k}")
    if sol.w[ell] <= 0.0:
        raise UndefinedConditional(f"w[{ell}] = 0; the conditional rate is undefined")
    return p.u * p.nu0 * sol.w[ell + k] / sol.w[ell]


def deleterious_rate(p: FiniteParams, ell: int) -> float:
    """Rate ``(ell, 0) -> (ell, 1)``."""
    sol = solve_finite(p)
    if not 1 <= ell <= p.N:
        raise InvalidParameter(f"need 1 <= ell <= N, got ell={ell}")
    if sol.w[ell] <= 0.0:
        raise UndefinedConditional(f"w[{ell}] = 0; the conditional rate is undefined")
    denom = 1.0 - sol.b[ell]  # sum_{j <= ell} (b[j-1] - b[j])
    return p.u * p.nu1 * sol.delta[ell] / denom


def joint_LA_rates(p: FiniteParams, ell_max: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Tables of the mutation transitions of (reversed line count, ancestral type).

    Returns ``(ben, dele)``. ``ben[ell, m]`` is the rate ``(ell, 1) -> (m, 0)``
    for ``m >= ell`` (zero below the diagonal) and ``dele[ell]`` the rate
    ``(ell, 0) -> (ell, 1)``. Rows with ``w[ell] = 0`` are NaN. Row 0 is unused.
    """
    sol = solve_finite(p)
    N = p.N
    if ell_max is None:
        ell_max = min(N, _support(sol))
    ell_max = min(ell_max, N)
    w = np.asarray(sol.w)
    ben = np.zeros((ell_max + 1, N + 1))
    dele = np.full(ell_max + 1, np.nan)
    ben[0] = np.nan
    for ell in range(1, ell_max + 1):
        if w[ell] <= 0.0:
            ben[ell] = np.nan
            continue
        ben[ell, ell:] = p.u * p.nu0 * w[ell:] / w[ell]
        dele[ell] = p.u * p.nu1 * sol.delta[ell] / (1.0 - sol.b[ell])
    return ben, dele


@dataclass(frozen=True)
class FluxReport:
    """Marginal mutation fluxes and rates on the ancestral line.

    ``per_level10[n]``, ``per_level01[n]`` and ``identity_residual[n]`` are
    indexed by level ``n >= 1`` (index 0 unused, zero).
    """

    f10: float
    f01: float
    q10: float
    q01: float
    p1: float
    p0: float
    per_level10: np.ndarray
    per_level01: np.ndarray
    identity_residual: np.ndarray


def mutation_fluxes(p: FiniteParams) -> tuple[float, float, np.ndarray, np.ndarray]:
    """``(f10, f01, per_level10, per_level01)``; the totals agree at stationarity."""
    sol = solve_finite(p)
    N = p.N
    lvl10 = np.zeros(N + 1)
    lvl01 = np.zeros(N + 1)
    lvl10[1:] = p.u * p.nu0 * sol.a[:N] * sol.b[1 : N + 1]
    lvl01[1:] = p.u * p.nu1 * sol.w[1:] * sol.delta[1 : N + 1]
    return float(lvl10.sum()), float(lvl01.sum()), lvl10, lvl01


def mutation_rates(p: FiniteParams) -> tuple[float, float]:
    """``(q10, q01)``: fluxes divided by the stationary probability of the source type."""
    f10, f01, _, _ = mutation_fluxes(p)
    p1 = anc_type1_prob(p)
    p0 = anc_type0_prob(p)
    if p1 <= 0.0 or p0 <= 0.0:
        raise DegenerateDenominator(f"P(A=1)={p1}, P(A=0)={p0}")
    return f10 / p1, f01 / p0


def flux_identity_residuals(p: FiniteParams) -> np.ndarray:
    """Per-level residuals of the beneficial/deleterious flux identity.

    ``r[n] = f10[n] + (1/N) sum_{i>n} w[i] delta[i] - f01[n] - ((n-1)/N) w[n] delta[n]``.
    """
    sol = solve_finite(p)
    N = p.N
    _, _, lvl10, lvl01 = mutation_fluxes(p)
    coal = np.zeros(N + 2)
    coal[1 : N + 1] = sol.w[1:] * sol.delta[1 : N + 1]
    tail_after = np.zeros(N + 1)
    # tail_after[n] = sum_{i>n} coal[i]
    tail_after[: N + 1] = np.cumsum(coal[::-1])[::-1][1 : N + 2]
    n = np.arange(N + 1, dtype=float)
    r = lvl10 + tail_after / N - lvl01 - (n - 1) / N * coal[: N + 1]
    r[0] = 0.0
    return r


def flux_report(p: FiniteParams) -> FluxReport:
    f10, f01, lvl10, lvl01 = mutation_fluxes(p)
    q10, q01 = mutation_rates(p)
    return FluxReport(
        f10=f10,
        f01=f01,
        q10=q10,
        q01=q01,
        p1=anc_type1_prob(p),
        p0=anc_type0_prob(p),
        per_level10=lvl10,
        per_level01=lvl01,
        identity_residual=flux_identity_residuals(p),
    )
