"""Closed forms in the deterministic (law of large numbers) limit."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import DetParams


def det_equilibrium(p: DetParams) -> float:
    """Stable fixed point of ``y' = -s y (1-y) - u nu0 y + u nu1 (1-y)``."""
    p.validate()
    s, u = p.s, p.u
    if s == 0.0:
        return p.nu1
    # smaller root of s y^2 - (s+u) y + u nu1, written without cancellation
    disc = (s + u) ** 2 - 4.0 * s * u * p.nu1
    return 2.0 * u * p.nu1 / ((s + u) + math.sqrt(disc))


def geometric_p(p: DetParams) -> float:
    """Parameter of the geometric stationary line count ``P(L = n) = p^(n-1) (1-p)``."""
    p.validate()
    return _p_closed_form(p.s, p.u, p.nu1)


def _p_closed_form(s: float, u: float, nu1: float) -> float:
    # nu1 = 0 is excluded by validation but kept as the continuous limit
    if nu1 == 0.0:
        return s / (u + s)
    if s == 0.0:
        return 0.0
    # smaller root of u nu1 x^2 - (u+s) x + s
    bq = (u + s) / (u * nu1)
    cq = s / (u * nu1)
    return 2.0 * cq / (bq + math.sqrt(bq * bq - 4.0 * cq))


def one_minus_p(p: DetParams) -> float:
    """``1 - p`` evaluated directly; ``p`` sits close to 1 under strong selection."""
    p.validate()
    s, u, nu0, nu1 = p.s, p.u, p.nu0, p.nu1
    if s == 0.0:
        return 1.0
    # positive root of u nu1 x^2 + (u + s - 2 u nu1) x - u nu0
    B = u + s - 2.0 * u * nu1
    root = math.sqrt((u + s) ** 2 - 4.0 * s * u * nu1)
    if B >= 0.0:
        return 2.0 * u * nu0 / (B + root)
    return (root - B) / (2.0 * u * nu1)


def geometric_p_prime(p: DetParams) -> float:
    """``dp/ds``."""
    s, u, nu1 = p.s, p.u, p.nu1
    root = math.sqrt((u + s) ** 2 - 4.0 * s * u * nu1)
    B = u + s - 2.0 * u * nu1
    if B >= 0.0:
        # 1 - B/root cancels for s >> u; root^2 - B^2 = 4 u^2 nu0 nu1
        return 2.0 * u * p.nu0 / (root * (root + B))
    return (1.0 - B / root) / (2.0 * u * nu1)


def det_geometric(p: DetParams):
    """``(p, p_prime, w, a)`` where ``w(n)`` and ``a(n)`` evaluate the geometric law and its tail."""
    q = geometric_p(p)

    def w(n):
        n = np.asarray(n, dtype=float)
        return q ** (n - 1) * (1.0 - q)

    def a(n):
        return np.asarray(q, dtype=float) ** np.asarray(n, dtype=float)

    return q, geometric_p_prime(p), w, a


@dataclass(frozen=True)
class DetSolution:
    params: DetParams
    y_inf: float
    p: float
    p_prime: float
    q10: float
    q01: float
    p_a1: float
    f10: float
    f01: float
    q10_prime: float
    q01_prime: float

    def per_line(self, n_max: int) -> tuple[np.ndarray, np.ndarray]:
        """Per-line beneficial and deleterious fluxes for ``n = 1..n_max``."""
        par = self.params
        n = np.arange(1, n_max + 1, dtype=float)
        y, q = self.y_inf, self.p
        omq = one_minus_p(par)
        ben = par.u * par.nu0 * q ** (n - 1) * y**n
        dele = par.u * par.nu1 * q ** (n - 1) * omq * y ** (n - 1) * (1 - y)
        return ben, dele


def det_rates_and_flux(p: DetParams) -> DetSolution:
    y = det_equilibrium(p)
    q = geometric_p(p)
    omq = one_minus_p(p)
    qp = geometric_p_prime(p)
    q10 = p.u * p.nu0 / omq
    q01 = p.u * p.nu1 * omq
    one_minus_py = omq + q * (1.0 - y)
    p_a1 = omq * y / one_minus_py
    # sum_n a_{n-1} b_n = y / (1 - p y); sum_n w_n (b_{n-1} - b_n) = (1-p)(1-y) / (1 - p y)
    f10 = p.u * p.nu0 * y / one_minus_py
    f01 = p.u * p.nu1 * omq * (1.0 - y) / one_minus_py
    return DetSolution(
        params=p,
        y_inf=y,
        p=q,
        p_prime=qp,
        q10=q10,
        q01=q01,
        p_a1=p_a1,
        f10=f10,
        f01=f01,
        q10_prime=p.u * p.nu0 * qp / omq**2,
        q01_prime=-p.u * p.nu1 * qp,
    )
