"""Shared numeric kernels: tridiagonal solves, falling-factorial ratios, truncation control."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import InvalidParameter, NoConvergence, SingularSystem


@dataclass(frozen=True)
class TridiagonalSystem:
    """``A x = rhs`` with ``A`` given by its three diagonals.

    ``sub[i]`` is ``A[i+1, i]`` and ``sup[i]`` is ``A[i, i+1]``.
    """

    sub: Sequence[float]
    diag: Sequence[float]
    sup: Sequence[float]
    rhs: Sequence[float]

    def __post_init__(self):
        n = len(self.diag)
        if n == 0:
            raise InvalidParameter("empty tridiagonal system")
        if len(self.sub) != n - 1 or len(self.sup) != n - 1 or len(self.rhs) != n:
            raise InvalidParameter(
                f"inconsistent lengths: sub={len(self.sub)} diag={n} "
                f"sup={len(self.sup)} rhs={len(self.rhs)}"
            )

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.asarray(self.diag, dtype=float) * x
        if len(x) > 1:
            out[:-1] += np.asarray(self.sup, dtype=float) * x[1:]
            out[1:] += np.asarray(self.sub, dtype=float) * x[:-1]
        return out

    def residual(self, x) -> np.ndarray:
        return self.matvec(x) - np.asarray(self.rhs, dtype=float)


def solve_tridiagonal(sys: TridiagonalSystem) -> np.ndarray:
    """Thomas algorithm. Raises SingularSystem on a zero pivot."""
    a = [float(v) for v in sys.sub]
    b = [float(v) for v in sys.diag]
    c = [float(v) for v in sys.sup]
    d = [float(v) for v in sys.rhs]
    n = len(b)
    cp = [0.0] * n
    dp = [0.0] * n
    piv = b[0]
    if piv == 0.0 or not math.isfinite(piv):
        raise SingularSystem("zero pivot in row 0")
    cp[0] = c[0] / piv if n > 1 else 0.0
    dp[0] = d[0] / piv
    for i in range(1, n):
        piv = b[i] - a[i - 1] * cp[i - 1]
        if piv == 0.0 or not math.isfinite(piv):
            raise SingularSystem(f"zero pivot in row {i}")
        if i < n - 1:
            cp[i] = c[i] / piv
        dp[i] = (d[i] - a[i - 1] * dp[i - 1]) / piv
    x = dp
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return np.array(x)


def falling_factorial_ratio(k: int, n: int, N: int) -> float:
    """``k(k-1)...(k-n+1) / N(N-1)...(N-n+1)``, evaluated in log space."""
    if not (0 <= k <= N and 0 <= n <= N):
        raise InvalidParameter(f"need 0 <= k, n <= N, got k={k}, n={n}, N={N}")
    if n == 0:
        return 1.0
    if n > k:
        return 0.0
    logr = (gammaln(k + 1) - gammaln(k - n + 1)) - (gammaln(N + 1) - gammaln(N - n + 1))
    return float(min(1.0, math.exp(logr)))


def log_falling_ratio_rows(N: int, n_max: int) -> np.ndarray:
    """Table ``T[n, k] = log(k^(n) / N^(n))`` for ``n <= n_max``, ``k in 0..N``.

    Entries with ``n > k`` are ``-inf``.
    """
    k = np.arange(N + 1, dtype=float)
    out = np.full((n_max + 1, N + 1), -np.inf)
    out[0] = 0.0
    cur = np.zeros(N + 1)
    with np.errstate(divide="ignore"):
        for n in range(1, n_max + 1):
            # factor (k - n + 1) / (N - n + 1); log(0) = -inf marks n > k
            cur = cur + np.log(np.maximum(k - n + 1, 0.0)) - math.log(N - n + 1)
            out[n] = cur
    return out


def adaptive_truncation(
    solve_at: Callable[[int], np.ndarray],
    monitor: int,
    tol: float,
    M0: int = 128,
    cap: int = 2**20,
) -> tuple[np.ndarray, int, float]:
    """Double the truncation index ``M`` until ``x[monitor]`` moves by less than ``tol``.

    ``solve_at(M)`` returns the truncated solution ``x_0..x_M``. Returns the
    converged solution, ``M`` and the last observed change.
    """
    M = M0
    prev = solve_at(M)
    while True:
        M2 = 2 * M
        if M2 > cap:
            raise NoConvergence(f"truncation exceeded cap {cap} (last M={M})")
        cur = solve_at(M2)
        change = abs(cur[monitor] - prev[monitor])
        if change < tol:
            return cur, M2, change
        prev, M = cur, M2
