"""Parameter records for the finite, diffusion and deterministic regimes."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

from .errors import InvalidParameter

NU_SUM_TOL = 1e-12


def _check_nu(nu0: float, nu1: float) -> None:
    for name, v in (("nu0", nu0), ("nu1", nu1)):
        if not (math.isfinite(v) and 0.0 < v < 1.0):
            raise InvalidParameter(f"{name} must lie in (0, 1), got {v!r}")
    if abs(nu0 + nu1 - 1.0) > NU_SUM_TOL:
        raise InvalidParameter(f"nu0 + nu1 must equal 1, got {nu0 + nu1!r}")


def _check_rate(name: str, v: float, *, strict: bool) -> None:
    if not math.isfinite(v):
        raise InvalidParameter(f"{name} must be finite, got {v!r}")
    if strict and v <= 0.0:
        raise InvalidParameter(f"{name} must be > 0, got {v!r}")
    if not strict and v < 0.0:
        raise InvalidParameter(f"{name} must be >= 0, got {v!r}")


@dataclass(frozen=True)
class FiniteParams:
    """Moran model with ``N`` individuals.

    ``s`` is the selective advantage of type 0, ``u`` the total mutation
    rate, and a mutation produces type ``j`` with probability ``nu_j``.
    """

    N: int
    s: float
    u: float
    nu0: float
    nu1: float

    @classmethod
    def from_nu1(cls, N: int, s: float, u: float, nu1: float) -> "FiniteParams":
        return cls(N=N, s=s, u=u, nu0=1.0 - nu1, nu1=nu1)

    def with_s(self, s: float) -> "FiniteParams":
        return replace(self, s=s)

    def validate(self) -> "FiniteParams":
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 1:
            raise InvalidParameter(f"N must be an integer >= 1, got {self.N!r}")
        _check_rate("s", self.s, strict=False)
        _check_rate("u", self.u, strict=True)
        _check_nu(self.nu0, self.nu1)
        return self


@dataclass(frozen=True)
class DiffusionParams:
    """Diffusion limit: ``sigma = lim N s^N`` and ``theta = lim N u^N``."""

    sigma: float
    theta: float
    nu0: float
    nu1: float

    @classmethod
    def from_nu1(cls, sigma: float, theta: float, nu1: float) -> "DiffusionParams":
        return cls(sigma=sigma, theta=theta, nu0=1.0 - nu1, nu1=nu1)

    def with_sigma(self, sigma: float) -> "DiffusionParams":
        return replace(self, sigma=sigma)

    def validate(self) -> "DiffusionParams":
        _check_rate("sigma", self.sigma, strict=False)
        _check_rate("theta", self.theta, strict=True)
        _check_nu(self.nu0, self.nu1)
        return self


@dataclass(frozen=True)
class DetParams:
    """Deterministic limit: selection ``s`` and mutation ``u`` without rescaling."""

    s: float
    u: float
    nu0: float
    nu1: float

    @classmethod
    def from_nu1(cls, s: float, u: float, nu1: float) -> "DetParams":
        return cls(s=s, u=u, nu0=1.0 - nu1, nu1=nu1)

    def with_s(self, s: float) -> "DetParams":
        return replace(self, s=s)

    def validate(self) -> "DetParams":
        _check_rate("s", self.s, strict=False)
        _check_rate("u", self.u, strict=True)
        _check_nu(self.nu0, self.nu1)
        return self


AnyParams = Union[FiniteParams, DiffusionParams, DetParams]


def validate(params: AnyParams) -> AnyParams:
    """Return ``params`` unchanged if every constraint holds, else raise InvalidParameter."""
    if not isinstance(params, (FiniteParams, DiffusionParams, DetParams)):
        raise InvalidParameter(f"unknown parameter record {type(params).__name__}")
    return params.validate()
