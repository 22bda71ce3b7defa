"""Figure tables, parameter sweeps, the pedigree/phylogeny flux comparison and oracle validation."""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np
from scipy.optimize import brentq

from . import deterministic as det
from . import diffusion as dif
from . import finite as fin
from . import simulate as sim
from .errors import (
    InvalidOverride,
    InvalidParameter,
    NegativeNeutralRate,
    SigmaZero,
    TargetUnreachable,
    UnknownFigure,
)
from .params import DetParams, DiffusionParams, FiniteParams
from .svg import line_plot

# figure defaults taken from the figure captions
FIG_N = 10_000
FIG_U = 8e-4
FIG_NU1 = 0.99
FIG_PARTIAL_S = 1.5e-3
FIG_SWEEP_NU1 = (0.99, 0.01)
S_MAX = 0.0175
GRID_POINTS = 60
S_MIN_POSITIVE = 1e-5
PARTIAL_LEVELS = 20

FIGURES = ("anc-dist", "partial-fluxes", "mut-rates", "mut-fluxes")
B1_TOL = 1e-9


def s_grid(s_max: float = S_MAX, points: int = GRID_POINTS, s_min: float = S_MIN_POSITIVE) -> np.ndarray:
    """Zero followed by ``points - 1`` log-spaced values up to ``s_max``."""
    if points < 2 or not 0 < s_min < s_max:
        raise InvalidOverride(f"bad grid: points={points}, s_min={s_min}, s_max={s_max}")
    return np.concatenate([[0.0], np.geomspace(s_min, s_max, points - 1)])


# --- tables ---------------------------------------------------------------


def fmt17(v) -> str:
    return format(float(v), ".17g")


@dataclass(frozen=True)
class Table:
    columns: tuple[str, ...]
    data: np.ndarray
    title: str = ""

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def to_csv(self) -> str:
        lines = [",".join(self.columns)]
        lines += [",".join(fmt17(v) for v in row) for row in self.data]
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {"title": self.title, "columns": list(self.columns), "rows": [[float(v) for v in r] for r in self.data]},
            indent=2,
        )

    def to_svg(self, ylabel: str = "") -> str:
        x = self.data[:, 0]
        series = {c: self.data[:, i] for i, c in enumerate(self.columns) if i > 0}
        return line_plot(x, series, title=self.title, xlabel=self.columns[0], ylabel=ylabel)

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json() + "\n"
        if fmt == "svg":
            return self.to_svg()
        raise InvalidParameter(f"unknown format {fmt!r}")


# --- per-point quantities for each regime ---------------------------------

OUTPUTS = {
    "finite": ("b1", "pA1", "pA0", "q10", "q01", "f10", "f01"),
    "diffusion": ("beta1", "pA1", "pA0", "q10", "q01", "f10", "f01", "q10_prime", "q01_prime"),
    "deterministic": ("y_inf", "p", "pA1", "q10", "q01", "f10", "f01", "q10_prime", "q01_prime"),
}
SWEEPABLE = {
    "finite": ("s", "u", "nu1"),
    "diffusion": ("sigma", "theta", "nu1"),
    "deterministic": ("s", "u", "nu1"),
}


def finite_point(p: FiniteParams) -> dict[str, float]:
    sol = fin.solve_finite(p)
    r = fin.flux_report(p)
    return {"b1": float(sol.b[1]), "pA1": r.p1, "pA0": r.p0, "q10": r.q10, "q01": r.q01, "f10": r.f10, "f01": r.f01}


def diffusion_point(p: DiffusionParams) -> dict[str, float]:
    sol = dif.solve_diffusion(p)
    r = dif.diffusion_fluxes_rates(p)
    try:
        d = dif.diffusion_derivatives(p)
    except SigmaZero:
        d = dif.derivatives_fd(p)
    return {
        "beta1": float(sol.beta[1]),
        "pA1": r.p1,
        "pA0": r.p0,
        "q10": r.q10,
        "q01": r.q01,
        "f10": r.f10,
        "f01": r.f01,
        "q10_prime": d.q10_prime,
        "q01_prime": d.q01_prime,
    }


def det_point(p: DetParams) -> dict[str, float]:
    d = det.det_rates_and_flux(p)
    return {
        "y_inf": d.y_inf,
        "p": d.p,
        "pA1": d.p_a1,
        "q10": d.q10,
        "q01": d.q01,
        "f10": d.f10,
        "f01": d.f01,
        "q10_prime": d.q10_prime,
        "q01_prime": d.q01_prime,
    }


_POINT = {"finite": finite_point, "diffusion": diffusion_point, "deterministic": det_point}
_PARAMS = {"finite": FiniteParams, "diffusion": DiffusionParams, "deterministic": DetParams}


def _set(params, name: str, value: float):
    if name == "nu1":
        return replace(params, nu1=value, nu0=1.0 - value)
    return replace(params, **{name: value})


@dataclass(frozen=True)
class RunSpec:
    """A sweep of one parameter with a set of requested output quantities."""

    regime: str
    params: Any
    sweep: tuple[str, tuple[float, ...]] | None = None
    outputs: tuple[str, ...] = ()
    format: str = "csv"

    def validate(self) -> "RunSpec":
        if self.regime not in OUTPUTS:
            raise InvalidParameter(f"unknown regime {self.regime!r}")
        if not isinstance(self.params, _PARAMS[self.regime]):
            raise InvalidParameter(f"{self.regime} regime needs {_PARAMS[self.regime].__name__}")
        self.params.validate()
        bad = [o for o in self.outputs if o not in OUTPUTS[self.regime]]
        if bad:
            raise InvalidParameter(f"quantities {bad} are not defined for the {self.regime} regime")
        if self.sweep is not None:
            name, grid = self.sweep
            if name not in SWEEPABLE[self.regime]:
                raise InvalidParameter(f"cannot sweep {name!r} in the {self.regime} regime")
            g = np.asarray(grid, dtype=float)
            if g.size == 0 or np.any(np.diff(g) <= 0):
                raise InvalidParameter("sweep grid must be non-empty and strictly increasing")
        if self.format not in ("csv", "json", "svg"):
            raise InvalidParameter(f"unknown format {self.format!r}")
        return self

    def points(self) -> list:
        if self.sweep is None:
            return [self.params]
        name, grid = self.sweep
        return [_set(self.params, name, float(v)).validate() for v in grid]


def _eval(args):
    regime, params = args
    return _POINT[regime](params)


def evaluate_points(regime: str, points: list, jobs: int = 1) -> list[dict[str, float]]:
    """Evaluate points, in parallel when ``jobs > 1``; results keep input order."""
    work = [(regime, p) for p in points]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_eval, work))
    return [_eval(w) for w in work]


def run_spec(spec: RunSpec, jobs: int = 1) -> Table:
    spec.validate()
    outputs = spec.outputs or OUTPUTS[spec.regime]
    res = evaluate_points(spec.regime, spec.points(), jobs)
    if spec.sweep is not None:
        name, grid = spec.sweep
        cols = (name, *outputs)
        data = np.array([[g, *(r[o] for o in outputs)] for g, r in zip(grid, res)], dtype=float)
    else:
        cols = tuple(outputs)
        data = np.array([[res[0][o] for o in outputs]], dtype=float)
    return Table(cols, data, title=f"{spec.regime} regime")


# --- figures ---------------------------------------------------------------

_FIG_KEYS = {
    "anc-dist": {"N", "u", "nu1", "s_max", "points"},
    "partial-fluxes": {"N", "u", "nu1", "s", "levels"},
    "mut-rates": {"N", "u", "nu1_values", "s_max", "points"},
    "mut-fluxes": {"N", "u", "nu1_values", "s_max", "points"},
}
_YLABEL = {
    "anc-dist": "probability",
    "partial-fluxes": "flux per level",
    "mut-rates": "rate",
    "mut-fluxes": "flux",
}


def figure_defaults(name: str) -> dict[str, Any]:
    if name not in _FIG_KEYS:
        raise UnknownFigure(f"unknown figure {name!r}; choose from {', '.join(FIGURES)}")
    base = {"N": FIG_N, "u": FIG_U}
    if name == "anc-dist":
        return {**base, "nu1": FIG_NU1, "s_max": S_MAX, "points": GRID_POINTS}
    if name == "partial-fluxes":
        return {**base, "nu1": FIG_NU1, "s": FIG_PARTIAL_S, "levels": PARTIAL_LEVELS}
    return {**base, "nu1_values": FIG_SWEEP_NU1, "s_max": S_MAX, "points": GRID_POINTS}


@dataclass(frozen=True)
class Figure:
    name: str
    settings: dict
    table: Table

    def render(self, fmt: str) -> str:
        if fmt == "svg":
            return self.table.to_svg(_YLABEL[self.name])
        return self.table.render(fmt)


def run_figure(name: str, overrides: dict[str, Any] | None = None, jobs: int = 1) -> Figure:
    """Data behind one of the named figures; ``overrides`` replace caption defaults."""
    cfg = figure_defaults(name)
    for k, v in (overrides or {}).items():
        if k not in _FIG_KEYS[name]:
            raise InvalidOverride(f"figure {name!r} does not take {k!r}; allowed: {sorted(_FIG_KEYS[name])}")
        cfg[k] = v
    N, u = int(cfg["N"]), float(cfg["u"])
    if name == "partial-fluxes":
        p = FiniteParams.from_nu1(N, float(cfg["s"]), u, float(cfg["nu1"])).validate()
        L = int(cfg["levels"])
        if not 1 <= L <= N:
            raise InvalidOverride(f"levels must lie in [1, N], got {L}")
        _, _, l10, l01 = fin.mutation_fluxes(p)
        n = np.arange(1, L + 1)
        data = np.column_stack([n, l10[1 : L + 1], l01[1 : L + 1]])
        return Figure(name, cfg, Table(("n", "f10_n", "f01_n"), data, "per-level mutation fluxes"))

    grid = s_grid(float(cfg["s_max"]), int(cfg["points"]))
    if name == "anc-dist":
        base = FiniteParams.from_nu1(N, 0.0, u, float(cfg["nu1"])).validate()
        res = evaluate_points("finite", [base.with_s(float(s)) for s in grid], jobs)
        data = np.column_stack([grid, [r["b1"] for r in res], [r["pA1"] for r in res]])
        return Figure(name, cfg, Table(("s", "b1", "pA1"), data, "type-1 proportion and ancestor type"))

    cols, series = ["s"], [grid]
    for nu1 in cfg["nu1_values"]:
        base = FiniteParams.from_nu1(N, 0.0, u, float(nu1)).validate()
        res = evaluate_points("finite", [base.with_s(float(s)) for s in grid], jobs)
        keys = ("q10", "q01") if name == "mut-rates" else ("f10",)
        for k in keys:
            cols.append(f"{k}[nu1={float(nu1):g}]")
            series.append([r[k] for r in res])
    title = "marginal mutation rates" if name == "mut-rates" else "marginal mutation fluxes"
    return Figure(name, cfg, Table(tuple(cols), np.column_stack(series), title))


# --- pedigree versus phylogeny ----------------------------------------------


@dataclass(frozen=True)
class FluxComparison:
    """Total mutation flux in the pedigree versus on the ancestral line.

    Both types carry neutral mutations on top of the selected locus, with
    rates chosen so that every individual mutates at ``total_rate`` in total.
    """

    v0: float
    v1: float
    pedigree_flux: float
    phylo_flux: float
    ratio: float
    b1: float
    p1: float
    p0: float
    q10: float
    q01: float
    total_rate: float


def compare_fluxes(p: FiniteParams, total_rate: float) -> FluxComparison:
    p.validate()
    v0 = total_rate - p.u * p.nu1
    v1 = total_rate - p.u * p.nu0
    if not (v0 > 0 and v1 > 0):
        raise NegativeNeutralRate(
            f"total rate {total_rate} must exceed u*nu1={p.u * p.nu1} and u*nu0={p.u * p.nu0}"
        )
    b1 = float(fin.solve_finite(p).b[1])
    r = fin.flux_report(p)
    ped = (1.0 - b1) * (v0 + p.u * p.nu1) + b1 * (v1 + p.u * p.nu0)
    phy = r.p0 * (v0 + r.q01) + r.p1 * (v1 + r.q10)
    return FluxComparison(v0, v1, ped, phy, ped / phy, b1, r.p1, r.p0, r.q10, r.q01, total_rate)


def find_s_for_b1(p: FiniteParams, target: float, tol: float = B1_TOL, s_cap: float = 1e3) -> float:
    """Selection strength at which the type-1 proportion ``b1`` equals ``target``.

    ``b1`` is strictly decreasing in ``s``; the root is bracketed by doubling
    and then refined with Brent's method. ``p.s`` is ignored.
    """
    base = p.with_s(0.0).validate()

    def b1(s: float) -> float:
        return float(fin.sampling_probs(base.with_s(s))[1])

    top = b1(0.0)
    if abs(top - target) <= tol:
        return 0.0
    if not 0.0 < target < top:
        raise TargetUnreachable(f"target {target} outside the reachable range (0, {top})")
    hi = 1e-4
    while b1(hi) > target:
        hi *= 2.0
        if hi > s_cap:
            raise TargetUnreachable(f"b1 stays above {target} for s <= {s_cap}")
    s = brentq(lambda x: b1(x) - target, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(b1(s) - target) > tol:
        raise TargetUnreachable(f"root refinement stalled: |b1 - target| = {abs(b1(s) - target):.3g}")
    return float(s)


# --- oracle validation ------------------------------------------------------

TRACER_MAX_N = 200


@dataclass(frozen=True)
class ValidationConfig:
    seed: int = 0
    moran_events: int = 10**6
    line_events: int = 10**6
    killed_replicates: int = 10**5
    killed_n0: int = 3
    tracer_horizon: float = 2.0e4
    tracer_replicates: int = 25
    burn_in: float = 0.1
    z: float = 3.0
    tv_max: float = 0.02
    tail_floor: float = 0.01


@dataclass(frozen=True)
class Check:
    name: str
    analytic: float
    simulated: float
    stderr: float | None
    passed: bool
    rule: str


@dataclass(frozen=True)
class ValidationReport:
    regime: str
    params: dict
    checks: tuple[Check, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None
            return v

        rows = [{k: clean(v) for k, v in asdict(c).items()} for c in self.checks]
        return json.dumps({"regime": self.regime, "params": self.params, "passed": self.passed, "checks": rows}, indent=2)


def _zcheck(name: str, exact: float, est: sim.SimEstimate, z: float) -> Check:
    v, se = float(est.value), float(est.stderr)
    ok = abs(v - exact) <= z * se if se > 0 else v == exact or abs(v - exact) <= 1e-12 * max(1.0, abs(exact))
    return Check(name, float(exact), v, se, bool(ok), f"|sim - exact| <= {z:g} SE")


def _tolcheck(name: str, a: float, b: float, tol: float, relative: bool = False) -> Check:
    scale = max(abs(a), abs(b)) if relative else 1.0
    ok = abs(a - b) <= tol * scale
    kind = "relative" if relative else "absolute"
    return Check(name, float(a), float(b), None, bool(ok), f"{kind} difference <= {tol:g}")


def _finite_checks(p: FiniteParams, vc: ValidationConfig) -> list[Check]:
    out: list[Check] = []
    sol = fin.solve_finite(p)
    N = p.N
    occ = sim.simulate_moran(p, sim.SimConfig(seed=vc.seed, events=vc.moran_events, burn_in=vc.burn_in))
    k = np.arange(N + 1) / N
    out.append(_zcheck("moran.mean_type1_fraction", float(sol.pi @ k), occ.derived(k), vc.z))
    tv = sim.total_variation(occ.value, sol.pi)
    out.append(Check("moran.total_variation", 0.0, tv, None, tv <= vc.tv_max, f"TV <= {vc.tv_max:g}"))

    lc = sim.simulate_line_counting(p, sim.SimConfig(seed=vc.seed, events=vc.line_events, burn_in=vc.burn_in))
    out.append(_zcheck("lines.w1", float(sol.w[1]), sim.SimEstimate(lc.w.value[1], lc.w.stderr[1], lc.w.n), vc.z))
    for n in range(1, N):
        if sol.a[n] >= vc.tail_floor:
            est = sim.SimEstimate(lc.a.value[n], lc.a.stderr[n], lc.a.n)
            out.append(_zcheck(f"lines.tail[{n}]", float(sol.a[n]), est, vc.z))

    n0 = min(vc.killed_n0, N)
    kz = sim.simulate_killed_asg(p, n0, sim.SimConfig(seed=vc.seed, replicates=vc.killed_replicates))
    out.append(_zcheck(f"killed_asg.b[{n0}]", float(sol.b[n0]), kz, vc.z))

    if N <= TRACER_MAX_N:
        fr = fin.flux_report(p)
        tr = sim.simulate_ancestral_line(
            p, sim.SimConfig(seed=vc.seed, horizon=vc.tracer_horizon, replicates=vc.tracer_replicates, burn_in=vc.burn_in)
        )
        for name, exact in (("p1", fr.p1), ("f10", fr.f10), ("f01", fr.f01), ("q10", fr.q10), ("q01", fr.q01)):
            out.append(_zcheck(f"tracer.{name}", exact, getattr(tr, name), vc.z))
        se = math.hypot(tr.f10.stderr, tr.f01.stderr)
        bal = sim.SimEstimate(tr.f10.value - tr.f01.value, se, tr.f10.n)
        out.append(_zcheck("tracer.flux_balance", 0.0, bal, vc.z))
        out.append(Check("tracer.replay_mismatches", 0.0, float(tr.mismatches), None, tr.mismatches == 0, "== 0"))
    return out


def _diffusion_checks(p: DiffusionParams) -> list[Check]:
    out: list[Check] = []
    sol = dif.solve_diffusion(p)
    M = min(sol.M, 60)
    mom = dif.wright_moments(p, M)
    out.append(_tolcheck("beta.quadrature_vs_recursion", 0.0, float(np.abs(mom - sol.beta[: M + 1]).max()), 1e-6))
    lem = dif.alpha_from_beta(p, sol.beta)
    m = min(len(lem), M + 1)
    out.append(_tolcheck("alpha.recursion_vs_moments", 0.0, float(np.abs(lem[:m] - sol.alpha[:m]).max()), 1e-8))
    r = dif.diffusion_fluxes_rates(p)
    out.append(_tolcheck("flux_balance", r.f10, r.f01, 1e-12, relative=True))
    out.append(_tolcheck("identity_residual", 0.0, float(np.abs(r.identity_residual).max()), 1e-10))
    if p.sigma > 0:
        an, fd = dif.diffusion_derivatives(p), dif.derivatives_fd(p)
        out.append(_tolcheck("q10_prime_vs_fd", an.q10_prime, fd.q10_prime, 1e-4, relative=True))
        out.append(_tolcheck("q01_prime_vs_fd", an.q01_prime, fd.q01_prime, 1e-4, relative=True))
    return out


def _det_checks(p: DetParams) -> list[Check]:
    d = det.det_rates_and_flux(p)
    n_max = 1
    while d.p**n_max * d.y_inf**n_max > 1e-18 and n_max < 10**6:
        n_max *= 2
    n = np.arange(1, n_max + 1, dtype=float)
    series = float(np.sum((1 - d.p) * d.p ** (n - 1) * d.y_inf**n))
    ben, dele = d.per_line(n_max)
    out = [
        _tolcheck("pA1_closed_form_vs_series", d.p_a1, series, 1e-12, relative=True),
        _tolcheck("flux_balance", d.f10, d.f01, 1e-12, relative=True),
        _tolcheck("per_line_total_vs_closed_form", d.f10, float(ben.sum()), 1e-12, relative=True),
    ]
    return out


def validate_suite(regime: str, params, vc: ValidationConfig | None = None) -> ValidationReport:
    """Run the oracle checks for ``regime``; failures are report entries, not exceptions."""
    vc = vc or ValidationConfig()
    params.validate()
    if regime == "finite":
        checks = _finite_checks(params, vc)
    elif regime == "diffusion":
        checks = _diffusion_checks(params)
    elif regime == "deterministic":
        checks = _det_checks(params)
    else:
        raise InvalidParameter(f"unknown regime {regime!r}")
    return ValidationReport(regime, asdict(params), tuple(checks))
