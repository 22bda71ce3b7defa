"""Command-line front end.

Exit codes: 0 success, 1 invalid input, 2 numeric failure, 3 validation failure.
Settings resolve as command-line flags over config file over built-in defaults.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, fields
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import experiments as ex
from . import simulate as sim
from .errors import InvalidParameter, NumericFailure
from .params import DetParams, DiffusionParams, FiniteParams

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_VALIDATION = 0, 1, 2, 3

DEFAULTS: dict[str, dict[str, Any]] = {
    "finite": {"N": ex.FIG_N, "s": 0.0, "u": ex.FIG_U, "nu1": ex.FIG_NU1},
    "diffusion": {"sigma": 10.0, "theta": 8.0, "nu1": ex.FIG_NU1},
    "det": {"s": 0.008, "u": ex.FIG_U, "nu1": ex.FIG_NU1},
    "figure": {},
    "compare-fluxes": {"N": ex.FIG_N, "u": ex.FIG_U, "nu1": ex.FIG_NU1, "total_rate": 1.6e-3, "b1": 0.1},
    "find-s": {"N": ex.FIG_N, "u": ex.FIG_U, "nu1": ex.FIG_NU1, "target": 0.1},
    "validate": {"regime": "finite", "N": 50, "s": 0.05, "u": 0.02, "nu1": 0.9, "sigma": 10.0, "theta": 8.0},
    "simulate": {"N": 50, "s": 0.05, "u": 0.02, "nu1": 0.9, "n0": 3},
}
COMMON = {"seed": 0, "format": "csv", "out": None, "jobs": 1}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _grid(text: str) -> tuple[float, ...]:
    """``a,b,c`` or ``log:lo:hi:n`` or ``lin:lo:hi:n``."""
    if text.startswith(("log:", "lin:")):
        kind, lo, hi, n = text.split(":")
        f = np.geomspace if kind == "log" else np.linspace
        return tuple(float(v) for v in f(float(lo), float(hi), int(n)))
    return tuple(float(v) for v in text.split(","))


def _kv(text: str) -> tuple[str, Any]:
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    k, v = text.split("=", 1)
    return k, yaml.safe_load(v)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common")
    g.add_argument("--N", type=int)
    g.add_argument("--s", type=float)
    g.add_argument("--u", type=float)
    g.add_argument("--nu1", type=float)
    g.add_argument("--sigma", type=float)
    g.add_argument("--theta", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("--out", type=str)
    g.add_argument("--format", choices=("csv", "json", "svg"))
    g.add_argument("--config", type=str, help="YAML file; flags override its values")
    g.add_argument("--jobs", type=int, help="worker processes for sweeps")

    ap = _Parser(prog="ancline", description="Mutations on the ancestral line of the two-type Moran model.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, hlp in (
        ("finite", "exact finite-population quantities"),
        ("diffusion", "diffusion-limit quantities"),
        ("det", "deterministic-limit closed forms"),
    ):
        sp = sub.add_parser(name, parents=[common], help=hlp)
        sp.add_argument("--sweep", type=str, help="parameter to sweep")
        sp.add_argument("--grid", type=_grid, help="a,b,c or log:lo:hi:n or lin:lo:hi:n")
        sp.add_argument("--outputs", type=lambda t: tuple(t.split(",")), help="comma-separated quantities")

    sp = sub.add_parser("figure", parents=[common], help="figure data tables")
    sp.add_argument("name", help=", ".join(ex.FIGURES))
    sp.add_argument("--set", type=_kv, action="append", default=None, metavar="KEY=VALUE",
                    help="figure setting, e.g. s_max=0.01, points=30, levels=15, nu1_values=[0.99,0.01]")

    sp = sub.add_parser("compare-fluxes", parents=[common], help="pedigree versus phylogenetic mutation flux")
    sp.add_argument("--total-rate", dest="total_rate", type=float)
    sp.add_argument("--b1", type=float, help="choose s so that b1 hits this value (ignored when --s is given)")

    sp = sub.add_parser("find-s", parents=[common], help="selection strength for a target b1")
    sp.add_argument("--target", type=float)

    sp = sub.add_parser("validate", parents=[common], help="oracle-versus-solver checks")
    sp.add_argument("--regime", choices=("finite", "diffusion", "deterministic"))
    for f in fields(ex.ValidationConfig):
        if f.name != "seed":
            sp.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=type(f.default))

    sp = sub.add_parser("simulate", parents=[common], help="run one simulation oracle")
    sp.add_argument("which", choices=("moran", "lines", "killed", "tracer"))
    sp.add_argument("--events", type=int)
    sp.add_argument("--horizon", type=float)
    sp.add_argument("--replicates", type=int)
    sp.add_argument("--burn-in", dest="burn_in", type=float)
    sp.add_argument("--n0", type=int)
    return ap


def _load_config(path: str | None, command: str) -> dict[str, Any]:
    if not path:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as e:
        raise InvalidParameter(f"cannot read config {path}: {e}") from e
    if not isinstance(data, dict):
        raise InvalidParameter("config must be a mapping")
    out = {k: v for k, v in data.items() if not isinstance(v, dict)}
    section = data.get(command, {})
    if not isinstance(section, dict):
        raise InvalidParameter(f"config section {command!r} must be a mapping")
    out.update(section)
    return out


def resolve(args: argparse.Namespace) -> dict[str, Any]:
    """Merge built-in defaults, config file and explicit flags, in that order."""
    cfg = {**COMMON, **DEFAULTS[args.command]}
    cfg.update(_load_config(args.config, args.command))
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command"):
            cfg[k] = v
    return cfg


def _finite(c) -> FiniteParams:
    return FiniteParams.from_nu1(int(c["N"]), float(c["s"]), float(c["u"]), float(c["nu1"])).validate()


def _diff(c) -> DiffusionParams:
    return DiffusionParams.from_nu1(float(c["sigma"]), float(c["theta"]), float(c["nu1"])).validate()


def _det(c) -> DetParams:
    return DetParams.from_nu1(float(c["s"]), float(c["u"]), float(c["nu1"])).validate()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _record(data: dict[str, Any], fmt: str) -> str:
    """Render a flat record as a one-row CSV or a JSON object."""
    if fmt == "json":
        return json.dumps(data, indent=2) + "\n"
    if fmt == "svg":
        raise InvalidParameter("svg output needs a sweep or a figure")
    keys = list(data)
    vals = [ex.fmt17(data[k]) if isinstance(data[k], (float, int, np.floating)) else str(data[k]) for k in keys]
    return ",".join(keys) + "\n" + ",".join(vals) + "\n"


def _cmd_regime(c) -> str:
    regime = {"finite": "finite", "diffusion": "diffusion", "det": "deterministic"}[c["command"]]
    params = {"finite": _finite, "diffusion": _diff, "deterministic": _det}[regime](c)
    sweep = None
    if c.get("sweep"):
        if not c.get("grid"):
            raise InvalidParameter("--sweep needs --grid")
        sweep = (c["sweep"], tuple(c["grid"]))
    spec = ex.RunSpec(regime, params, sweep, tuple(c.get("outputs") or ()), c["format"])
    table = ex.run_spec(spec, jobs=int(c["jobs"]))
    if sweep is None:
        return _record(dict(zip(table.columns, map(float, table.data[0]))), c["format"])
    return table.render(c["format"])


def _cmd_figure(c) -> str:
    over = {k: c[k] for k in ("N", "u", "nu1", "s") if k in c and c[k] is not None}
    over.update(dict(c.get("set") or []))
    over.update({k: v for k, v in c.items() if k in ("s_max", "points", "levels", "nu1_values")})
    fig = ex.run_figure(c["name"], over, jobs=int(c["jobs"]))
    return fig.render(c["format"])


def _cmd_compare(c) -> str:
    base = FiniteParams.from_nu1(int(c["N"]), 0.0, float(c["u"]), float(c["nu1"])).validate()
    s = float(c["s"]) if c.get("s") is not None else ex.find_s_for_b1(base, float(c["b1"]))
    r = ex.compare_fluxes(base.with_s(s), float(c["total_rate"]))
    return _record({"s": s, **asdict(r)}, c["format"])


def _cmd_find_s(c) -> str:
    base = FiniteParams.from_nu1(int(c["N"]), 0.0, float(c["u"]), float(c["nu1"])).validate()
    s = ex.find_s_for_b1(base, float(c["target"]))
    return _record({"target": float(c["target"]), "s": s}, c["format"])


def _cmd_validate(c) -> tuple[str, bool]:
    regime = c["regime"]
    params = {"finite": _finite, "diffusion": _diff, "deterministic": _det}[regime](c)
    vc = ex.ValidationConfig(**{f.name: c[f.name] for f in fields(ex.ValidationConfig) if f.name in c})
    rep = ex.validate_suite(regime, params, vc)
    if c["format"] == "json":
        return rep.to_json() + "\n", rep.passed
    if c["format"] == "svg":
        raise InvalidParameter("validate supports csv or json")
    lines = ["check,analytic,simulated,stderr,verdict,rule"]
    for k in rep.checks:
        se = "" if k.stderr is None else ex.fmt17(k.stderr)
        lines.append(f"{k.name},{ex.fmt17(k.analytic)},{ex.fmt17(k.simulated)},{se},{'pass' if k.passed else 'fail'},{k.rule}")
    return "\n".join(lines) + "\n", rep.passed


def _cmd_simulate(c) -> str:
    p = _finite(c)
    which = c["which"]
    sc = sim.SimConfig(
        seed=int(c["seed"]),
        events=c.get("events"),
        horizon=c.get("horizon"),
        burn_in=float(c.get("burn_in") or 0.1),
        replicates=int(c.get("replicates") or (10**5 if which == "killed" else 25 if which == "tracer" else 1)),
    ).validate()
    if which in ("moran", "lines"):
        est = sim.simulate_moran(p, sc) if which == "moran" else sim.simulate_line_counting(p, sc).w
        idx = "k" if which == "moran" else "n"
        table = ex.Table((idx, "estimate", "stderr"), np.column_stack([np.arange(p.N + 1), est.value, est.stderr]),
                         f"{which} occupation")
        return table.render(c["format"])
    if which == "killed":
        est = sim.simulate_killed_asg(p, int(c["n0"]), sc)
        return _record({"n0": int(c["n0"]), "estimate": est.value, "stderr": est.stderr, "replicates": est.n}, c["format"])
    r = sim.simulate_ancestral_line(p, sc)
    rec: dict[str, Any] = {}
    for name in ("p1", "f10", "f01", "q10", "q01"):
        e = getattr(r, name)
        rec[name] = float(e.value)
        rec[f"{name}_se"] = float(e.stderr)
    rec["events"] = r.events
    return _record(rec, c["format"])


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        c = resolve(args)
        status = EXIT_OK
        cmd = c["command"] = args.command
        if cmd in ("finite", "diffusion", "det"):
            text = _cmd_regime(c)
        elif cmd == "figure":
            text = _cmd_figure(c)
        elif cmd == "compare-fluxes":
            text = _cmd_compare(c)
        elif cmd == "find-s":
            text = _cmd_find_s(c)
        elif cmd == "validate":
            text, ok = _cmd_validate(c)
            status = EXIT_OK if ok else EXIT_VALIDATION
        else:
            text = _cmd_simulate(c)
        _emit(text, c.get("out"))
        return status
    except InvalidParameter as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return EXIT_INPUT
    except NumericFailure as e:
        print(f"numeric failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
