"""remova: decide whether a point or subspace singularity is removable.

usage:
  remova analyze  (--scenario NAME | --field FILE --operator LIT) [options]
  remova sweep    (same inputs; writes records only)
  remova moments  (same inputs) [--kappa-max K]
  remova regime   --m M --n N --p P [--q Q --d D] [--k K]
  remova list-scenarios [--json]

Exit codes for analyze: 0 removable, 10 non-removable, 20 inconclusive, 1 error.
Options can also come from a JSON config file (--config) whose flat keys match
the long option names with dashes turned into underscores; flags win.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from . import __version__
from .conv import Problem, Quadrature, default_kappa_max, recover_delta
from .criterion import Thresholds, decide, sweep
from .diffop import DeltaStructure, identity, parse_operator
from .field import Exponent, SampledField, SingularSet, read_csv_field, read_grid_field
from .mollify import Cutoff, EpsilonSchedule, Mollifier
from .regimes import codim_variant, regime_report
from .scenarios import catalogue, lookup

SCHEMA_VERSION = "remova.verdict/1"
EXIT = {"removable": 0, "non-removable": 10, "inconclusive": 20}
EXIT_ERROR = 1


@dataclass
class RunConfig:
    scenario: str | None = None
    field: str | None = None
    operator: str | None = None
    codim: int | None = None
    r: str = "inf"
    p: str | None = None
    q_operator: str | None = None
    eps0: float = 0.2
    ratio: float = 2.0**-0.5
    count: int = 10
    tau_pos: float = 0.5
    tau_slope: float = 0.2
    tau_noise: float = 1e-8
    tau_sig: float = 1e-3
    nodes_per_eps: int = 16
    core_points: int = 33
    outer_points: int = 17
    r1: float = 0.25
    r2: float = 0.5
    width: float = 1.0
    kappa_max: int | None = None
    out: str = "."
    threads: int = 1

    def thresholds(self) -> Thresholds:
        return Thresholds(self.tau_pos, self.tau_slope, self.tau_noise, self.tau_sig)

    def schedule(self) -> EpsilonSchedule:
        return EpsilonSchedule(self.eps0, self.ratio, self.count)

    def validate(self):
        if (self.scenario is None) == (self.field is None):
            raise ValueError("give exactly one of --scenario or --field")
        if self.field is not None and self.operator is None:
            raise ValueError("--field needs --operator")
        for name in ("tau_pos", "tau_slope", "tau_noise", "tau_sig"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        Exponent.parse(self.r)
        if self.p is not None:
            Exponent.parse(self.p)
        self.schedule()


def fmt(x) -> str:
    """Decimal with 17 significant digits."""
    return "%.17g" % x


def dumps(obj, indent: int | None = 2, _level: int = 0) -> str:
    """JSON with every float written at 17 significant digits (non-finite -> null)."""
    if obj is None or isinstance(obj, (bool, str)):
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return fmt(obj) if math.isfinite(obj) else "null"
    if hasattr(obj, "item"):
        return dumps(obj.item(), indent, _level)
    if isinstance(obj, dict):
        items = [(json.dumps(str(k)), v) for k, v in obj.items()]
        open_, close = "{", "}"
        parts = [f"{k}: {dumps(v, indent, _level + 1)}" if indent else f"{k}:{dumps(v, indent, _level + 1)}" for k, v in items]
    elif isinstance(obj, (list, tuple)):
        open_, close = "[", "]"
        parts = [dumps(v, indent, _level + 1) for v in obj]
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    if not parts:
        return open_ + close
    if not indent:
        return open_ + ",".join(parts) + close
    pad = " " * (indent * (_level + 1))
    return open_ + "\n" + ",\n".join(pad + x for x in parts) + "\n" + " " * (indent * _level) + close


# ---------------------------------------------------------------- problem setup

def build_problem(cfg: RunConfig):
    """Returns (Problem, declared p or None)."""
    quad = Quadrature(nodes_per_eps=cfg.nodes_per_eps, core_points=cfg.core_points, outer_points=cfg.outer_points)
    p = cfg.p
    if cfg.scenario is not None:
        s = lookup(cfg.scenario)
        u, P, name = s.u, s.P, s.name
    else:
        path = Path(cfg.field)
        u = read_csv_field(path, cfg.codim) if path.suffix.lower() == ".csv" else read_grid_field(path)
        if cfg.codim is not None and u.singular.codim != cfg.codim:
            u = SampledField(u.grid, u.values, SingularSet(u.dim, cfg.codim))
        P = parse_operator(cfg.operator, u.dim)
        name = path.name
    Q = parse_operator(cfg.q_operator, u.dim) if cfg.q_operator else identity(u.dim)
    prob = Problem(u, P, a=Cutoff(cfg.r1, cfg.r2), phi=Mollifier(u.dim, cfg.width), Q=Q, quad=quad, name=name)
    return prob, p


def fit_json(fit):
    if fit is None:
        return None
    return {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2, "points_used": fit.points_used}


def write_sweep_csv(path: Path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epsilon", "norm", "gamma", "noise_flag"])
        for rec in records:
            w.writerow([fmt(rec.eps), fmt(rec.N), fmt(rec.gamma), "true" if rec.noise_flag else "false"])


def read_sweep_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {"epsilon": float(r["epsilon"]), "norm": float(r["norm"]), "gamma": float(r["gamma"]),
             "noise_flag": r["noise_flag"] == "true"}
            for r in csv.DictReader(fh)
        ]


def verdict_json(v, cfg: RunConfig, prob: Problem) -> dict:
    delta = getattr(v, "delta", None)
    k = prob.singular.codim
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "problem": prob.name,
        "dim": prob.dim,
        "codim": k,
        "order_m": prob.m,
        "order_d": prob.d,
        "verdict": v.kind,
        "reason": getattr(v, "reason", ""),
        "kappa": None if delta is None or delta.empty else delta.order,
        "delta": None if delta is None else delta.to_json(),
        "fit": fit_json(getattr(v, "fit", None)),
        "checks": getattr(v, "checks", {}),
        "records": [
            {"epsilon": r.eps, "norm": r.N, "gamma": r.gamma, "noise_flag": r.noise_flag} for r in v.records
        ],
        "config": asdict(cfg),
    }


# ---------------------------------------------------------------- commands

def cmd_analyze(cfg: RunConfig) -> int:
    prob, p = build_problem(cfg)
    v = decide(prob, cfg.schedule(), cfg.r, p, cfg.thresholds(), threads=cfg.threads, kappa_max=cfg.kappa_max)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(out / "sweep.csv", v.records)
    (out / "verdict.json").write_text(dumps(verdict_json(v, cfg, prob)) + "\n")
    line = f"{prob.name}: {v.kind}"
    delta = getattr(v, "delta", None)
    if delta is not None and not delta.empty:
        line += f", kappa = {delta.order}, S = {dumps(delta.to_json(), indent=None)}"
    print(line)
    return EXIT[v.kind]


def cmd_sweep(cfg: RunConfig) -> int:
    prob, _ = build_problem(cfg)
    k = prob.singular.codim
    recs = sweep(prob, cfg.schedule(), cfg.r, cfg.thresholds(), slice_codim=k if k < prob.dim else None, threads=cfg.threads)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(out / "sweep.csv", recs)
    for rec in recs:
        print(fmt(rec.eps), fmt(rec.N), fmt(rec.gamma), "true" if rec.noise_flag else "false")
    return 0


def cmd_moments(cfg: RunConfig) -> int:
    prob, p = build_problem(cfg)
    k = prob.singular.codim
    kmax = cfg.kappa_max if cfg.kappa_max is not None else default_kappa_max(prob.m, k, p)
    S: DeltaStructure = recover_delta(prob, kmax, cfg.tau_sig, cfg.tau_noise, codim=k if k < prob.dim else None)
    print(dumps(S.to_json(), indent=None))
    return 0


def cmd_regime(args) -> int:
    if (args.q is None) != (args.d is None):
        raise ValueError("--q and --d go together")
    if args.k is not None:
        rep = codim_variant(args.m, args.n, args.k, args.p, args.q, args.d)
    else:
        rep = regime_report(args.m, args.n, args.p, args.q, args.d)
    print(json.dumps(rep, separators=(",", ":")))
    return 0


def cmd_list(args) -> int:
    rows = []
    for s in catalogue():
        rows.append({
            "name": s.name,
            "n": s.dim,
            "k": s.codim,
            "m": s.m,
            "expected": "removable" if s.removable else s.expected.to_json(),
            "p_range": str(s.p_range),
            "provenance": s.provenance,
        })
    if args.json:
        print(dumps(rows))
        return 0
    for r in rows:
        exp = r["expected"] if isinstance(r["expected"], str) else "S = " + json.dumps(r["expected"])
        print(f"{r['name']:<18} n={r['n']} k={r['k']} m={r['m']}  p in {r['p_range']:<9} {r['provenance']:<9} {exp}")
    return 0


# ---------------------------------------------------------------- argument handling

_PROBLEM_KEYS = [f.name for f in fields(RunConfig)]


def _add_problem_args(sp):
    g = sp.add_argument_group("problem")
    g.add_argument("--config", help="JSON file of option values")
    g.add_argument("--scenario", help="catalogue name (see list-scenarios)")
    g.add_argument("--field", help="grid-field file (.grid) or CSV with x1..xn,re,im")
    g.add_argument("--operator", help='operator literal such as "1*d[2,0] + 1*d[0,2]"')
    g.add_argument("--codim", type=int, help="codimension of the singular subspace of a field file")
    g.add_argument("--q-operator", help="constant-coefficient Q literal (default identity)")
    g.add_argument("--r", help="Lebesgue exponent of the criterion norm (default inf)")
    g.add_argument("--p", help="declared p with u in L^p (bounds kappa)")
    g.add_argument("--kappa-max", type=int)
    s = sp.add_argument_group("schedule and thresholds")
    s.add_argument("--eps0", type=float)
    s.add_argument("--ratio", type=float)
    s.add_argument("--count", type=int)
    for t in ("tau-pos", "tau-slope", "tau-noise", "tau-sig"):
        s.add_argument(f"--{t}", type=float)
    q = sp.add_argument_group("numerics")
    q.add_argument("--nodes-per-eps", type=int)
    q.add_argument("--core-points", type=int)
    q.add_argument("--outer-points", type=int)
    q.add_argument("--r1", type=float)
    q.add_argument("--r2", type=float)
    q.add_argument("--width", type=float, help="mollifier width (0.5 gives 2^n phi(2x))")
    sp.add_argument("--out", help="output directory (default .)")
    sp.add_argument("--threads", type=int, help="worker cap, 0 = auto (env REMOVA_THREADS)")


def resolve_config(args) -> RunConfig:
    values: dict = {}
    if args.config:
        data = json.loads(Path(args.config).read_text())
        unknown = set(data) - set(_PROBLEM_KEYS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update(data)
    if args.threads is None and "threads" not in values and os.environ.get("REMOVA_THREADS"):
        values["threads"] = int(os.environ["REMOVA_THREADS"])
    for key in _PROBLEM_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    for key in ("r", "p"):
        if key in values and values[key] is not None:
            values[key] = str(values[key])
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="remova", description="Numerical removable-singularity test.")
    ap.add_argument("--version", action="version", version=f"remova {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("analyze", "sweep, fit and decide; writes verdict.json and sweep.csv"),
        ("sweep", "criterion records only"),
        ("moments", "recover the delta structure from moments"),
    ):
        _add_problem_args(sub.add_parser(name, help=helptext))
    rg = sub.add_parser("regime", help="exact regime classification")
    rg.add_argument("--m", type=int, required=True)
    rg.add_argument("--n", type=int, required=True)
    rg.add_argument("--k", type=int, help="codimension; replaces n")
    rg.add_argument("--p", required=True)
    rg.add_argument("--q")
    rg.add_argument("--d", type=int)
    ls = sub.add_parser("list-scenarios", help="print the catalogue")
    ls.add_argument("--json", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "regime":
            return cmd_regime(args)
        if args.command == "list-scenarios":
            return cmd_list(args)
        cfg = resolve_config(args)
        return {"analyze": cmd_analyze, "sweep": cmd_sweep, "moments": cmd_moments}[args.command](cfg)
    except (ValueError, KeyError, OSError, ArithmeticError) as exc:
        print(f"remova: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
