"""Run the removability criterion over the scenario catalogue.

Writes one sweep CSV per scenario plus a summary table (CSV) and a JSON
report with verdicts, recovered obstructions and fitted slopes.

    python scripts/run_catalogue.py --r inf 2 --out results/catalogue
"""

import argparse
import csv
import time
from dataclasses import dataclass, field
from pathlib import Path

from remova.cli import dumps, fmt, write_sweep_csv
from remova.conv import Problem
from remova.criterion import Thresholds, check_obound, decide
from remova.mollify import EpsilonSchedule
from remova.scenarios import catalogue, lookup


@dataclass
class CatalogueConfig:
    names: list = field(default_factory=list)
    r_values: list = field(default_factory=lambda: ["inf"])
    eps0: float = 0.2
    ratio: float = 2.0**-0.5
    count: int = 10
    threads: int = 1
    out: str = "results/catalogue"


def run_one(s, r, cfg: CatalogueConfig, out: Path) -> dict:
    sched = EpsilonSchedule(cfg.eps0, cfg.ratio, cfg.count)
    t0 = time.perf_counter()
    v = decide(Problem(s.u, s.P, name=s.name), sched, r, thresholds=Thresholds(), threads=cfg.threads)
    elapsed = time.perf_counter() - t0
    write_sweep_csv(out / f"{s.name}_r{r}.csv", v.records)
    fit = getattr(v, "fit", None)
    delta = getattr(v, "delta", None)
    audit = {str(p): check_obound(v.records, s.m, s.codim, p, r, 0)["holds"] for p in s.p_range.samples()}
    return {
        "scenario": s.name,
        "r": str(r),
        "verdict": v.kind,
        "expected": "removable" if s.removable else "non-removable",
        "kappa": getattr(v, "kappa", None),
        "delta": delta.to_json() if delta is not None else None,
        "slope": fit.slope if fit is not None else None,
        "obound_holds": audit,
        "seconds": elapsed,
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--names", nargs="*", default=[], help="subset of scenarios (default: all)")
    ap.add_argument("--r", dest="r_values", nargs="+", default=["inf"])
    ap.add_argument("--eps0", type=float, default=0.2)
    ap.add_argument("--ratio", type=float, default=2.0**-0.5)
    ap.add_argument("--count", type=int, default=10)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", default="results/catalogue")
    cfg = CatalogueConfig(**vars(ap.parse_args(argv)))

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    scenarios = [lookup(n) for n in cfg.names] if cfg.names else list(catalogue())
    rows = []
    for s in scenarios:
        for r in cfg.r_values:
            row = run_one(s, r, cfg, out)
            rows.append(row)
            ok = "ok" if row["verdict"] == row["expected"] else "MISMATCH"
            slope = "-" if row["slope"] is None else "%.4f" % row["slope"]
            print(f"{s.name:20s} r={r:>3s} {row['verdict']:14s} kappa={row['kappa']} slope={slope} "
                  f"({row['seconds']:.1f}s) {ok}")

    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "r", "verdict", "expected", "kappa", "slope"])
        for row in rows:
            w.writerow([row["scenario"], row["r"], row["verdict"], row["expected"],
                        "" if row["kappa"] is None else row["kappa"],
                        "" if row["slope"] is None else fmt(row["slope"])])
    (out / "report.json").write_text(dumps({"config": vars(cfg), "results": rows}) + "\n")
    return 0 if all(row["verdict"] == row["expected"] for row in rows) else 1


if __name__ == "__main__":
    raise SystemExit(main())
