"""Epsilon sweeps, power-law fits and the removability verdict.

The decision rests on gamma(eps) = eps^(n(1-1/r)+d) ||Q(aPu * phi_eps)||_{L^r}:
it tends to zero exactly when the singularity is removable.  When it does not,
the log-log slope of N(eps) should equal -kappa - n(1-1/r) - d, with kappa the
order of the obstruction read off from moments.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .conv import Problem, default_kappa_max, evaluate_scale, recover_delta
from .diffop import DeltaStructure
from .field import Exponent
from .mollify import EpsilonSchedule
from .regimes import max_delta_order


class TooFewPoints(ValueError):
    pass


@dataclass(frozen=True)
class Thresholds:
    tau_pos: float = 0.5       # gamma must decay at least like eps^tau_pos to call Removable
    tau_slope: float = 0.2     # allowed gap between fitted and predicted slope
    tau_noise: float = 1e-8    # N below tau_noise * (kernel magnitude bound) is noise
    tau_sig: float = 1e-3      # relative cutoff for recovered coefficients


@dataclass(frozen=True)
class SweepRecord:
    eps: float
    N: float
    gamma: float
    noise_flag: bool


def gamma_exponent(dim: int, r, d: int) -> float:
    """n(1-1/r) + d (pass the codimension k as ``dim`` in sliced mode)."""
    return float(dim * Exponent.parse(r).dual_part) + d


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    r2: float
    points_used: int


@dataclass
class Verdict:
    records: list
    kind: str = ""

    @property
    def removable(self) -> bool:
        return self.kind == "removable"


@dataclass
class Removable(Verdict):
    kind: str = "removable"
    fit: ExponentFit | None = None
    reason: str = ""


@dataclass
class NonRemovable(Verdict):
    delta: DeltaStructure = None
    fit: ExponentFit = None
    kind: str = "non-removable"
    checks: dict = field(default_factory=dict)

    @property
    def kappa(self) -> int:
        return self.delta.order


@dataclass
class Inconclusive(Verdict):
    reason: str = ""
    kind: str = "inconclusive"
    fit: ExponentFit | None = None
    delta: DeltaStructure | None = None


def _validate_schedule(prob: Problem, sched: EpsilonSchedule):
    box = prob.u.box
    half = min(min(-lo, hi) for lo, hi in zip(box.lo, box.hi))
    spacing = getattr(prob.u, "grid", None)
    h = float(np.max(spacing.spacing)) if spacing is not None else None
    sched.check(half, prob.a, prob.phi.width, h)


def _map(fn, items, threads: int):
    if threads == 1 or len(items) < 2:
        return [fn(x) for x in items]
    workers = None if threads <= 0 else threads
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def sweep(
    prob: Problem,
    sched: EpsilonSchedule,
    r="inf",
    thresholds: Thresholds = Thresholds(),
    slice_codim: int | None = None,
    threads: int = 1,
) -> list[SweepRecord]:
    """One record per eps in the schedule, in schedule order."""
    _validate_schedule(prob, sched)
    r = Exponent.parse(r)
    k = prob.dim if slice_codim is None else slice_codim
    expo = gamma_exponent(k, r, prob.d)
    eps_values = [float(e) for e in sched.values()]
    scales = _map(lambda e: evaluate_scale(prob, e, slice_codim), eps_values, threads)
    out = []
    for e, data in zip(eps_values, scales):
        N = data.norm(r)
        noise = N <= thresholds.tau_noise * data.noise_reference(r)
        out.append(SweepRecord(e, N, e**expo * N, bool(noise)))
    return out


def sliced_sweep(prob: Problem, sched: EpsilonSchedule, r="inf", thresholds: Thresholds = Thresholds(), threads: int = 1):
    """Sweep on the slice x' = 0 of a singular subspace {x'' = 0}."""
    k = prob.singular.codim
    if not 1 <= k < prob.dim:
        raise ValueError("sliced sweep needs a singular subspace of codimension 1..n-1")
    return sweep(prob, sched, r, thresholds, slice_codim=k, threads=threads)


def fit_exponent(records) -> ExponentFit:
    """OLS of log N on log eps over the non-noise records."""
    pts = [(rec.eps, rec.N) for rec in records if not rec.noise_flag and rec.N > 0]
    if len(pts) < 3:
        raise TooFewPoints(f"need at least 3 non-noise records, have {len(pts)}")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - float(np.sum(resid**2)) / ss_tot)
    return ExponentFit(float(slope), float(intercept), min(r2, 1.0), len(pts))


def decide(
    prob: Problem,
    sched: EpsilonSchedule = EpsilonSchedule(),
    r="inf",
    p_declared=None,
    thresholds: Thresholds = Thresholds(),
    threads: int = 1,
    kappa_max: int | None = None,
) -> Verdict:
    r = Exponent.parse(r)
    k = prob.singular.codim
    sliced = k < prob.dim
    records = sweep(prob, sched, r, thresholds, slice_codim=k if sliced else None, threads=threads)
    if all(rec.noise_flag for rec in records):
        return Removable(records, reason="all scales at the noise floor")
    try:
        fit = fit_exponent(records)
    except TooFewPoints as exc:
        return Inconclusive(records, reason=str(exc))

    expo = gamma_exponent(k, r, prob.d)
    gamma_slope = fit.slope + expo
    signal = [rec for rec in records if not rec.noise_flag]
    if gamma_slope >= thresholds.tau_pos and signal[-1].gamma < signal[0].gamma:
        return Removable(records, fit=fit, reason=f"gamma decays like eps^{gamma_slope:.3g}")

    if kappa_max is None:
        kappa_max = default_kappa_max(prob.m, k, p_declared)
    S = recover_delta(
        prob, kappa_max, tau_sig=thresholds.tau_sig, tau_noise=thresholds.tau_noise,
        codim=k if sliced else None,
    )
    if S.empty:
        return Inconclusive(records, reason="criterion does not decay but no moment is significant", fit=fit)
    predicted = -(S.order + expo)
    gap = fit.slope - predicted
    checks = {"predicted_slope": predicted, "slope_gap": gap}
    if p_declared is not None:
        bound = max_delta_order(prob.m, k, p_declared)
        checks["max_delta_order"] = bound
        checks["kappa_within_bound"] = bound is not None and S.order <= bound
    if abs(gap) > thresholds.tau_slope:
        return Inconclusive(
            records,
            reason=f"fitted slope {fit.slope:.4g} vs predicted {predicted:.4g} for kappa = {S.order}",
            fit=fit,
            delta=S,
        )
    return NonRemovable(records, delta=S, fit=fit, checks=checks)


def check_obound(records_or_fit, m: int, n: int, p, r, d: int, tau_slope: float = 0.2) -> dict:
    """Compare the fitted slope with the a-priori O(eps^-(d + m + n(1/p - 1/r))) bound."""
    p = Exponent.parse(p)
    r = Exponent.parse(r)
    bound = -(d + m + float(n * (p.inv - r.inv)))
    if isinstance(records_or_fit, ExponentFit):
        fit = records_or_fit
    elif all(rec.noise_flag for rec in records_or_fit):
        fit = None
    else:
        fit = fit_exponent(records_or_fit)
    if fit is None:
        return {"bound_slope": bound, "measured_slope": None, "holds": True, "strict": True, "vacuous": True}
    return {
        "bound_slope": bound,
        "measured_slope": fit.slope,
        "holds": fit.slope >= bound - tau_slope,
        "strict": fit.slope >= bound + tau_slope,
        "vacuous": False,
    }


def recompute_gamma(eps: float, N: float, dim: int, r, d: int) -> float:
    return eps ** gamma_exponent(dim, r, d) * N


__all__ = [
    "ExponentFit",
    "Inconclusive",
    "NonRemovable",
    "Removable",
    "SweepRecord",
    "Thresholds",
    "TooFewPoints",
    "Verdict",
    "check_obound",
    "decide",
    "fit_exponent",
    "gamma_exponent",
    "recompute_gamma",
    "sliced_sweep",
    "sweep",
]

