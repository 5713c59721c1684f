"""
Experiment harness: random-mixture benchmark, golden regression, Old Faithful.

Every benchmark trial draws from its own counter-based Philox stream seeded by
``SeedSequence([master_seed, k, trial])``, so a trial's numbers depend only on
those three integers and not on execution order.
"""

from __future__ import annotations

import csv
import json
import logging
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .divergences import heuristic_value, jeffreys_heuristic, jeffreys_mc
from .errors import GmmPefError
from .estimators import sme_convert_direct, sme_theta
from .gmm import Gmm, gmm_from_dict, kde_from_data, pdf, random_gmm, read_data
from .ped import Interval, PedNatural, dump_ped, log_unnormalized

logger = logging.getLogger(__name__)

__all__ = [
    "TrialRecord",
    "BenchSummary",
    "trial_rng",
    "run_trial",
    "run_bench",
    "summarize",
    "write_trials_csv",
    "write_summary_csv",
    "load_golden",
    "GoldenCheck",
    "run_golden",
    "FaithfulReport",
    "rescale_unit",
    "run_faithful",
    "emit_curves",
    "faithful_data_path",
]


@dataclass
class TrialRecord:
    k: int
    D: int
    trial: int
    seed: int
    jd_mc: float
    jd_heuristic: float
    rel_error: float
    t_mc: float
    t_heuristic: float
    failed: bool = False
    reason: str = ""


@dataclass
class BenchSummary:
    k: int
    D: int
    trials: int
    mean_error: float
    max_error: float
    mean_speedup: float
    excluded: int = 0


def trial_rng(master_seed: int, k: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([master_seed, k, trial])))


def run_trial(k: int, trial: int, mc_samples: int, master_seed: int, repeats: int = 3) -> TrialRecord:
    """One benchmark trial with ``D = 2k``.

    The heuristic is timed as the median of ``repeats`` calls; the Monte
    Carlo estimator is timed once.
    """
    rng = trial_rng(master_seed, k, trial)
    D = 2 * k
    m1, m2 = random_gmm(k, rng), random_gmm(k, rng)

    t0 = time.perf_counter()
    jd_mc = jeffreys_mc(m1, m2, rng, mc_samples).value
    t_mc = time.perf_counter() - t0

    times = []
    try:
        for _ in range(repeats):
            t0 = time.perf_counter()
            jd_h = heuristic_value(m1, m2, D)
            times.append(time.perf_counter() - t0)
    except (GmmPefError, np.linalg.LinAlgError) as exc:
        return TrialRecord(k, D, trial, master_seed, jd_mc, float("nan"), float("nan"), t_mc, float("nan"), True, str(exc))
    if not (np.isfinite(jd_h) and jd_mc > 0):
        return TrialRecord(k, D, trial, master_seed, jd_mc, jd_h, float("nan"), t_mc, float("nan"), True, "non-finite")
    rel = abs(jd_mc - jd_h) / jd_mc
    return TrialRecord(k, D, trial, master_seed, jd_mc, jd_h, rel, t_mc, statistics.median(times))


def _run_trial_args(args):
    return run_trial(*args)


def summarize(records: list[TrialRecord]) -> list[BenchSummary]:
    out = []
    for k in sorted({r.k for r in records}):
        rows = [r for r in records if r.k == k]
        ok = [r for r in rows if not r.failed]
        if ok:
            errs = [r.rel_error for r in ok]
            speed = [r.t_mc / r.t_heuristic for r in ok]
            out.append(BenchSummary(k, 2 * k, len(ok), float(np.mean(errs)), float(np.max(errs)), float(np.mean(speed)), len(rows) - len(ok)))
        else:
            nan = float("nan")
            out.append(BenchSummary(k, 2 * k, 0, nan, nan, nan, len(rows)))
    return out


def run_bench(
    k_list,
    trials: int,
    mc_samples: int = 100_000,
    master_seed: int = 0,
    workers: int = 1,
) -> tuple[list[BenchSummary], list[TrialRecord]]:
    """Random-mixture benchmark comparing the pair heuristic with Monte Carlo.

    Returns the per-``k`` summaries and the trial records in ``(k, trial)``
    order. Failed trials are kept in the records, flagged, and left out of
    the averages. With ``workers > 1`` trials run in a process pool, which
    leaves the values unchanged but perturbs timings.
    """
    if trials < 1:
        raise GmmPefError("trials must be >= 1")
    jobs = [(int(k), t, mc_samples, master_seed) for k in k_list for t in range(trials)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            records = list(pool.map(_run_trial_args, jobs, chunksize=8))
    else:
        records = [run_trial(*j) for j in jobs]
    for r in records:
        if r.failed:
            logger.warning("k=%d trial %d excluded: %s", r.k, r.trial, r.reason)
    return summarize(records), records


_VALUE_FIELDS = ["k", "D", "trial", "seed", "jd_mc", "jd_heuristic", "rel_error", "failed", "reason"]
_TIME_FIELDS = ["t_mc", "t_heuristic"]


def write_trials_csv(records, path, timings: bool = True) -> None:
    """Trial table; timing columns come last so the rest is reproducible byte for byte."""
    fields = _VALUE_FIELDS + (_TIME_FIELDS if timings else [])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in records:
            d = asdict(r)
            w.writerow([repr(d[f]) if isinstance(d[f], float) else d[f] for f in fields])


def write_summary_csv(summaries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "D", "trials", "mean_error", "max_error", "mean_speedup", "excluded"])
        for s in summaries:
            w.writerow([s.k, s.D, s.trials, repr(s.mean_error), repr(s.max_error), repr(s.mean_speedup), s.excluded])


def load_golden() -> dict:
    """Bundled fixture with the two reference mixtures and printed results."""
    text = resources.files("gmmpef").joinpath("data/golden_mixtures.json").read_text()
    d = json.loads(text)
    d["m1"] = gmm_from_dict(d["m1"])
    d["m2"] = gmm_from_dict(d["m2"])
    return d


@dataclass
class GoldenCheck:
    name: str
    value: float
    expected: float
    tol: float
    relative: bool = False

    @property
    def ok(self) -> bool:
        gap = abs(self.value - self.expected)
        if self.relative:
            gap /= abs(self.expected)
        return bool(gap <= self.tol)


def run_golden() -> dict:
    """Recompute the reference example and compare with the printed numbers.

    The returned report has a ``checks`` list and an ``ok`` flag. The D=8
    SME fits are compared as raw coefficient vectors: the second mixture's
    fit has a positive leading coefficient, so it is not a density.
    """
    g = load_golden()
    m1, m2 = g["m1"], g["m2"]
    checks = []
    for label, m, key in (("m1", m1, "theta1"), ("m2", m2, "theta2")):
        theta = sme_theta(m, 8)
        for i, (got, want) in enumerate(zip(theta, g["order8"][key]), start=1):
            checks.append(GoldenCheck(f"D=8 {label} theta_{i}", float(got), want, 1e-6, relative=True))

    t0 = time.perf_counter()
    jd8 = jeffreys_heuristic(m1, m2, 8)
    t8 = time.perf_counter() - t0
    checks.append(GoldenCheck("D=8 heuristic Jeffreys", jd8.value, g["order8"]["jeffreys_pef"], 1e-6))
    jd4 = jeffreys_heuristic(m1, m2, 4)
    checks.append(GoldenCheck("D=4 heuristic Jeffreys", jd4.value, g["order4"]["jeffreys_pef"], 1e-6))
    mc_ref = g["order4"]["jeffreys_mc"]
    checks.append(GoldenCheck("D=4 relative error vs printed MC", abs(mc_ref - jd4.value) / mc_ref, 0.0757, 0.002))
    return {
        "checks": [dict(asdict(c), ok=c.ok) for c in checks],
        "ok": all(c.ok for c in checks),
        "d8_runtime_s": t8,
        "d8_non_integrable": jd8.meta["non_integrable"],
    }


def faithful_data_path() -> Path:
    return Path(str(resources.files("gmmpef").joinpath("data/faithful_eruptions.txt")))


def rescale_unit(xs, margin: float = 0.01) -> tuple[np.ndarray, float, float]:
    """Min-max map into ``[margin, 1 - margin]``; returns ``(u, shift, span)``.

    A constant dataset is mapped to 0.5.
    """
    xs = np.asarray(xs, dtype=float)
    lo, hi = float(xs.min()), float(xs.max())
    span = hi - lo
    if span == 0:
        return np.full_like(xs, 0.5), lo, 0.0
    return margin + (1 - 2 * margin) * (xs - lo) / span, lo, span


@dataclass
class FaithfulReport:
    ped: PedNatural
    grid: np.ndarray
    log_density: np.ndarray
    modes: list = field(default_factory=list)

    @property
    def bimodal(self) -> bool:
        return len(self.modes) == 2


def _interior_modes(x, y, lo=0.05, hi=0.95):
    i = np.arange(1, len(x) - 1)
    peak = (y[i] > y[i - 1]) & (y[i] > y[i + 1]) & (x[i] > lo) & (x[i] < hi)
    return [float(x[j]) for j in i[peak]]


def run_faithful(data_path=None, sigma: float = 0.05, D: int = 10, grid_points: int = 512) -> FaithfulReport:
    """KDE of the rescaled data converted to an order-``D`` PED on ``(0, 1)``."""
    xs = read_data(data_path or faithful_data_path())
    if xs.size == 0:
        raise GmmPefError("empty dataset")
    u, _, _ = rescale_unit(xs)
    kde = kde_from_data(u, sigma)
    ped = sme_convert_direct(kde, D, support=Interval(0.0, 1.0))
    grid = np.linspace(0.0, 1.0, grid_points)
    logd = log_unnormalized(ped, grid)
    return FaithfulReport(ped, grid, logd, _interior_modes(grid, logd))


def write_faithful(report: FaithfulReport, ped_path, curve_path) -> None:
    dump_ped(report.ped, ped_path)
    with open(curve_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "log_unnormalized", "unnormalized_density"])
        for x, y in zip(report.grid, report.log_density):
            w.writerow([repr(float(x)), repr(float(y)), repr(float(np.exp(y)))])


def _curve(model, grid):
    if isinstance(model, Gmm):
        return pdf(model, grid)
    if isinstance(model, PedNatural):
        return np.exp(log_unnormalized(model, grid))
    raise GmmPefError(f"unsupported model type {type(model).__name__}")


def emit_curves(models: dict, grid, out_path) -> None:
    """CSV with an ``x`` column and one density column per named model.

    ``out_path`` is a path or an open text file.

    Mixtures contribute their pdf and PEDs their unnormalized density
    ``exp(P_theta(x))``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size > 1 and not np.all(np.diff(grid) > 0):
        raise GmmPefError("grid must be strictly increasing")
    cols = [_curve(m, grid) for m in models.values()]
    if hasattr(out_path, "write"):
        _write_curves(out_path, models, grid, cols)
    else:
        with open(out_path, "w", newline="") as fh:
            _write_curves(fh, models, grid, cols)


def _write_curves(fh, models, grid, cols):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["x", *models.keys()])
    if not models:
        return
    for i, x in enumerate(grid):
        w.writerow([repr(float(x)), *(repr(float(c[i])) for c in cols)])
