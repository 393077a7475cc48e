"""Seeded Monte Carlo experiments over independent process runs.

Trials are embarrassingly parallel: each trial's generator is keyed by a
hash of (master seed, trial index), so results are reproducible and
independent of worker count and scheduling.  Aggregation always walks
trials in index order; two runs of the same config are byte-identical.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from . import stages, thresholds
from .engine import (
    CLASS_ALMOST,
    ExplicitSource,
    ImplicitSource,
    SeedSpec,
    TraceOptions,
    run_process,
)
from .graph import sample_gnp_with
from .rng import STREAM_GRAPH, STREAM_RUN, STREAM_STAGES, make_generator
from .thresholds import CriticalValues, ProcessParams

CLASS_SUBCRITICAL = "SubcriticalConfirmed"
CLASS_OTHER = "Other"


@dataclass(frozen=True)
class SeedSizeSpec:
    """Initial infection size: either an absolute count ``a`` or the
    offset form a_c + c * sqrt(a_c) with real c."""

    a: int | None = None
    offset_c: float | None = None

    def __post_init__(self):
        if (self.a is None) == (self.offset_c is None):
            raise ValueError("specify exactly one of a or offset_c")
        if self.a is not None and self.a < 0:
            raise ValueError(f"a must be >= 0, got {self.a}")

    def resolve(self, critical: CriticalValues, n: int) -> int:
        if self.a is not None:
            if self.a > n:
                raise ValueError(f"a={self.a} exceeds n={n}")
            return self.a
        raw = critical.ac + self.offset_c * math.sqrt(max(critical.ac, 0.0))
        return min(n, max(0, round(raw)))


@dataclass(frozen=True)
class ExperimentConfig:
    params: ProcessParams
    seed_size: SeedSizeSpec
    trials: int
    master_seed: int
    mode: str = "implicit"  # implicit | explicit
    percolation_threshold: float = 0.9
    checkpoints: tuple[int, ...] = ()
    stage_diagnostics: bool = False
    workers: int = 1
    alpha_multiplier: float = 4.0  # alpha = multiplier * ceil(sqrt(a_c))
    trajectory_horizon: int | None = None  # default: t0_int

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if not (0.0 < self.percolation_threshold <= 1.0):
            raise ValueError(
                f"percolation_threshold must lie in (0,1], got {self.percolation_threshold}"
            )
        if self.mode not in ("implicit", "explicit"):
            raise ValueError(f"mode must be implicit or explicit, got {self.mode!r}")


@dataclass(frozen=True)
class TrialOutcome:
    trial: int
    final_size: int
    T: int
    classification: str


@dataclass(frozen=True)
class ExperimentSummary:
    """Deterministic aggregate of one experiment.

    ``mean_trajectory`` covers t = 0..min(horizon, min over trials of T);
    on that prefix every trial contributes, so the empirical mean of
    |A(t)| is an unbiased estimate of a + (n-a) pi_hat(t).
    """

    params: ProcessParams
    a: int
    alpha: float
    trials: int
    master_seed: int
    mode: str
    percolation_threshold: float
    critical: CriticalValues
    outcomes: tuple[TrialOutcome, ...]
    class_counts: dict[str, int]
    empirical_percolation_probability: float
    wilson_low: float
    wilson_high: float
    theorem_bound: float
    theorem_used: str  # "subcritical" | "supercritical"
    mean_trajectory: np.ndarray  # rows (t, mean, standard error)
    stage_quantiles: dict[str, float] | None = None

    def to_dict(self) -> dict:
        return {
            "n": self.params.n,
            "p": self.params.p,
            "r": self.params.r,
            "regime_ok": self.params.regime_ok,
            "a": self.a,
            "alpha": self.alpha,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "mode": self.mode,
            "percolation_threshold": self.percolation_threshold,
            "critical": {
                "delta": self.critical.delta,
                "t0": self.critical.t0,
                "t0_int": self.critical.t0_int,
                "tc": self.critical.tc,
                "ac": self.critical.ac,
                "tc_asym": self.critical.tc_asym,
                "ac_asym": self.critical.ac_asym,
                "pi_hat_tc": self.critical.pi_hat_tc,
            },
            "class_counts": dict(sorted(self.class_counts.items())),
            "empirical_percolation_probability": self.empirical_percolation_probability,
            "wilson_low": self.wilson_low,
            "wilson_high": self.wilson_high,
            "theorem_bound": self.theorem_bound,
            "theorem_used": self.theorem_used,
            "outcomes": [
                {
                    "trial": o.trial,
                    "final_size": o.final_size,
                    "T": o.T,
                    "classification": o.classification,
                }
                for o in self.outcomes
            ],
            "mean_trajectory": [
                {"t": int(t), "mean": float(m), "se": float(se)}
                for t, m, se in self.mean_trajectory
            ],
            "stage_quantiles": self.stage_quantiles,
        }


def wilson_interval(
    successes: int, trials: int, confidence: float = 0.95
) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion.

    Behaves sensibly at 0 and full counts, which plain normal intervals
    do not: those occur routinely in the deep sub/supercritical tails.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if not (0 <= successes <= trials):
        raise ValueError(f"successes={successes} outside 0..{trials}")
    if not (0.0 < confidence < 1.0):
        raise ValueError(f"confidence must lie in (0,1), got {confidence}")
    z = NormalDist().inv_cdf(0.5 + confidence / 2.0)
    phat = successes / trials
    denom = 1.0 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(phat * (1.0 - phat) / trials + z * z / (4.0 * trials * trials))
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class _TrialResult:
    trial: int
    final_size: int
    T: int
    classification: str
    sizes_prefix: np.ndarray
    stage_report: stages.StageReport | None


def _classify(final_size: int, tc: int, threshold: float, n: int) -> str:
    if final_size < tc:
        return CLASS_SUBCRITICAL
    if final_size >= threshold * n:
        return CLASS_ALMOST
    return CLASS_OTHER


def _run_trial(args) -> _TrialResult:
    config, a, trial, horizon, t1, alpha = args
    params = config.params
    checkpoints = set(config.checkpoints)
    if config.stage_diagnostics:
        checkpoints.add(t1)
    opts = TraceOptions(
        checkpoints=tuple(sorted(checkpoints)),
        size_horizon=None if horizon is None else max(horizon, t1 or 0),
        percolation_threshold=config.percolation_threshold,
    )
    if config.mode == "implicit":
        source = ImplicitSource(
            params, rng=make_generator(config.master_seed, trial, STREAM_RUN)
        )
    else:
        g = sample_gnp_with(
            params.n, params.p, make_generator(config.master_seed, trial, STREAM_GRAPH)
        )
        source = ExplicitSource(g, p=params.p)
    trace = run_process(source, SeedSpec.prefix(a), params.r, opts)
    report = None
    if config.stage_diagnostics:
        if config.mode == "implicit":
            stage_source = ImplicitSource(
                params, rng=make_generator(config.master_seed, trial, STREAM_STAGES)
            )
        else:
            stage_source = source
        report = stages.run_stage_pipeline(stage_source, trace, params, alpha)
    cut = len(trace.infected_sizes) if horizon is None else min(horizon + 1, len(trace.infected_sizes))
    return _TrialResult(
        trial=trial,
        final_size=trace.final_size,
        T=trace.T,
        classification=_classify(
            trace.final_size, _trial_tc(config), config.percolation_threshold, params.n
        ),
        sizes_prefix=trace.infected_sizes[:cut].copy(),
        stage_report=report,
    )


def _trial_tc(config: ExperimentConfig) -> int:
    # memoised per process; the scan is cheap but repeated thousands of times
    key = (config.params.n, config.params.p, config.params.r)
    cached = _TC_CACHE.get(key)
    if cached is None:
        cached = thresholds.critical_pair(config.params).tc
        _TC_CACHE[key] = cached
    return cached


_TC_CACHE: dict = {}


def run_experiment(config: ExperimentConfig) -> ExperimentSummary:
    """Execute ``config.trials`` independent runs and aggregate.

    Per-trial seeds derive from hash(master_seed, trial); aggregation is
    sequential over sorted trial indices, so the summary does not depend
    on worker count or completion order.
    """
    params = config.params
    critical = thresholds.critical_pair(params)
    a = config.seed_size.resolve(critical, params.n)
    alpha = config.alpha_multiplier * math.ceil(math.sqrt(max(critical.ac, 1.0)))
    horizon = (
        critical.t0_int if config.trajectory_horizon is None else config.trajectory_horizon
    )
    t1 = thresholds.stage_predictions(params, alpha).t1 if config.stage_diagnostics else 0

    tasks = [(config, a, trial, horizon, t1, alpha) for trial in range(config.trials)]
    if config.workers > 1 and config.trials > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            chunk = max(1, config.trials // (config.workers * 4))
            results = list(pool.map(_run_trial, tasks, chunksize=chunk))
    else:
        results = [_run_trial(t) for t in tasks]
    results.sort(key=lambda res: res.trial)

    outcomes = tuple(
        TrialOutcome(res.trial, res.final_size, res.T, res.classification) for res in results
    )
    counts: dict[str, int] = {CLASS_SUBCRITICAL: 0, CLASS_ALMOST: 0, CLASS_OTHER: 0}
    for o in outcomes:
        counts[o.classification] += 1
    successes = counts[CLASS_ALMOST]
    phat = successes / config.trials
    lo, hi = wilson_interval(successes, config.trials)

    alpha_eff = abs(a - critical.ac)
    if a <= critical.ac:
        used = "subcritical"
        bound = (
            thresholds.theorem_subcritical_bound(params, alpha_eff) if alpha_eff > 0 else 1.0
        )
    else:
        used = "supercritical"
        bound = (
            thresholds.theorem_supercritical_bound(params, alpha_eff) if alpha_eff > 0 else 1.0
        )

    prefix = min(len(res.sizes_prefix) for res in results)
    stacked = np.stack([res.sizes_prefix[:prefix] for res in results]).astype(np.float64)
    means = stacked.mean(axis=0)
    ses = stacked.std(axis=0, ddof=1) / math.sqrt(config.trials) if config.trials > 1 else np.zeros(prefix)
    trajectory = np.column_stack([np.arange(prefix, dtype=np.float64), means, ses])

    quantiles = None
    if config.stage_diagnostics:
        reports = [res.stage_report for res in results]
        quantiles = {
            "early_ok_fraction": float(np.mean([rep.early_ok for rep in reports])),
            "bridge_fraction": float(np.mean([rep.bridge_AB for rep in reports])),
            "median_size_Bhat": float(np.median([rep.size_Bhat for rep in reports])),
            "median_size_B": float(np.median([rep.size_B for rep in reports])),
            "median_size_C": float(np.median([rep.size_C for rep in reports])),
            "median_size_D": float(np.median([rep.size_D for rep in reports])),
            "median_D_fraction": float(
                np.median([rep.size_D / params.n for rep in reports])
            ),
        }

    return ExperimentSummary(
        params=params,
        a=a,
        alpha=alpha,
        trials=config.trials,
        master_seed=config.master_seed,
        mode=config.mode,
        percolation_threshold=config.percolation_threshold,
        critical=critical,
        outcomes=outcomes,
        class_counts=counts,
        empirical_percolation_probability=phat,
        wilson_low=lo,
        wilson_high=hi,
        theorem_bound=bound,
        theorem_used=used,
        mean_trajectory=trajectory,
        stage_quantiles=quantiles,
    )


@dataclass(frozen=True)
class SweepPoint:
    a: int
    alpha_offset: float
    p_hat: float
    wilson_lo: float
    wilson_hi: float
    mean_final_size: float
    mean_T: float
    theorem_bound: float


@dataclass(frozen=True)
class SweepResult:
    points: tuple[SweepPoint, ...]
    summaries: tuple[ExperimentSummary, ...]

    def to_csv(self) -> str:
        lines = ["a,alpha_offset,p_hat,wilson_lo,wilson_hi,mean_final_size,mean_T,theorem_bound"]
        for pt in self.points:
            lines.append(
                f"{pt.a},{pt.alpha_offset:.12g},{pt.p_hat:.12g},{pt.wilson_lo:.12g},"
                f"{pt.wilson_hi:.12g},{pt.mean_final_size:.12g},{pt.mean_T:.12g},"
                f"{pt.theorem_bound:.12g}"
            )
        return "\n".join(lines) + "\n"


def sweep(config: ExperimentConfig, a_values) -> SweepResult:
    """One experiment per seed size; raw estimates, no smoothing."""
    a_values = [int(a) for a in a_values]
    if not a_values:
        raise ValueError("a_values must be nonempty")
    points = []
    summaries = []
    for a in a_values:
        cfg = ExperimentConfig(
            params=config.params,
            seed_size=SeedSizeSpec(a=a),
            trials=config.trials,
            master_seed=config.master_seed,
            mode=config.mode,
            percolation_threshold=config.percolation_threshold,
            checkpoints=config.checkpoints,
            stage_diagnostics=config.stage_diagnostics,
            workers=config.workers,
            alpha_multiplier=config.alpha_multiplier,
            trajectory_horizon=config.trajectory_horizon,
        )
        summary = run_experiment(cfg)
        summaries.append(summary)
        points.append(
            SweepPoint(
                a=a,
                alpha_offset=a - summary.critical.ac,
                p_hat=summary.empirical_percolation_probability,
                wilson_lo=summary.wilson_low,
                wilson_hi=summary.wilson_high,
                mean_final_size=float(np.mean([o.final_size for o in summary.outcomes])),
                mean_T=float(np.mean([o.T for o in summary.outcomes])),
                theorem_bound=summary.theorem_bound,
            )
        )
    return SweepResult(points=tuple(points), summaries=tuple(summaries))
