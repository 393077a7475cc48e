import json
import math

import pytest

from bootperc import thresholds
from bootperc.montecarlo import (
    CLASS_OTHER,
    CLASS_SUBCRITICAL,
    ExperimentConfig,
    SeedSizeSpec,
    run_experiment,
    sweep,
    wilson_interval,
)
from bootperc.engine import CLASS_ALMOST
from bootperc.thresholds import ProcessParams

PARAMS = ProcessParams(n=3000, p=3e-3, r=2)


def summary_json(summary) -> str:
    # to_dict must be plain JSON types: no default= fallback
    return json.dumps(summary.to_dict(), sort_keys=True)


class TestWilson:
    def test_zero_successes(self):
        lo, hi = wilson_interval(0, 10)
        assert lo == 0.0
        assert 0.0 < hi < 1.0

    def test_all_successes(self):
        lo, hi = wilson_interval(10, 10)
        assert hi == 1.0
        assert 0.0 < lo < 1.0

    def test_worked_value(self):
        lo, hi = wilson_interval(50, 100)
        assert lo == pytest.approx(0.404, abs=1e-3)
        assert hi == pytest.approx(0.596, abs=1e-3)

    def test_contains_point_estimate(self):
        for s, t in [(1, 7), (3, 9), (250, 300), (299, 300)]:
            lo, hi = wilson_interval(s, t)
            assert lo <= s / t <= hi
            assert 0.0 <= lo <= hi <= 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            wilson_interval(5, 0)
        with pytest.raises(ValueError):
            wilson_interval(11, 10)
        with pytest.raises(ValueError):
            wilson_interval(1, 10, confidence=1.5)


class TestSeedSizeSpec:
    def test_exactly_one_form(self):
        with pytest.raises(ValueError):
            SeedSizeSpec()
        with pytest.raises(ValueError):
            SeedSizeSpec(a=3, offset_c=1.0)

    def test_offset_resolution(self):
        crit = thresholds.critical_pair(PARAMS)
        a = SeedSizeSpec(offset_c=4.0).resolve(crit, PARAMS.n)
        assert a == min(PARAMS.n, max(0, round(crit.ac + 4.0 * math.sqrt(crit.ac))))
        assert SeedSizeSpec(offset_c=-1e9).resolve(crit, PARAMS.n) == 0

    def test_absolute(self):
        crit = thresholds.critical_pair(PARAMS)
        assert SeedSizeSpec(a=17).resolve(crit, PARAMS.n) == 17


class TestRunExperiment:
    def test_trivial_zero_seed(self):
        cfg = ExperimentConfig(
            params=PARAMS, seed_size=SeedSizeSpec(a=0), trials=1, master_seed=1
        )
        summary = run_experiment(cfg)
        assert summary.empirical_percolation_probability == 0.0
        assert summary.outcomes[0].final_size == 0
        assert summary.outcomes[0].classification == CLASS_SUBCRITICAL

    def test_trivial_full_seed(self):
        cfg = ExperimentConfig(
            params=PARAMS, seed_size=SeedSizeSpec(a=PARAMS.n), trials=1, master_seed=1
        )
        summary = run_experiment(cfg)
        assert summary.empirical_percolation_probability == 1.0
        assert summary.outcomes[0].classification == CLASS_ALMOST

    def test_determinism_repeat(self):
        cfg = ExperimentConfig(
            params=PARAMS, seed_size=SeedSizeSpec(offset_c=2.0), trials=25, master_seed=9
        )
        assert summary_json(run_experiment(cfg)) == summary_json(run_experiment(cfg))

    def test_determinism_across_workers(self):
        base = dict(params=PARAMS, seed_size=SeedSizeSpec(offset_c=2.0), trials=24, master_seed=9)
        s1 = run_experiment(ExperimentConfig(workers=1, **base))
        s2 = run_experiment(ExperimentConfig(workers=4, **base))
        assert summary_json(s1) == summary_json(s2)

    def test_classification_partition(self):
        cfg = ExperimentConfig(
            params=PARAMS, seed_size=SeedSizeSpec(offset_c=0.0), trials=60, master_seed=3
        )
        summary = run_experiment(cfg)
        assert sum(summary.class_counts.values()) == 60
        for o in summary.outcomes:
            assert o.classification in (CLASS_SUBCRITICAL, CLASS_ALMOST, CLASS_OTHER)

    def test_interval_contains_estimate(self):
        cfg = ExperimentConfig(
            params=PARAMS, seed_size=SeedSizeSpec(offset_c=0.0), trials=40, master_seed=5
        )
        s = run_experiment(cfg)
        assert s.wilson_low <= s.empirical_percolation_probability <= s.wilson_high

    def test_theorem_bound_matches_thresholds(self):
        cfg = ExperimentConfig(
            params=PARAMS, seed_size=SeedSizeSpec(a=5), trials=5, master_seed=2
        )
        s = run_experiment(cfg)
        alpha_eff = abs(s.a - s.critical.ac)
        assert s.theorem_used == "subcritical"
        assert s.theorem_bound == thresholds.theorem_subcritical_bound(PARAMS, alpha_eff)
        cfg2 = ExperimentConfig(
            params=PARAMS, seed_size=SeedSizeSpec(a=200), trials=5, master_seed=2
        )
        s2 = run_experiment(cfg2)
        alpha_eff2 = abs(s2.a - s2.critical.ac)
        assert s2.theorem_used == "supercritical"
        assert s2.theorem_bound == thresholds.theorem_supercritical_bound(PARAMS, alpha_eff2)

    def test_mean_trajectory_tracks_expectation(self):
        cfg = ExperimentConfig(
            params=PARAMS,
            seed_size=SeedSizeSpec(offset_c=0.0),
            trials=400,
            master_seed=21,
        )
        s = run_experiment(cfg)
        a = s.a
        for t, mean, se in s.mean_trajectory[1:].tolist():
            predicted = a + (PARAMS.n - a) * thresholds.binom_tail_geq(
                int(t), PARAMS.p, PARAMS.r
            )
            assert abs(mean - predicted) <= 4 * max(se, 1e-9)

    def test_explicit_mode(self):
        cfg = ExperimentConfig(
            params=ProcessParams(n=500, p=8e-3, r=2),
            seed_size=SeedSizeSpec(offset_c=3.0),
            trials=10,
            master_seed=13,
            mode="explicit",
        )
        s = run_experiment(cfg)
        assert sum(s.class_counts.values()) == 10

    def test_stage_diagnostics_aggregation(self):
        cfg = ExperimentConfig(
            params=ProcessParams(n=4000, p=1.5e-3, r=2),
            seed_size=SeedSizeSpec(offset_c=4.0),
            trials=8,
            master_seed=31,
            stage_diagnostics=True,
        )
        s = run_experiment(cfg)
        assert s.stage_quantiles is not None
        assert 0.0 <= s.stage_quantiles["early_ok_fraction"] <= 1.0
        assert s.stage_quantiles["median_size_B"] <= s.stage_quantiles["median_size_Bhat"]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(params=PARAMS, seed_size=SeedSizeSpec(a=1), trials=0, master_seed=0)
        with pytest.raises(ValueError):
            ExperimentConfig(
                params=PARAMS,
                seed_size=SeedSizeSpec(a=1),
                trials=1,
                master_seed=0,
                percolation_threshold=0.0,
            )
        with pytest.raises(ValueError):
            ExperimentConfig(
                params=PARAMS, seed_size=SeedSizeSpec(a=1), trials=1, master_seed=0, mode="magic"
            )


class TestSweep:
    def test_endpoints(self):
        cfg = ExperimentConfig(
            params=PARAMS, seed_size=SeedSizeSpec(a=0), trials=12, master_seed=7
        )
        result = sweep(cfg, [0, PARAMS.n])
        assert result.points[0].p_hat == 0.0
        assert result.points[1].p_hat == 1.0

    def test_csv_columns(self):
        cfg = ExperimentConfig(
            params=PARAMS, seed_size=SeedSizeSpec(a=0), trials=5, master_seed=7
        )
        text = sweep(cfg, [0, 10]).to_csv()
        header = text.splitlines()[0]
        assert header == "a,alpha_offset,p_hat,wilson_lo,wilson_hi,mean_final_size,mean_T,theorem_bound"
        assert len(text.splitlines()) == 3

    def test_determinism_across_workers(self):
        cfg1 = ExperimentConfig(
            params=PARAMS, seed_size=SeedSizeSpec(a=0), trials=16, master_seed=7, workers=1
        )
        cfg2 = ExperimentConfig(
            params=PARAMS, seed_size=SeedSizeSpec(a=0), trials=16, master_seed=7, workers=3
        )
        a_values = [10, 40, 70]
        assert sweep(cfg1, a_values).to_csv() == sweep(cfg2, a_values).to_csv()

    def test_requires_values(self):
        cfg = ExperimentConfig(
            params=PARAMS, seed_size=SeedSizeSpec(a=0), trials=5, master_seed=7
        )
        with pytest.raises(ValueError):
            sweep(cfg, [])
