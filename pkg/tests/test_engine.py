import math

import numpy as np
import pytest

from bootperc.engine import (
    CLASS_ALMOST,
    CLASS_CENSORED,
    CLASS_STOPPED,
    ExplicitSource,
    ImplicitSource,
    SeedSpec,
    TraceOptions,
    martingale_series,
    run_direct,
    run_process,
    write_trace_csv,
)
from bootperc.graph import from_edges, sample_gnp
from bootperc.rng import make_generator
from bootperc.thresholds import ProcessParams, binom_tail_geq


class TestRunDirect:
    def test_empty_seed(self):
        g = sample_gnp(30, 0.2, seed=1)
        final, gens = run_direct(g, [], 2)
        assert final == frozenset()
        assert gens == 0

    def test_full_seed(self):
        g = sample_gnp(30, 0.2, seed=1)
        final, gens = run_direct(g, range(1, 31), 2)
        assert final == frozenset(range(1, 31))
        assert gens in (0, 1)

    def test_star_graph(self):
        # K_{1,5}: centre 1 with leaves 2..6; two infected leaves infect
        # only the centre (each remaining leaf has one neighbour)
        g = from_edges(6, [(1, v) for v in range(2, 7)])
        final, gens = run_direct(g, [2, 3], 2)
        assert final == frozenset({1, 2, 3})
        assert gens == 1

    def test_chain_of_triangles_generations(self):
        # vertices 1,2 infect 3 (two common neighbours), then 3,2 infect 4, ...
        edges = [(i, i + 1) for i in range(1, 6)] + [(i, i + 2) for i in range(1, 5)]
        g = from_edges(6, edges)
        final, gens = run_direct(g, [1, 2], 2)
        assert final == frozenset(range(1, 7))
        assert gens == 4


class TestRunProcess:
    def test_no_seeds(self):
        params = ProcessParams(n=50, p=0.05, r=2)
        trace = run_process(ImplicitSource(params, seed=3), SeedSpec.prefix(0), 2)
        assert trace.T == 0
        assert trace.final_size == 0
        assert trace.classification == CLASS_STOPPED
        assert list(trace.infected_sizes) == [0]

    def test_all_seeds(self):
        params = ProcessParams(n=40, p=0.05, r=2)
        trace = run_process(ImplicitSource(params, seed=3), SeedSpec.prefix(40), 2)
        assert trace.T == 40
        assert trace.final_size == 40
        assert trace.classification == CLASS_ALMOST
        # dissecting the whole graph reveals each pair exactly once
        assert trace.bernoulli_draws == 40 * 39 // 2

    def test_explicit_equals_direct(self):
        rng = np.random.default_rng(11)
        for case in range(60):
            n = int(rng.integers(20, 400))
            p = float(rng.choice([0.02, 0.05, 0.1]))
            r = int(rng.choice([2, 3]))
            g = sample_gnp(n, p, seed=int(rng.integers(0, 2**60)))
            k = int(rng.integers(0, n // 2 + 1))
            seeds = rng.choice(np.arange(1, n + 1), size=k, replace=False).tolist()
            oracle, _ = run_direct(g, seeds, r)
            trace = run_process(ExplicitSource(g), SeedSpec.of(seeds), r)
            assert frozenset(trace.final_infected.tolist()) == oracle

    def test_seed_monotonicity(self):
        rng = np.random.default_rng(12)
        for case in range(30):
            n = int(rng.integers(30, 300))
            g = sample_gnp(n, 0.05, seed=int(rng.integers(0, 2**60)))
            small = set(rng.choice(np.arange(1, n + 1), size=5, replace=False).tolist())
            extra = set(rng.choice(np.arange(1, n + 1), size=8, replace=False).tolist())
            big = small | extra
            f_small, _ = run_direct(g, small, 2)
            f_big, _ = run_direct(g, big, 2)
            assert f_small <= f_big

    def test_trace_invariants(self):
        params = ProcessParams(n=3000, p=2e-3, r=2)
        for trial in range(10):
            src = ImplicitSource(params, rng=make_generator(17, trial, 0))
            trace = run_process(src, SeedSpec.prefix(25), 2)
            sizes = trace.infected_sizes
            assert sizes[0] == 25
            assert np.all(np.diff(sizes) >= 0)
            assert sizes[trace.T] == trace.T
            steps = np.arange(trace.T)
            assert np.all(sizes[:-1] > steps)
            assert trace.final_size <= params.n

    def test_determinism(self):
        params = ProcessParams(n=800, p=3e-3, r=2)
        t1 = run_process(ImplicitSource(params, rng=make_generator(5, 0, 0)), SeedSpec.prefix(12), 2)
        t2 = run_process(ImplicitSource(params, rng=make_generator(5, 0, 0)), SeedSpec.prefix(12), 2)
        assert np.array_equal(t1.infected_sizes, t2.infected_sizes)
        assert np.array_equal(t1.final_infected, t2.final_infected)
        assert t1.T == t2.T

    def test_single_revelation_audit(self):
        params = ProcessParams(n=120, p=0.05, r=2)
        src = ImplicitSource(params, seed=9, audit=True)
        trace = run_process(src, SeedSpec.prefix(10), 2)
        # audit mode raises on any double reveal; also check the budget
        assert trace.bernoulli_draws == len(src.revealed)
        assert trace.bernoulli_draws <= params.n * (params.n - 1) // 2

    def test_max_steps_censoring(self):
        params = ProcessParams(n=2000, p=2e-3, r=2)
        src = ImplicitSource(params, rng=make_generator(5, 1, 0))
        trace = run_process(src, SeedSpec.prefix(50), 2, TraceOptions(max_steps=30))
        assert trace.T is None
        assert trace.classification == CLASS_CENSORED
        assert len(trace.infected_sizes) == 31

    def test_size_horizon(self):
        params = ProcessParams(n=500, p=5e-3, r=2)
        src = ImplicitSource(params, rng=make_generator(5, 2, 0))
        trace = run_process(src, SeedSpec.prefix(20), 2, TraceOptions(size_horizon=10))
        assert len(trace.infected_sizes) == 11
        assert trace.T is not None  # run completed despite short recording

    def test_checkpoint_contents(self):
        g = from_edges(6, [(1, 2), (1, 3), (2, 3), (3, 4), (4, 5), (4, 6)])
        trace = run_process(
            ExplicitSource(g), SeedSpec.of([1, 2]), 2, TraceOptions(checkpoints=(2,))
        )
        chk = trace.counters_at[2]
        assert chk.t == 2
        assert list(chk.examined) == [1, 2]
        # counters vs hand count: neighbours of {1,2} among unexamined
        assert chk.counters[3] == 2
        assert chk.counters[4] == 0

    def test_expected_trajectory(self):
        # mean |A(t)| over trials tracks a + (n-a) pi_hat(t) within 4 SE
        params = ProcessParams(n=4000, p=1e-3, r=2)
        a, trials, cap = 40, 400, 60
        stack = []
        for trial in range(trials):
            src = ImplicitSource(params, rng=make_generator(23, trial, 0))
            tr = run_process(src, SeedSpec.prefix(a), 2, TraceOptions(max_steps=cap))
            stack.append(tr.infected_sizes[: min(len(tr.infected_sizes), cap + 1)])
        tmin = min(len(s) for s in stack) - 1
        mat = np.stack([s[: tmin + 1] for s in stack]).astype(float)
        mean = mat.mean(axis=0)
        se = mat.std(axis=0, ddof=1) / math.sqrt(trials)
        for t in range(tmin + 1):
            predicted = a + (params.n - a) * binom_tail_geq(t, params.p, 2)
            assert abs(mean[t] - predicted) <= 4 * max(se[t], 1e-9)


class TestMartingale:
    def test_zero_at_start(self):
        params = ProcessParams(n=200, p=0.01, r=2)
        trace = run_process(ImplicitSource(params, seed=2), SeedSpec.prefix(10), 2)
        series = martingale_series(trace, params)
        assert series.values[0] == 0.0

    def test_exact_inversion(self):
        params = ProcessParams(n=500, p=5e-3, r=2)
        trace = run_process(ImplicitSource(params, seed=4), SeedSpec.prefix(15), 2)
        series = martingale_series(trace, params)
        a, n = trace.a, trace.n
        for t, m in enumerate(series.values.tolist()):
            pi = binom_tail_geq(min(t, trace.T), params.p, 2)
            reconstructed = a + m * (1.0 - pi) + (n - a) * pi
            assert reconstructed == pytest.approx(trace.infected_sizes[t], abs=1e-9)

    def test_zero_drift(self):
        # E[M(t)] = 0 for the stopped martingale: check within 4 SE.
        # p is chosen dense enough that every early step sees infections
        # across the trial set, so the empirical SE is meaningful.
        params = ProcessParams(n=4000, p=5e-3, r=2)
        trials = 500
        series_list = []
        for trial in range(trials):
            src = ImplicitSource(params, rng=make_generator(31, trial, 0))
            tr = run_process(src, SeedSpec.prefix(8), 2, TraceOptions(max_steps=16))
            series_list.append(martingale_series(tr, params).values)
        tmin = min(len(s) for s in series_list) - 1
        mat = np.stack([s[: tmin + 1] for s in series_list])
        mean = mat.mean(axis=0)
        se = mat.std(axis=0, ddof=1) / math.sqrt(trials)
        assert tmin >= 5
        for t in range(1, tmin + 1):
            assert abs(mean[t]) <= 4 * max(se[t], 1e-12)

    def test_csv_export(self, tmp_path):
        params = ProcessParams(n=100, p=0.02, r=2)
        trace = run_process(ImplicitSource(params, seed=8), SeedSpec.prefix(5), 2)
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, params, path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "t,infected_size,martingale_value"
        assert len(lines) == len(trace.infected_sizes) + 1
        t0, size0, m0 = lines[1].split(",")
        assert (t0, size0) == ("0", "5")
        assert float(m0) == 0.0


class TestSeedSpec:
    def test_prefix(self):
        assert SeedSpec.prefix(3).resolve(10) == (1, 2, 3)

    def test_members(self):
        assert SeedSpec.of([7, 3, 5]).resolve(10) == (3, 5, 7)

    def test_validation(self):
        with pytest.raises(ValueError):
            SeedSpec.prefix(11).resolve(10)
        with pytest.raises(ValueError):
            SeedSpec.of([0, 2]).resolve(10)
