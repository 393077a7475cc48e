"""Bootstrap percolation engines.

Two interchangeable forms of the same process:

* :func:`run_direct`: the fixed-point definition on an explicit graph:
  sweep generations until no uninfected vertex has r infected neighbours.
  This is the oracle form.

* :func:`run_process`: the examine-one-vertex reformulation: at step t
  the smallest unexamined infected vertex is examined and its edges to
  all not-yet-examined vertices are revealed (read from the graph in
  explicit mode, drawn Bernoulli(p) in implicit mode).  A vertex outside
  the seed set becomes infected once its revealed-neighbour counter
  reaches r.  The run stops at the first step T where the examined set
  has caught the infected set.  This form scales to implicit G(n,p)
  without materialising the graph and exposes the martingale trace.

In implicit mode every unordered pair is revealed at most once: a pair is
only drawn when one endpoint is examined for the first time.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .graph import ExplicitGraph
from .rng import make_generator
from .thresholds import DegenerateRegime, ProcessParams, binom_tail_geq

CLASS_STOPPED = "Stopped"
CLASS_ALMOST = "AlmostPercolated"
CLASS_CENSORED = "Censored"  # run hit a step cap before stopping

_W63 = 1 << 63


@dataclass(frozen=True)
class SeedSpec:
    """Initially infected vertices.  By default the a smallest ids
    {1,...,a}; explicit membership is allowed for fixture graphs."""

    a: int
    members: tuple[int, ...] | None = None

    @classmethod
    def prefix(cls, a: int) -> "SeedSpec":
        return cls(a=a)

    @classmethod
    def of(cls, members) -> "SeedSpec":
        ms = tuple(sorted(set(int(v) for v in members)))
        return cls(a=len(ms), members=ms)

    def resolve(self, n: int) -> tuple[int, ...]:
        if not (0 <= self.a <= n):
            raise ValueError(f"seed count a={self.a} outside 0..{n}")
        if self.members is None:
            return tuple(range(1, self.a + 1))
        if self.members and not (1 <= self.members[0] and self.members[-1] <= n):
            raise ValueError("seed members outside 1..n")
        return self.members


@dataclass(frozen=True)
class TraceOptions:
    """Instrumentation knobs for :func:`run_process`.

    checkpoints: steps at which to snapshot counters and set membership.
    max_steps: hard cap on examined steps; a capped run is "Censored".
    size_horizon: record |A(t)| only for t <= horizon (the run itself
        continues); None records the whole trajectory.
    percolation_threshold: fraction of n at which a finished run counts
        as almost-percolated.
    """

    checkpoints: tuple[int, ...] = ()
    max_steps: int | None = None
    size_horizon: int | None = None
    percolation_threshold: float = 0.9


@dataclass(frozen=True)
class Checkpoint:
    """Snapshot of the run state after step t."""

    t: int
    counters: np.ndarray  # neighbours-in-Z count per vertex id
    examined: np.ndarray  # u(1..t) in examination order
    infected: np.ndarray  # sorted infected ids at step t


@dataclass(frozen=True)
class PercolationTrace:
    a: int
    n: int
    r: int
    infected_sizes: np.ndarray  # |A(t)| for t = 0..min(T, horizon)
    T: int | None  # None when max_steps hit before the process stopped
    final_size: int
    final_infected: np.ndarray  # sorted infected ids when the run ended
    counters_at: dict[int, Checkpoint]
    classification: str
    bernoulli_draws: int  # implicit mode: total pair revelations


@dataclass(frozen=True)
class MartingaleSeries:
    values: np.ndarray  # M(t) for each recorded t


class ExplicitSource:
    """Edges read from a materialised graph."""

    mode = "explicit"

    def __init__(self, graph: ExplicitGraph, p: float | None = None):
        self.graph = graph
        self.p = p  # informational; explicit edges come from the graph

    @property
    def n(self) -> int:
        return self.graph.n

    def reveal_partners(self, u: int, eligible: list[int], examined) -> list[int]:
        return [v for v in self.graph.adj[u] if not examined[v]]


class ImplicitSource:
    """Edges of an implicit G(n,p), revealed lazily.

    Per examined vertex the number of new neighbours is one binomial draw
    over the not-yet-examined partners, followed by a uniform choice of
    that many distinct partners: distributionally identical to per-pair
    Bernoulli draws at O(revealed) cost.  Because the eligible count at
    step t is always n - t, the binomial draws are pre-drawn in blocks.
    With ``audit=True`` the slow per-pair path runs instead and every
    drawn pair is recorded in ``revealed``, asserting single revelation
    (test use, small n only).
    """

    mode = "implicit"
    _BLOCK = 2048

    def __init__(
        self,
        params: ProcessParams,
        seed: int = 0,
        rng: np.random.Generator | None = None,
        audit: bool = False,
    ):
        self.params = params
        self.rng = rng if rng is not None else make_generator(seed)
        self.audit = audit
        self.revealed: set[tuple[int, int]] | None = set() if audit else None
        self.bernoulli_draws = 0
        self._counts: list[int] = []
        self._counts_next_m = -1
        self._words: list[int] = []

    @property
    def n(self) -> int:
        return self.params.n

    def _record_pair(self, u: int, v: int) -> None:
        pair = (u, v) if u < v else (v, u)
        if pair in self.revealed:
            raise AssertionError(f"pair {pair} revealed twice")
        self.revealed.add(pair)

    def _draw_pairs(self, u: int, others) -> list[int]:
        p = self.params.p
        hits = []
        for v in others:
            self._record_pair(u, v)
            self.bernoulli_draws += 1
            if self.rng.random() < p:
                hits.append(v)
        return hits

    def _rand_below(self, m: int) -> int:
        # unbiased bounded draw from a pre-fetched pool of 63-bit words
        # (classic threshold rejection; reject probability < m / 2^63)
        words = self._words
        lim = _W63 - (_W63 % m)
        while True:
            if not words:
                words.extend(self.rng.integers(0, _W63, size=4096, dtype=np.int64).tolist())
            w = words.pop()
            if w < lim:
                return w % m

    def _choose_distinct(self, m: int, d: int) -> list[int]:
        # uniform d-subset of range(m): first d distinct values of a
        # uniform stream; d << m in the sparse regime this engine targets
        if d * 4 >= m:
            return sorted(self.rng.permutation(m)[:d].tolist())
        picked: set[int] = set()
        add = picked.add
        rand_below = self._rand_below
        while len(picked) < d:
            add(rand_below(m))
        return sorted(picked)

    def _next_count(self, m: int) -> int:
        # new-neighbour counts for the strictly decreasing eligible sizes
        # m, m-1, ... are pre-drawn one block at a time
        if not self._counts or self._counts_next_m != m:
            lo = max(0, m - self._BLOCK + 1)
            ms = np.arange(m, lo - 1, -1, dtype=np.int64)
            self._counts = self.rng.binomial(ms, self.params.p).tolist()[::-1]
            self._counts_next_m = m
        self._counts_next_m -= 1
        return self._counts.pop()

    def reveal_partners(self, u: int, eligible: list[int], examined) -> list[int]:
        m = len(eligible)
        if m == 0:
            return []
        if self.audit:
            return self._draw_pairs(u, eligible)
        self.bernoulli_draws += m
        d = self._next_count(m)
        if d == 0:
            return []
        if d >= m:
            return list(eligible)
        return [eligible[i] for i in self._choose_distinct(m, d)]

    # --- fresh draws for the stage pipeline (pairs never touched by the
    # --- engine, which only reveals pairs with an examined endpoint)

    def pair_block_has_edge(self, set_a, set_b) -> bool:
        if self.audit:
            found = False
            for a in set_a:
                if self._draw_pairs(int(a), [int(b) for b in set_b]):
                    found = True
            return found
        k = len(set_a) * len(set_b)
        if k == 0:
            return False
        self.bernoulli_draws += k
        return bool(self.rng.binomial(k, self.params.p) > 0)

    def count_into(self, pool, targets) -> np.ndarray:
        """Neighbour counts of each pool vertex inside ``targets``."""
        if self.audit:
            return np.array(
                [len(self._draw_pairs(int(v), [int(w) for w in targets])) for v in pool],
                dtype=np.int64,
            )
        self.bernoulli_draws += len(pool) * len(targets)
        return self.rng.binomial(len(targets), self.params.p, size=len(pool)).astype(np.int64)


EdgeSource = ExplicitSource | ImplicitSource


def run_direct(g: ExplicitGraph, seed_set, r: int) -> tuple[frozenset[int], int]:
    """Fixed-point sweep: returns (final infected set, productive
    generations).  A generation is productive when it infects at least
    one vertex; a seed set that is already a fixed point reports 0."""
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    seeds = sorted(set(int(v) for v in seed_set))
    if seeds and not (1 <= seeds[0] and seeds[-1] <= g.n):
        raise ValueError("seed set outside 1..n")
    infected = np.zeros(g.n + 1, dtype=bool)
    infected[seeds] = True
    counts = np.zeros(g.n + 1, dtype=np.int64)
    frontier = seeds
    generations = 0
    while frontier:
        crossed = []
        for u in frontier:
            for v in g.adj[u]:
                if not infected[v]:
                    counts[v] += 1
                    if counts[v] == r:
                        crossed.append(v)
        joins = [v for v in crossed if not infected[v]]
        if not joins:
            break
        generations += 1
        infected[joins] = True
        frontier = joins
    return frozenset(np.flatnonzero(infected).tolist()), generations


def run_process(
    source: EdgeSource,
    seed: SeedSpec,
    r: int,
    opts: TraceOptions = TraceOptions(),
) -> PercolationTrace:
    """Examine-one-vertex process; see the module docstring.

    Counters are maintained for every not-yet-examined vertex, including
    infected-but-unexamined ones (the stage diagnostics read them); a
    vertex's counter freezes once it is examined.
    """
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    n = source.n
    seeds = seed.resolve(n)
    a = len(seeds)

    # hot loop works on plain lists and bytearrays; numpy only at snapshots
    infected = bytearray(n + 1)
    for v in seeds:
        infected[v] = 1
    examined = bytearray(n + 1)
    counters = [0] * (n + 1)
    heap = list(seeds)  # already sorted, a valid min-heap
    eligible = list(range(1, n + 1))
    position = list(range(-1, n))  # position[v] = index of v in eligible

    want_checkpoint = set(opts.checkpoints)
    checkpoints: dict[int, Checkpoint] = {}
    examined_order: list[int] = []
    horizon = opts.size_horizon
    max_steps = opts.max_steps
    sizes = [a]
    infected_count = a
    t = 0
    censored = False
    heappop, heappush = heapq.heappop, heapq.heappush
    reveal = source.reveal_partners

    while heap:
        if max_steps is not None and t >= max_steps:
            censored = True
            break
        u = heappop(heap)
        t += 1
        examined[u] = 1
        examined_order.append(u)
        # swap-remove u so `eligible` is exactly the unexamined set
        i = position[u]
        last = eligible[-1]
        eligible[i] = last
        position[last] = i
        eligible.pop()
        position[u] = -1

        for v in reveal(u, eligible, examined):
            c = counters[v] + 1
            counters[v] = c
            if c == r and not infected[v]:
                infected[v] = 1
                infected_count += 1
                heappush(heap, v)

        if horizon is None or t <= horizon:
            sizes.append(infected_count)
        if t in want_checkpoint:
            checkpoints[t] = Checkpoint(
                t=t,
                counters=np.array(counters, dtype=np.int64),
                examined=np.array(examined_order, dtype=np.int64),
                infected=np.flatnonzero(
                    np.frombuffer(bytes(infected), dtype=np.uint8)
                ).astype(np.int64),
            )

    T = None if censored else t
    if censored:
        classification = CLASS_CENSORED
    elif infected_count >= opts.percolation_threshold * n:
        classification = CLASS_ALMOST
    else:
        classification = CLASS_STOPPED
    return PercolationTrace(
        a=a,
        n=n,
        r=r,
        infected_sizes=np.array(sizes, dtype=np.int64),
        T=T,
        final_size=infected_count,
        final_infected=np.flatnonzero(np.frombuffer(bytes(infected), dtype=np.uint8)).astype(
            np.int64
        ),
        counters_at=checkpoints,
        classification=classification,
        bernoulli_draws=getattr(source, "bernoulli_draws", 0),
    )


def martingale_series(trace: PercolationTrace, params: ProcessParams) -> MartingaleSeries:
    """Normalised zero-drift series for a recorded trace.

    Inverts the infected-count identity
    |A(t)| = a + M(t) (1 - pi(t)) + (n - a) pi(t),
    with pi evaluated at min(t, T); within the run (t <= T) this is the
    plain binomial tail pi_hat(t).
    """
    a, n, r = trace.a, trace.n, trace.r
    values = np.empty(len(trace.infected_sizes), dtype=np.float64)
    for t, size in enumerate(trace.infected_sizes.tolist()):
        tt = t if trace.T is None else min(t, trace.T)
        pi = binom_tail_geq(tt, params.p, r)
        if pi >= 1.0:
            raise DegenerateRegime(f"pi_hat({tt}) = 1; martingale values diverge")
        values[t] = (size - a - (n - a) * pi) / (1.0 - pi)
    return MartingaleSeries(values=values)


def write_trace_csv(trace: PercolationTrace, params: ProcessParams, path) -> None:
    """Trace export: columns t, infected_size, martingale_value."""
    series = martingale_series(trace, params)
    with open(path, "w") as fh:
        fh.write("t,infected_size,martingale_value\n")
        for t, (size, m) in enumerate(zip(trace.infected_sizes.tolist(), series.values.tolist())):
            fh.write(f"{t},{size},{m:.12g}\n")
