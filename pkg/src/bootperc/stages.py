"""Stage diagnostics for a single supercritical run.

Decomposes the cascade past the critical window into the measured
quantities of the expansion pipeline:

* early growth: did the run survive past t1 = ceil(t0 + alpha/4) with
  surplus at least (1 - 2 pi_hat(t0)) alpha / 4;
* B-hat: vertices outside the examined set (and outside a designated
  witness subset A of the infected surplus) with at least r-1 revealed
  neighbours among the examined;
* B: the largest connected component inside B-hat;
* the A-B bridge: whether any edge joins the witness set to B;
* C: vertices outside all prior sets with at least r neighbours in a
  designated subset of B;
* D: vertices outside the prior sets with at least r neighbours in C.

All of these are measurements; the matching predictions recompute from
(params, alpha) via :func:`bootperc.thresholds.stage_predictions` and are
reported side by side, never asserted on a single run.

In implicit mode the pipeline samples only pairs the engine run never
revealed (pairs among not-yet-examined vertices), so every draw is
distributionally faithful to the same underlying G(n,p).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import thresholds
from .engine import Checkpoint, EdgeSource, ExplicitSource, ImplicitSource, PercolationTrace
from .graph import count_neighbors_in, from_edges, largest_component, sample_gnp_with
from .thresholds import ProcessParams, StagePredictions


class TraceTooShort(Exception):
    """The trace recording ended before t1 for a reason other than the
    process itself stopping (e.g. a size horizon below t1)."""


@dataclass(frozen=True)
class StageReport:
    """Measured vs. predicted sizes of the expansion pipeline on one run.

    Field names are the serialisation contract; ``to_json`` emits exactly
    these.  ``truncated`` is set when the giant component was smaller than
    the designated subset the C stage wants, in which case the full
    component was used and the pipeline's inequality chain is not
    meaningful.
    """

    alpha: float
    t1: int
    early_ok: bool
    size_Bhat: int
    pred_Bhat: float
    size_B: int
    pred_B: float
    bridge_AB: bool
    size_C: int
    pred_C: float
    size_D: int
    pred_D_fraction: float
    truncated: bool

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class EarlyGrowth:
    ok: bool
    surplus: int
    t1: int
    threshold: float


def early_growth_check(
    trace: PercolationTrace, params: ProcessParams, alpha: float
) -> EarlyGrowth:
    """Evaluate the early-growth event on a recorded trace: the run kept
    going past t1 and carried surplus |A(t1)| - t1 of at least
    (1 - 2 pi_hat(t0)) alpha / 4.

    When the run stopped at T <= t1 the event is simply false (surplus
    reported from the frozen final size).  Raises TraceTooShort only when
    the recording cannot answer the question: the trace was cut before t1
    while the run was still alive.
    """
    pred = thresholds.stage_predictions(params, alpha)
    t1 = pred.t1
    pi_t0 = thresholds.binom_tail_geq(thresholds.t_zero_int(params), params.p, params.r)
    threshold = t1 + (1.0 - 2.0 * pi_t0) * alpha / 4.0
    if trace.T is not None and trace.T <= t1:
        return EarlyGrowth(ok=False, surplus=trace.final_size - t1, t1=t1, threshold=threshold)
    if len(trace.infected_sizes) <= t1:
        raise TraceTooShort(
            f"run alive past t1={t1} but only {len(trace.infected_sizes) - 1} steps recorded"
        )
    size_t1 = int(trace.infected_sizes[t1])
    return EarlyGrowth(
        ok=size_t1 >= threshold,
        surplus=size_t1 - t1,
        t1=t1,
        threshold=threshold,
    )


def designated_witness(
    checkpoint: Checkpoint, params: ProcessParams, alpha: float
) -> np.ndarray:
    """The designated witness subset A: the smallest-id members of
    A(t1) \\ Z(t1), ceil((1 - 2 pi_hat(t0)) alpha / 4) of them (capped at
    the available surplus)."""
    pred = thresholds.stage_predictions(params, alpha)
    want = math.ceil(pred.witness_target)
    pool = np.setdiff1d(checkpoint.infected, checkpoint.examined)  # sorted
    return pool[: max(0, want)]


def qualified_set(checkpoint: Checkpoint, witness: np.ndarray, r: int) -> np.ndarray:
    """B-hat: vertices outside Z(t1) and outside the witness set whose
    revealed-neighbour counter reached r-1 by step t1."""
    mask = checkpoint.counters >= (r - 1)
    mask[0] = False
    mask[checkpoint.examined] = False
    if len(witness):
        mask[witness] = False
    return np.flatnonzero(mask).astype(np.int64)


def giant_in_qualified(source: EdgeSource, bhat: np.ndarray) -> np.ndarray:
    """Largest connected component inside B-hat, as sorted vertex ids.

    Explicit mode reads the induced subgraph.  Implicit mode samples the
    edges inside B-hat fresh: the engine never revealed pairs between
    unexamined vertices, so the induced subgraph is an untouched
    G(|B-hat|, p).
    """
    k = len(bhat)
    if k <= 1:
        return np.array(sorted(int(v) for v in bhat), dtype=np.int64)
    members = np.sort(np.asarray(bhat, dtype=np.int64))
    if isinstance(source, ExplicitSource):
        summary = largest_component(source.graph, members.tolist(), include_members=True)
        return np.array(sorted(summary.largest_members), dtype=np.int64)
    if source.audit:
        sub = _audited_subgraph(source, members)
    else:
        sub = sample_gnp_with(k, source.params.p, source.rng)
    summary = largest_component(sub, include_members=True)
    return members[np.array(sorted(summary.largest_members), dtype=np.int64) - 1]


def _audited_subgraph(source: ImplicitSource, members: np.ndarray):
    k = len(members)
    ids = members.tolist()
    idx = {v: j for j, v in enumerate(ids)}
    edges = []
    for i in range(k):
        hits = source._draw_pairs(ids[i], ids[i + 1 :])
        edges.extend((i + 1, idx[v] + 1) for v in hits)
    return from_edges(k, edges)


@dataclass(frozen=True)
class BridgeExpansion:
    bridge_AB: bool
    C: np.ndarray
    D: np.ndarray
    truncated: bool


def bridge_and_expand(
    source: EdgeSource,
    witness: np.ndarray,
    b_component: np.ndarray,
    r: int,
    *,
    examined: np.ndarray,
    bhat: np.ndarray,
    predictions: StagePredictions,
) -> BridgeExpansion:
    """The A-B bridge event and the two expansion stages.

    C is counted against a designated subset of B of size
    ceil(b1_target), truncated to |B| (flagged); D is counted against C
    truncated to ceil(pred_C) when C is larger.  Each stage draws only
    pairs no earlier stage (or the engine) touched.
    """
    n = source.n

    bridge = False
    if len(witness) and len(b_component):
        if isinstance(source, ExplicitSource):
            wset = set(witness.tolist())
            bridge = any(
                w in wset for v in b_component.tolist() for w in source.graph.adj[v]
            )
        else:
            bridge = source.pair_block_has_edge(witness.tolist(), b_component.tolist())

    b1_want = math.ceil(predictions.b1_target)
    truncated = len(b_component) < b1_want
    b1 = np.sort(b_component)[: min(b1_want, len(b_component))]

    exclude = np.zeros(n + 1, dtype=bool)
    exclude[0] = True
    exclude[examined] = True
    if len(witness):
        exclude[witness] = True
    exclude[bhat] = True
    pool_c = np.flatnonzero(~exclude).astype(np.int64)
    c_set = _expand_once(source, pool_c, b1, r)

    c1_want = math.ceil(predictions.pred_c)
    c1 = c_set[: min(c1_want, len(c_set))]

    exclude_d = np.zeros(n + 1, dtype=bool)
    exclude_d[0] = True
    exclude_d[examined] = True
    if len(witness):
        exclude_d[witness] = True
    if len(b_component):
        exclude_d[b_component] = True
    if len(c_set):
        exclude_d[c_set] = True
    pool_d = np.flatnonzero(~exclude_d).astype(np.int64)
    d_set = _expand_once(source, pool_d, c1, r)

    return BridgeExpansion(bridge_AB=bridge, C=c_set, D=d_set, truncated=truncated)


def _expand_once(
    source: EdgeSource, pool: np.ndarray, targets: np.ndarray, r: int
) -> np.ndarray:
    """Vertices of ``pool`` with at least r neighbours in ``targets``."""
    if len(pool) == 0 or len(targets) == 0:
        return np.empty(0, dtype=np.int64)
    if isinstance(source, ExplicitSource):
        counts = count_neighbors_in(source.graph, targets.tolist())[pool]
    else:
        counts = source.count_into(pool.tolist(), targets.tolist())
    return pool[counts >= r]


def run_stage_pipeline(
    source: EdgeSource,
    trace: PercolationTrace,
    params: ProcessParams,
    alpha: float,
) -> StageReport:
    """Run every stage on one finished (or t1-capped) trace.

    The trace must carry a counter checkpoint at t1.  A run that stopped
    before t1 reports early_ok=False with all stage sets empty: the
    pipeline is only defined conditional on early growth.
    """
    pred = thresholds.stage_predictions(params, alpha)
    early = early_growth_check(trace, params, alpha)
    base = dict(
        alpha=alpha,
        t1=pred.t1,
        early_ok=early.ok,
        pred_Bhat=pred.pred_bhat,
        pred_B=pred.pred_b,
        pred_C=pred.pred_c,
        pred_D_fraction=pred.pred_d_fraction,
    )
    if trace.T is not None and trace.T <= pred.t1:
        return StageReport(
            size_Bhat=0, size_B=0, bridge_AB=False, size_C=0, size_D=0,
            truncated=False, **base,
        )
    if pred.t1 not in trace.counters_at:
        raise TraceTooShort(f"no counter checkpoint at t1={pred.t1}; pass checkpoints=({pred.t1},)")
    checkpoint = trace.counters_at[pred.t1]
    witness = designated_witness(checkpoint, params, alpha)
    bhat = qualified_set(checkpoint, witness, params.r)
    b_comp = giant_in_qualified(source, bhat)
    expansion = bridge_and_expand(
        source,
        witness,
        b_comp,
        params.r,
        examined=checkpoint.examined,
        bhat=bhat,
        predictions=pred,
    )
    return StageReport(
        size_Bhat=len(bhat),
        size_B=len(b_comp),
        bridge_AB=expansion.bridge_AB,
        size_C=len(expansion.C),
        size_D=len(expansion.D),
        truncated=expansion.truncated,
        **base,
    )
