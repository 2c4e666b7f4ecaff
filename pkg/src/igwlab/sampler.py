"""Random tree generation with per-replicate deterministic streams.

A tree is a pure function of (master seed, replicate index): vertex j of a
replicate consumes Philox block j of that replicate's key, giving one
uniform for its offspring draw and one for its parent-edge length.  The
vectorized engine therefore produces bit-identical trees no matter how
replicates are grouped into batches, and equals the scalar reference
sampler vertex for vertex.

Generation is breadth-first.  Heavy-tailed offspring laws make E[tree size]
infinite for critical laws, so every tree carries a node budget: a tree is
*censored* when more than ``budget`` non-root vertices exist at the end of
a BFS level (a value, not an error; breadth-first growth keeps the cutoff
depth-unbiased).  Offspring counts come from an inverse-CDF table with a
streaming tail fallback for draws beyond the table.

Two batch collectors cover the package's needs: summary statistics
(height/length/edge count plus the pooled histogram of every draw made,
no tree storage) and full forests of :class:`~igwlab.trees.MetricTree`
for the pruning experiments, yielded in chunks to bound memory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .offspring import FiniteTable, OffspringDistribution
from .rng import CounterStream, block_uniforms, stream_key, stream_keys
from .trees import CombinatorialTree, MetricTree

__all__ = [
    "SampleConfig",
    "SampleOutcome",
    "StatsSample",
    "sample_offspring",
    "sample_shape",
    "sample_metric",
    "sample_stats",
    "iter_forest",
    "sample_forest",
]

_TABLE_KMAX = 1 << 20
_TABLE_TAIL_EPS = 1e-18
_HIST_SIZE = 512


@dataclass(frozen=True)
class SampleConfig:
    """Identity and limits of one replicate draw."""

    seed: int
    replicate: int = 0
    budget: int = 1_000_000
    edge_rate: float | None = None  # lambda; None = shape only

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("node budget must be >= 1")
        if self.edge_rate is not None and not self.edge_rate > 0:
            raise ValueError("edge rate must be > 0")


@dataclass(frozen=True)
class SampleOutcome:
    """One replicate: the tree, or a censored marker."""

    tree: MetricTree | CombinatorialTree | None
    censored: bool
    nodes_generated: int      # non-root vertices created before stopping
    draws_consumed: int       # Philox blocks used (= nodes generated)


@dataclass
class StatsSample:
    """Summary statistics of a batch; censored entries are NaN / -1."""

    censored: np.ndarray            # bool, per replicate
    edges: np.ndarray               # int64; -1 for censored replicates
    heights: np.ndarray | None      # float64; NaN for censored; None if shape-only
    lengths: np.ndarray | None
    offspring_hist: np.ndarray      # counts of every draw made, incl. censored trees

    @property
    def n_censored(self) -> int:
        return int(self.censored.sum())

    @property
    def censor_rate(self) -> float:
        return self.n_censored / len(self.censored)


# --------------------------------------------------------------------- #
# Inverse-CDF tables                                                      #
# --------------------------------------------------------------------- #


class _CdfTable:
    """P(X <= k) lookup with a streaming fallback beyond the table."""

    def __init__(self, d: OffspringDistribution, kmax: int = _TABLE_KMAX):
        if isinstance(d, FiniteTable):
            cum = np.cumsum(d.probs)
            cum[-1] = 1.0  # mass defect <= construction tolerance
        else:
            cum = d.cumulative_table(kmax)
            cut = int(np.searchsorted(1.0 - cum < _TABLE_TAIL_EPS, True))
            if cut < len(cum) - 1:
                cum = cum[: cut + 1].copy()
                cum[-1] = 1.0
        self.cum = cum
        self.dist = d

    def lookup(self, u: np.ndarray) -> np.ndarray:
        k = np.searchsorted(self.cum, u, side="right").astype(np.int64)
        over = k == len(self.cum)
        if np.any(over):
            for i in np.flatnonzero(over):
                k[i] = self._walk_tail(float(np.asarray(u)[i]))
        return k

    def _walk_tail(self, u: float) -> int:
        acc = float(self.cum[-1])
        for k, pk in self.dist.pmf_tail_iter(len(self.cum)):
            acc += pk
            if u < acc or (pk == 0.0 and acc >= 1.0 - 1e-12):
                return k
        raise AssertionError("unreachable")


_table_cache: dict = {}


def _tables(d: OffspringDistribution) -> _CdfTable:
    key = d.spec_string()
    tab = _table_cache.get(key)
    if tab is None:
        tab = _CdfTable(d)
        _table_cache[key] = tab
    return tab


# --------------------------------------------------------------------- #
# Scalar reference sampler                                                #
# --------------------------------------------------------------------- #


def sample_offspring(d: OffspringDistribution, stream: CounterStream) -> int:
    """One offspring draw by inverse CDF from a sequential stream."""
    return int(_tables(d).lookup(np.array(stream.uniform())))


def sample_shape(d: OffspringDistribution, cfg: SampleConfig) -> SampleOutcome:
    return _sample_one(d, cfg, metric=False)


def sample_metric(d: OffspringDistribution, cfg: SampleConfig) -> SampleOutcome:
    if cfg.edge_rate is None:
        raise ValueError("sample_metric needs cfg.edge_rate")
    return _sample_one(d, cfg, metric=True)


def _sample_one(d: OffspringDistribution, cfg: SampleConfig, metric: bool) -> SampleOutcome:
    """Scalar BFS generation; the vectorized engine must match it exactly."""
    if d.classify() == "supercritical":
        raise ValueError("sampling requires a critical or subcritical law")
    tab = _tables(d)
    key = np.uint64(stream_key(cfg.seed, cfg.replicate))
    lam = cfg.edge_rate
    parents = [-1, 0]
    lengths = [0.0, 0.0]
    gen_starts = [0, 1, 2]
    frontier = [1]
    count = 1      # non-root vertices created
    processed = 0  # vertices whose draws were made (= Philox blocks used)
    while frontier:
        ctr = np.asarray(frontier, dtype=np.uint64)
        u_off, u_len = block_uniforms(np.full(len(ctr), key), ctr)
        ks = tab.lookup(u_off)
        processed += len(frontier)
        if metric:
            elens = -np.log(u_len) / lam
            for j, v in zip(frontier, elens):
                lengths[j] = float(v)
        nxt = []
        kid = count + 1
        for j, k in zip(frontier, ks):
            for _ in range(int(k)):
                parents.append(j)
                lengths.append(0.0)
                nxt.append(kid)
                kid += 1
        count += int(ks.sum())
        if count > cfg.budget:
            return SampleOutcome(None, True, count, processed)
        frontier = nxt
        if nxt:
            gen_starts.append(count + 1)
    parent = np.array(parents, dtype=np.int32)
    gs = np.asarray(gen_starts, dtype=np.int64)
    if metric:
        tree = MetricTree(parent, np.array(lengths), validate=False, gen_starts=gs)
    else:
        tree = CombinatorialTree(parent, validate=False, gen_starts=gs)
    return SampleOutcome(tree, False, count, processed)


# --------------------------------------------------------------------- #
# Vectorized batch engine                                                 #
# --------------------------------------------------------------------- #


def _batch(d: OffspringDistribution, keys: np.ndarray, budget: int,
           lam: float | None, want_trees: bool):
    """One chunk of replicates, generation-synchronous across trees.

    Returns (censored, counts, hist, heights, lengths, rows) where rows is
    a list of per-generation tuples (slot, j, parent_j, gen, elen) covering
    every processed vertex, or None when want_trees is False.
    """
    tab = _tables(d)
    R = len(keys)
    counts = np.ones(R, dtype=np.int64)
    censored = np.zeros(R, dtype=bool)
    hist = np.zeros(_HIST_SIZE, dtype=np.int64)
    heights = np.zeros(R) if lam is not None else None
    lengths = np.zeros(R) if lam is not None else None
    rows: list | None = [] if want_trees else None

    # frontier state, kept sorted by slot; every vertex j >= 1 passes through
    f_slot = np.arange(R, dtype=np.int64)
    f_j = np.ones(R, dtype=np.int64)
    f_parent = np.zeros(R, dtype=np.int64)
    f_depth = np.zeros(R) if lam is not None else None
    gen = 1
    elen = None

    while len(f_slot):
        u_off, u_len = block_uniforms(keys[f_slot], f_j.astype(np.uint64))
        ks = tab.lookup(u_off)
        hist += np.bincount(np.minimum(ks, _HIST_SIZE - 1), minlength=_HIST_SIZE)
        if lam is not None:
            elen = -np.log(u_len) / lam
            depth = f_depth + elen
        if want_trees:
            rows.append((f_slot, f_j, f_parent,
                         np.full(len(f_slot), gen, dtype=np.int32),
                         elen if lam is not None else None))
        # frontier is sorted by slot: all per-slot reductions via segments,
        # so per-generation work stays proportional to the frontier size
        seg = np.concatenate(([0], np.flatnonzero(np.diff(f_slot)) + 1))
        uslot = f_slot[seg]
        if lam is not None:
            lengths[uslot] += np.add.reduceat(elen, seg)
            leaf_depth = np.where(ks == 0, depth, -np.inf)
            segmax = np.maximum.reduceat(leaf_depth, seg)
            heights[uslot] = np.maximum(heights[uslot], segmax)
        seg_children = np.add.reduceat(ks, seg) if len(ks) else np.zeros(0, dtype=np.int64)
        total_children = int(ks.sum())
        if total_children == 0:
            break
        child_slot = np.repeat(f_slot, ks)
        child_parent = np.repeat(f_j, ks)
        if lam is not None:
            child_pdepth = np.repeat(depth, ks)
        block_start = np.concatenate(([0], np.cumsum(seg_children)[:-1]))
        rank = np.arange(total_children, dtype=np.int64) - np.repeat(block_start, seg_children)
        child_j = np.repeat(counts[uslot], seg_children) + 1 + rank
        counts[uslot] += seg_children
        over_seg = counts[uslot] > budget
        if np.any(over_seg):
            censored[uslot[over_seg]] = True
            keep = ~np.repeat(over_seg, seg_children)
            child_slot = child_slot[keep]
            child_parent = child_parent[keep]
            child_j = child_j[keep]
            if lam is not None:
                child_pdepth = child_pdepth[keep]
        f_slot, f_j, f_parent = child_slot, child_j, child_parent
        if lam is not None:
            f_depth = child_pdepth
        gen += 1

    return censored, counts, hist, heights, lengths, rows


def _assemble_trees(R, censored, counts, rows, metric: bool):
    """Turn per-generation rows into per-slot trees (None for censored)."""
    trees: list = [None] * R
    if not rows:
        return trees
    slot = np.concatenate([r[0] for r in rows])
    j = np.concatenate([r[1] for r in rows])
    parent = np.concatenate([r[2] for r in rows])
    gen = np.concatenate([r[3] for r in rows])
    elen = np.concatenate([r[4] for r in rows]) if metric else None
    order = np.argsort(slot, kind="stable")  # within a slot, (gen, j) stays sorted
    slot = slot[order]
    j = j[order]
    parent = parent[order]
    gen = gen[order]
    if metric:
        elen = elen[order]
    bounds = np.searchsorted(slot, np.arange(R + 1))
    for s in range(R):
        if censored[s]:
            continue
        lo, hi = bounds[s], bounds[s + 1]
        n = hi - lo
        parr = np.empty(n + 1, dtype=np.int32)
        parr[0] = -1
        parr[j[lo:hi]] = parent[lo:hi]
        g = gen[lo:hi]
        gs = np.concatenate(([0], np.searchsorted(g, np.arange(1, g[-1] + 1)) + 1,
                             [n + 1])).astype(np.int64)
        if metric:
            larr = np.zeros(n + 1)
            larr[j[lo:hi]] = elen[lo:hi]
            trees[s] = MetricTree(parr, larr, validate=False, gen_starts=gs)
        else:
            trees[s] = CombinatorialTree(parr, validate=False, gen_starts=gs)
    return trees


# --------------------------------------------------------------------- #
# Public batch API                                                        #
# --------------------------------------------------------------------- #


def sample_stats(d: OffspringDistribution, seed: int, n: int, *,
                 budget: int = 1_000_000, lam: float | None = None,
                 replicate0: int = 0, chunk: int = 131072) -> StatsSample:
    """Heights/lengths/edge counts for replicates replicate0..replicate0+n-1."""
    if d.classify() == "supercritical":
        raise ValueError("sampling requires a critical or subcritical law")
    censored = np.zeros(n, dtype=bool)
    edges = np.zeros(n, dtype=np.int64)
    heights = np.zeros(n) if lam is not None else None
    lengths = np.zeros(n) if lam is not None else None
    hist = np.zeros(_HIST_SIZE, dtype=np.int64)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        reps = np.arange(replicate0 + lo, replicate0 + hi, dtype=np.int64)
        keys = stream_keys(seed, reps)
        cen, counts, h, hts, lens, _ = _batch(d, keys, budget, lam, want_trees=False)
        censored[lo:hi] = cen
        edges[lo:hi] = np.where(cen, -1, counts)
        if lam is not None:
            heights[lo:hi] = np.where(cen, np.nan, hts)
            lengths[lo:hi] = np.where(cen, np.nan, lens)
        hist += h
    return StatsSample(censored, edges, heights, lengths, hist)


def iter_forest(d: OffspringDistribution, seed: int, n: int, *,
                budget: int = 1_000_000, lam: float | None = None,
                replicate0: int = 0, chunk: int = 4096):
    """Yield (trees, censored_mask) chunk by chunk; censored slots are None."""
    if d.classify() == "supercritical":
        raise ValueError("sampling requires a critical or subcritical law")
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        reps = np.arange(replicate0 + lo, replicate0 + hi, dtype=np.int64)
        keys = stream_keys(seed, reps)
        cen, counts, _, _, _, rows = _batch(d, keys, budget, lam, want_trees=True)
        yield _assemble_trees(hi - lo, cen, counts, rows, metric=lam is not None), cen


def sample_forest(d: OffspringDistribution, seed: int, n: int, **kw):
    """Materialized :func:`iter_forest`: (list of trees or None, n_censored)."""
    trees: list = []
    ncen = 0
    for chunk_trees, cen in iter_forest(d, seed, n, **kw):
        trees.extend(chunk_trees)
        ncen += int(cen.sum())
    return trees, ncen
