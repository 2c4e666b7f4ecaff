"""Finite rooted metric trees as parallel numpy arrays.

A tree is stored breadth-first: vertex 0 is the root, ``parent[i] < i`` for
every non-root vertex, and vertices of equal depth are contiguous
(``gen_starts`` records the level boundaries).  ``length[i]`` is the length
of the edge joining ``i`` to its parent; ``length[0]`` is unused and zero.
The empty tree is the single root vertex with no edges.

Conventions
-----------
* *Planted*: the root has exactly one child; its edge is the stem.  Random
  trees produced by the sampler are always planted (or empty).  Vertex-rooted
  descendant subtrees may be *stemless* (root degree >= 2); operations accept
  both, and the Horton-Strahler order follows the stemless adjustment.
* *Reduced*: no non-root vertex has exactly one child.  Unreduced trees can
  be represented (they are the inputs of :func:`series_reduce`) and are
  flagged by :attr:`~CombinatorialTree.is_reduced`.
* Shape identity is isomorphism of unordered rooted trees; sibling order is
  meaningless and :func:`canonical_code` is the canonical witness.

Trees are immutable after construction (arrays are write-protected) and all
operations are pure, so instances are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CombinatorialTree",
    "MetricTree",
    "TreePoint",
    "shape",
    "tree_height",
    "tree_length",
    "edge_count",
    "leaf_count",
    "horton_strahler_order",
    "series_reduce",
    "descendant_subtree",
    "canonical_code",
    "almost_isometric",
]


# --------------------------------------------------------------------- #
# Point addressing                                                       #
# --------------------------------------------------------------------- #


@dataclass(frozen=True)
class TreePoint:
    """A point of a metric tree: a vertex, or a location inside an edge.

    ``edge`` is the child-vertex id naming the edge (or the vertex id when
    ``offset`` is None).  ``offset`` is the distance from the parent-side
    endpoint, in [0, edge length].  Offsets 0 and ``edge length`` collapse to
    the corresponding vertex.
    """

    edge: int
    offset: float | None = None

    @staticmethod
    def vertex(v: int) -> "TreePoint":
        return TreePoint(v, None)

    @staticmethod
    def on_edge(child: int, offset: float) -> "TreePoint":
        return TreePoint(child, float(offset))


# --------------------------------------------------------------------- #
# Core classes                                                           #
# --------------------------------------------------------------------- #


class CombinatorialTree:
    """Finite unlabeled rooted tree, shape only (edge lengths dropped)."""

    __slots__ = ("parent", "_gen_starts", "_nchild", "_code")

    def __init__(self, parent, *, validate: bool = True, gen_starts=None):
        parent = np.ascontiguousarray(parent, dtype=np.int32)
        if validate:
            parent, order = _bfs_normalize(parent)
            if gen_starts is not None:
                gen_starts = None  # ordering may have changed
        self.parent = parent
        self.parent.setflags(write=False)
        if gen_starts is not None:
            gen_starts = np.ascontiguousarray(gen_starts, dtype=np.int64)
            gen_starts.setflags(write=False)
        self._gen_starts = gen_starts
        self._nchild = None
        self._code = None

    # -- basic counts ---------------------------------------------------- #

    @property
    def n_vertices(self) -> int:
        return self.parent.shape[0]

    @property
    def n_edges(self) -> int:
        return self.parent.shape[0] - 1

    @property
    def is_empty(self) -> bool:
        return self.parent.shape[0] == 1

    def children_counts(self) -> np.ndarray:
        if self._nchild is None:
            nc = np.bincount(self.parent[1:], minlength=self.n_vertices).astype(np.int32)
            nc.setflags(write=False)
            self._nchild = nc
        return self._nchild

    @property
    def is_planted(self) -> bool:
        return self.is_empty or self.children_counts()[0] == 1

    @property
    def is_reduced(self) -> bool:
        nc = self.children_counts()
        return not np.any(nc[1:] == 1)

    def leaf_count(self) -> int:
        if self.is_empty:
            return 0
        return int(np.count_nonzero(self.children_counts() == 0))

    def edge_count(self) -> int:
        return self.n_edges

    # -- structure helpers ------------------------------------------------ #

    def gen_starts(self) -> np.ndarray:
        """Offsets of BFS levels: vertices of depth g are gen[g]:gen[g+1]."""
        if self._gen_starts is None:
            self._gen_starts = _gen_starts_from_parent(self.parent)
            self._gen_starts.setflags(write=False)
        return self._gen_starts

    def children_table(self):
        """(order, starts): vertex ids grouped by parent, CSR layout."""
        n = self.n_vertices
        order = np.argsort(self.parent[1:], kind="stable").astype(np.int64) + 1
        starts = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.parent[1:], minlength=n), out=starts[1:])
        return order, starts

    def subtree_edge_counts(self) -> np.ndarray:
        """Number of edges of the descendant tree of every vertex."""
        n = self.n_vertices
        sizes = np.zeros(n, dtype=np.int64)
        gs = self.gen_starts()
        for g in range(len(gs) - 2, 0, -1):
            seg = slice(gs[g], gs[g + 1])
            np.add.at(sizes, self.parent[seg], sizes[seg] + 1)
        return sizes

    # -- shape identity ---------------------------------------------------- #

    def canonical_code(self) -> bytes:
        """AHU-style code; equal codes iff trees are isomorphic.

        Children are ordered by (subtree edge count, code lexicographic),
        which is deterministic and independent of input sibling order.
        """
        if self._code is None:
            self._code = _canonical_code(self)
        return self._code

    def horton_strahler_order(self) -> int:
        return _horton_order(self)

    def __eq__(self, other):
        if not isinstance(other, CombinatorialTree) or isinstance(other, MetricTree) != isinstance(self, MetricTree):
            return NotImplemented
        return self.canonical_code() == other.canonical_code()

    def __hash__(self):
        return hash(self.canonical_code())

    def __repr__(self):
        return f"{type(self).__name__}(vertices={self.n_vertices}, edges={self.n_edges})"

    @staticmethod
    def empty() -> "CombinatorialTree":
        return CombinatorialTree(np.array([-1], dtype=np.int32), validate=False)


class MetricTree(CombinatorialTree):
    """Rooted tree with strictly positive real edge lengths."""

    __slots__ = ("length",)

    def __init__(self, parent, length, *, validate: bool = True, gen_starts=None):
        parent = np.ascontiguousarray(parent, dtype=np.int32)
        length = np.ascontiguousarray(length, dtype=np.float64)
        if parent.shape != length.shape:
            raise ValueError("parent and length arrays must have equal shape")
        if validate:
            parent, order = _bfs_normalize(parent)
            length = length[order]
            gen_starts = None
            if parent.shape[0] > 1:
                if not np.all(np.isfinite(length[1:])) or np.any(length[1:] <= 0.0):
                    raise ValueError("edge lengths must be finite and > 0")
        length = np.ascontiguousarray(length)
        length[0] = 0.0
        CombinatorialTree.__init__(self, parent, validate=False, gen_starts=gen_starts)
        self.length = length
        self.length.setflags(write=False)

    def shape(self) -> CombinatorialTree:
        return CombinatorialTree(self.parent, validate=False, gen_starts=self._gen_starts)

    def depths(self) -> np.ndarray:
        """Distance from the root to every vertex."""
        d = self.length.copy()
        gs = self.gen_starts()
        for g in range(2, len(gs) - 1):
            seg = slice(gs[g], gs[g + 1])
            d[seg] += d[self.parent[seg]]
        return d

    def tree_height(self) -> float:
        if self.is_empty:
            return 0.0
        return float(self.depths().max())

    def tree_length(self) -> float:
        return float(self.length[1:].sum())

    def __eq__(self, other):
        if not isinstance(other, MetricTree):
            return NotImplemented
        return almost_isometric(self, other, atol=0.0)

    def __hash__(self):
        return hash(self.canonical_code())

    @staticmethod
    def empty() -> "MetricTree":
        return MetricTree(
            np.array([-1], dtype=np.int32), np.array([0.0]), validate=False
        )


# --------------------------------------------------------------------- #
# Normalization and code construction                                     #
# --------------------------------------------------------------------- #


def _bfs_normalize(parent: np.ndarray):
    """Relabel vertices breadth-first; return (new_parent, old_order).

    Validates that the array encodes exactly one root and a connected
    acyclic parent structure.
    """
    n = parent.shape[0]
    roots = np.flatnonzero(parent < 0)
    if len(roots) != 1:
        raise ValueError(f"expected exactly one root, found {len(roots)}")
    if np.any(parent >= n):
        raise ValueError("parent index out of range")
    root = int(roots[0])
    order = np.empty(n, dtype=np.int64)
    new_id = np.full(n, -1, dtype=np.int64)
    order[0] = root
    new_id[root] = 0
    # children adjacency
    ch_order = np.argsort(parent, kind="stable")
    ch_starts = np.zeros(n + 2, dtype=np.int64)
    counts = np.bincount(parent[parent >= 0], minlength=n)
    ch_starts[2:] = np.cumsum(counts)
    ch_starts += 1  # skip the root's own -1 entry
    head, tail = 0, 1
    while head < tail:
        v = order[head]
        kids = ch_order[ch_starts[v + 1]: ch_starts[v + 2]]
        nk = len(kids)
        if nk:
            order[tail: tail + nk] = kids
            new_id[kids] = np.arange(tail, tail + nk)
            tail += nk
        head += 1
    if tail != n:
        raise ValueError("parent structure is not a connected tree")
    new_parent = np.empty(n, dtype=np.int32)
    new_parent[0] = -1
    new_parent[1:] = new_id[parent[order[1:]]]
    return new_parent, order


def _gen_starts_from_parent(parent: np.ndarray) -> np.ndarray:
    n = parent.shape[0]
    depth = np.zeros(n, dtype=np.int64)
    for i in range(1, n):
        depth[i] = depth[parent[i]] + 1
    # BFS layout => depth is nondecreasing
    nlev = depth[-1] + 1 if n else 1
    starts = np.searchsorted(depth, np.arange(nlev + 1))
    return starts.astype(np.int64)


def _canonical_code(t: CombinatorialTree) -> bytes:
    if t.is_empty:
        return b"()"
    n = t.n_vertices
    sizes = t.subtree_edge_counts()
    order, starts = t.children_table()
    codes: list = [None] * n
    gs = t.gen_starts()
    for g in range(len(gs) - 2, -1, -1):
        for v in range(int(gs[g]), int(gs[g + 1])):
            kids = order[starts[v]: starts[v + 1]]
            if len(kids) == 0:
                codes[v] = b"()"
            else:
                parts = sorted((codes[c] for c in kids), key=lambda b: (len(b), b))
                codes[v] = b"(" + b"".join(parts) + b")"
    # sorting by (len, lexicographic) equals (edge count, code) because the
    # code of a k-edge subtree always has exactly 2k+2 bytes
    return codes[0]


def _horton_order(t: CombinatorialTree) -> int:
    """Horton-Strahler order; 0 for the empty tree.

    Defined through iterated leaf pruning: for a planted tree, the minimal
    number of prunings that give the empty tree; stemless trees get the
    +1 adjustment.  Computed by the standard vertex recursion (leaf order 1;
    a vertex takes the max child order, +1 when at least two children attain
    the max).
    """
    if t.is_empty:
        return 0
    n = t.n_vertices
    o = np.ones(n, dtype=np.int64)
    top = np.zeros(n, dtype=np.int64)   # max child order so far
    tie = np.zeros(n, dtype=np.int64)   # how many children attain it
    parent = t.parent
    for v in range(n - 1, 0, -1):
        if top[v]:
            o[v] = top[v] + (1 if tie[v] >= 2 else 0)
        p = parent[v]
        if o[v] > top[p]:
            top[p] = o[v]
            tie[p] = 1
        elif o[v] == top[p]:
            tie[p] += 1
    if top[0]:
        o[0] = top[0] + (1 if tie[0] >= 2 else 0)
    nc = t.children_counts()
    if nc[0] == 1:
        return int(o[1])     # planted: order of the stem's upper vertex
    return int(o[0])         # stemless


# --------------------------------------------------------------------- #
# Module-level operations                                                 #
# --------------------------------------------------------------------- #


def shape(t: MetricTree) -> CombinatorialTree:
    """Forget edge lengths."""
    return t.shape()


def tree_height(t: MetricTree) -> float:
    return t.tree_height()


def tree_length(t: MetricTree) -> float:
    return t.tree_length()


def edge_count(t: CombinatorialTree) -> int:
    return t.n_edges


def leaf_count(t: CombinatorialTree) -> int:
    return t.leaf_count()


def horton_strahler_order(t: CombinatorialTree) -> int:
    return t.horton_strahler_order()


def canonical_code(t: CombinatorialTree) -> bytes:
    return t.canonical_code()


def series_reduce(t):
    """Merge maximal chains through non-root degree-two vertices.

    Lengths of merged edges add exactly (floating-point addition of the
    chain, in root-to-leaf order).  Idempotent; preserves total length and
    height.  Works on both tree kinds; empty input returns the input.
    """
    metric = isinstance(t, MetricTree)
    if t.is_empty or t.is_reduced:
        return t
    n = t.n_vertices
    parent = t.parent
    nc = t.children_counts()
    real = nc != 1
    real_arr = np.asarray(real)
    real_arr[0] = True
    anchor = np.empty(n, dtype=np.int64)
    anchor[0] = 0
    if metric:
        acc = t.length.copy()
    new_id = np.full(n, -1, dtype=np.int64)
    new_id[0] = 0
    nxt = 1
    new_parent = [np.int32(-1)]
    new_length = [0.0]
    for v in range(1, n):
        p = parent[v]
        if real_arr[p]:
            anchor[v] = new_id[p]
        else:
            anchor[v] = anchor[p]
            if metric:
                acc[v] += acc[p]
        if real_arr[v]:
            new_id[v] = nxt
            nxt += 1
            new_parent.append(np.int32(anchor[v]))
            if metric:
                new_length.append(acc[v])
    parent_out = np.array(new_parent, dtype=np.int32)
    if metric:
        return MetricTree(parent_out, np.array(new_length), validate=True)
    return CombinatorialTree(parent_out, validate=True)


def descendant_subtree(t: MetricTree, x: TreePoint) -> MetricTree:
    """Subtree of all points descendant to ``x``, re-rooted at ``x``.

    * ``x`` = root: the whole tree.
    * ``x`` = a leaf tip: the empty tree.
    * ``x`` inside an edge: planted tree whose stem is the remaining upper
      part of that edge.
    * ``x`` = an internal vertex: stemless tree (the vertex with all of its
      descendant subtrees).
    """
    if not isinstance(t, MetricTree):
        raise TypeError("descendant_subtree expects a MetricTree")
    v = int(x.edge)
    if v < 0 or v >= t.n_vertices:
        raise ValueError(f"point names vertex {v}, outside the tree")
    stem = None
    if x.offset is not None:
        elen = float(t.length[v]) if v > 0 else 0.0
        if v == 0:
            raise ValueError("the root has no parent edge")
        if not (0.0 <= x.offset <= elen):
            raise ValueError(f"offset {x.offset} outside [0, {elen}]")
        if x.offset == 0.0:
            v = int(t.parent[v])          # the point is the lower endpoint
        elif x.offset < elen:
            stem = elen - x.offset
    if v == 0 and stem is None:
        return t
    nc = t.children_counts()
    if nc[v] == 0 and stem is None:
        return MetricTree.empty()
    # gather descendants of v (including v) in BFS order
    order, starts = t.children_table()
    idx = [v]
    head = 0
    while head < len(idx):
        w = idx[head]
        idx.extend(order[starts[w]: starts[w + 1]].tolist())
        head += 1
    old = np.asarray(idx, dtype=np.int64)
    new_of = {int(o): i for i, o in enumerate(old)}
    parent = np.empty(len(old) + (1 if stem is not None else 0), dtype=np.int32)
    length = np.zeros_like(parent, dtype=np.float64)
    off = 0
    if stem is not None:
        # cut point becomes the root; v hangs below it by the partial edge
        parent[0] = -1
        off = 1
    for i, o in enumerate(old):
        parent[i + off] = -1 if i == 0 else new_of[int(t.parent[o])] + off
        length[i + off] = 0.0 if i == 0 else t.length[o]
    if stem is not None:
        parent[1] = 0
        length[1] = stem
        parent[0] = -1
    return MetricTree(parent, length, validate=True)


def almost_isometric(t1: MetricTree, t2: MetricTree, atol: float = 1e-9) -> bool:
    """Whether two metric trees coincide as rooted metric spaces within atol.

    Shapes must match exactly (canonical codes); edge lengths are compared
    after aligning siblings canonically, with near-equal lengths paired by
    sorting inside each identical-shape group.  Intended for test-style
    comparisons where genuine length differences are far above ``atol``.
    """
    if t1.canonical_code() != t2.canonical_code():
        return False
    s1 = _length_signature(t1)
    s2 = _length_signature(t2)
    if len(s1) != len(s2):
        return False
    return all(abs(a - b) <= atol for a, b in zip(s1, s2))


def _length_signature(t: MetricTree):
    """Canonical traversal of edge lengths, aligned by shape code.

    Children with equal codes are ordered by their length vectors, so two
    isometric trees produce the same sequence up to floating-point noise.
    """
    n = t.n_vertices
    order, starts = t.children_table()
    code: list = [None] * n
    lens: list = [None] * n
    gs = t.gen_starts()
    for g in range(len(gs) - 2, -1, -1):
        for v in range(int(gs[g]), int(gs[g + 1])):
            kids = order[starts[v]: starts[v + 1]]
            sub = sorted(
                ((code[c], lens[c]) for c in kids),
                key=lambda p: (len(p[0]), p[0], p[1]),
            )
            code[v] = b"(" + b"".join(c for c, _ in sub) + b")"
            own = (float(t.length[v]),) if v else ()
            lens[v] = own + tuple(x for _, ls in sub for x in ls)
    return lens[0]
