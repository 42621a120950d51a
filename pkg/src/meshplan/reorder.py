"""Locality-oriented renumbering of mesh points and elements.

The point renumbering walks the point-connectivity graph breadth-first
between two distant endpoints so that BFS levels become contiguous index
ranges; elements are then ordered lexicographically by their renumbered
points so neighbouring threads touch nearby data.  A partition-aware point
reordering groups points by the set of blocks that reference them.
"""

from dataclasses import dataclass

import numpy as np

from . import _accel
from .mesh import Mapping
from .permutation import Permutation


@dataclass(frozen=True)
class PointGraph:
    """Undirected graph in CSR form: symmetric, sorted, no self-loops."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray

    def __post_init__(self):
        for name in ("indptr", "indices"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_edges(cls, n: int, us, vs) -> "PointGraph":
        """Build from endpoint arrays; duplicates and self-loops are dropped."""
        us = np.asarray(us, dtype=np.int64)
        vs = np.asarray(vs, dtype=np.int64)
        if n == 0:
            empty = np.zeros(1, dtype=np.int64)
            return cls(n=0, indptr=empty, indices=np.empty(0, dtype=np.int64))
        keep = us != vs
        us, vs = us[keep], vs[keep]
        src = np.concatenate([us, vs])
        dst = np.concatenate([vs, us])
        keys = np.unique(src * np.int64(n) + dst)
        src = keys // n
        dst = keys % n
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return cls(n=n, indptr=indptr, indices=dst)

    @property
    def num_edges(self) -> int:
        return len(self.indices) // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbours(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u] : self.indptr[u + 1]]


def mesh_to_graph(m: Mapping) -> PointGraph:
    """Point-connectivity graph of a mapping.

    Every element row becomes a clique over its distinct points; the graph is
    the union of those cliques on the to-set.
    """
    n, arity = m.table.shape
    if n == 0 or arity < 2:
        return PointGraph.from_edges(m.to_set.size, [], [])
    rows = np.sort(m.table, axis=1)
    keep = np.ones_like(rows, dtype=bool)
    keep[:, 1:] = rows[:, 1:] != rows[:, :-1]  # drop duplicate points per row
    counts = keep.sum(axis=1)
    seg_indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=seg_indptr[1:])
    us, vs = _accel.pairs_from_segments(seg_indptr, rows[keep].astype(np.int64))
    return PointGraph.from_edges(m.to_set.size, us, vs)


def bandwidth(g: PointGraph, perm: Permutation | None = None) -> int:
    """``max |sigma(u) - sigma(v)|`` over edges; 0 for edgeless graphs."""
    if len(g.indices) == 0:
        return 0
    rows = np.repeat(np.arange(g.n, dtype=np.int64), np.diff(g.indptr))
    if perm is not None:
        rows = perm.forward[rows]
        cols = perm.forward[g.indices]
    else:
        cols = g.indices
    return int(np.abs(rows - cols).max())


def _pseudo_peripheral_root(g: PointGraph, comp_nodes: np.ndarray) -> int:
    """Min-degree start, then BFS to the farthest level until the
    eccentricity stops growing (ties broken by degree, then index)."""
    deg = g.degrees()
    local = comp_nodes[np.lexsort((comp_nodes, deg[comp_nodes]))]
    u = int(local[0])
    levels, _, _ = _accel.bfs_levels(g.indptr, g.indices, u)
    ecc = int(levels[comp_nodes].max())
    while True:
        last = comp_nodes[levels[comp_nodes] == ecc]
        cand = last[np.lexsort((last, deg[last]))]
        v = int(cand[0])
        v_levels, _, _ = _accel.bfs_levels(g.indptr, g.indices, v)
        v_ecc = int(v_levels[comp_nodes].max())
        if v_ecc > ecc:
            u, levels, ecc = v, v_levels, v_ecc
        else:
            return u


def gps_renumber(g: PointGraph) -> Permutation:
    """Level-structure renumbering of the point graph.

    Each connected component (taken in order of its lowest original index)
    is numbered by BFS level from a pseudo-peripheral root, so every level
    occupies a contiguous index range; within a level, nodes are ordered by
    ascending degree, then original index.  Returns ``forward[old] = new``.
    """
    n = g.n
    deg = g.degrees()
    assigned = np.zeros(n, dtype=bool)
    order_parts = []
    for start in range(n):
        if assigned[start]:
            continue
        comp_levels, comp_order, comp_size = _accel.bfs_levels(g.indptr, g.indices, start)
        comp_nodes = np.sort(comp_order[:comp_size])
        assigned[comp_nodes] = True
        if comp_size == 1:
            order_parts.append(comp_nodes)
            continue
        root = _pseudo_peripheral_root(g, comp_nodes)
        levels, _, _ = _accel.bfs_levels(g.indptr, g.indices, root)
        lv = levels[comp_nodes]
        order_parts.append(comp_nodes[np.lexsort((comp_nodes, deg[comp_nodes], lv))])
    order = np.concatenate(order_parts) if order_parts else np.empty(0, dtype=np.int64)
    return Permutation.from_order(order)


def gps_levels(g: PointGraph, perm: Permutation) -> np.ndarray:
    """Recover per-node BFS levels implied by a level-contiguous numbering.

    Helper for invariant checks: nodes are re-bucketed by BFS from the first
    node of each component in the new numbering.
    """
    levels = np.full(g.n, -1, dtype=np.int64)
    for new_start in range(g.n):
        old = perm.inverse[new_start]
        if levels[old] >= 0:
            continue
        comp_levels, comp_order, comp_size = _accel.bfs_levels(g.indptr, g.indices, int(old))
        nodes = comp_order[:comp_size]
        levels[nodes] = comp_levels[nodes]
    return levels


def lex_sort_elements(m: Mapping, point_perm: Permutation) -> Permutation:
    """Order elements by the sorted tuple of their renumbered points.

    Lexicographic over per-element sorted point tuples; stable for equal
    keys.  Returns a from-set permutation.
    """
    if m.table.shape[0] == 0:
        return Permutation.identity(0)
    keys = np.sort(point_perm.forward[m.table], axis=1)
    order = np.lexsort(tuple(keys[:, c] for c in range(keys.shape[1] - 1, -1, -1)))
    return Permutation.from_order(order.astype(np.int64))


def reorder_points_by_writer_sets(m: Mapping, assignment: np.ndarray) -> Permutation:
    """Group points by the blocks that reference them.

    Sort key per point: (number of distinct referencing blocks, the sorted
    tuple of those block ids, original index) -- so points used by a single
    block cluster by block, and multi-block points trail.  ``assignment``
    maps each from-element to its block.
    """
    assignment = np.asarray(assignment, dtype=np.int64)
    n_points = m.to_set.size
    if m.table.size:
        points = m.table.ravel()
        blocks = np.repeat(assignment, m.arity)
        pairs = np.unique(points * np.int64(assignment.max() + 1) + blocks)
        pair_points = pairs // (assignment.max() + 1)
        pair_blocks = pairs % (assignment.max() + 1)
    else:
        pair_points = np.empty(0, dtype=np.int64)
        pair_blocks = np.empty(0, dtype=np.int64)

    block_lists = [()] * n_points
    if len(pair_points):
        split_at = np.flatnonzero(np.diff(pair_points)) + 1
        for pt_group, bl_group in zip(
            np.split(pair_points, split_at), np.split(pair_blocks, split_at)
        ):
            block_lists[pt_group[0]] = tuple(bl_group.tolist())

    order = sorted(range(n_points), key=lambda p: (len(block_lists[p]), block_lists[p], p))
    return Permutation.from_order(np.asarray(order, dtype=np.int64))


def first_touch_renumber(m: Mapping, elem_perm: Permutation) -> Permutation:
    """Number to-set points by first appearance under a new element order.

    Greedy companion reordering for secondary mappings once elements have
    been reordered by a designated mapping; unreferenced points keep their
    relative order at the end.
    """
    flat = m.table[elem_perm.inverse].ravel()
    uniq, first_pos = np.unique(flat, return_index=True)
    touched = uniq[np.argsort(first_pos, kind="stable")]
    untouched = np.setdiff1d(np.arange(m.to_set.size, dtype=np.int64), uniq, assume_unique=True)
    return Permutation.from_order(np.concatenate([touched, untouched]))
