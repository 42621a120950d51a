"""Blocking of the iteration set for block-parallel execution.

Builds the element-connectivity graph (elements are adjacent when they touch
a common data point), and partitions it into thread-block-sized pieces while
minimising the weight of cut edges -- the proxy for data shared between
blocks.  The partitioner is an own-grown multilevel scheme: heavy-edge
matching coarsens the graph, recursive region-growing bisection seeds the
blocks, and boundary refinement sweeps clean up the cut while uncoarsening.

A separate constructor produces handcrafted rectangular blocks on generated
hex meshes, used to study the reuse/synchronisation trade-off with exact
control over block shape.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _accel, structured
from .errors import FileFormatError, MeshValidationError
from .mesh import Mapping

_PART_MAGIC = "meshplan-part 1"


@dataclass(frozen=True)
class ThreadGraph:
    """Element-connectivity graph in CSR form with shared-point edge weights."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        for name in ("indptr", "indices", "weights"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def num_edges(self) -> int:
        return len(self.indices) // 2


def build_thread_graph(mappings: list[Mapping]) -> ThreadGraph:
    """Connect elements that access a common to-set point.

    Edge weight counts the distinct shared data points; an element listing
    the same point in several slots contributes that point once.  All
    mappings must share the same from-set.
    """
    if not mappings:
        raise ValueError("need at least one mapping")
    from_set = mappings[0].from_set
    if any(m.from_set is not from_set for m in mappings):
        raise ValueError("all mappings must share the same from-set")
    n = from_set.size

    pair_keys = []
    by_to_set = {}
    for m in mappings:
        by_to_set.setdefault(id(m.to_set), []).append(m)
    for group in by_to_set.values():
        # distinct (point, element) references within one to-set namespace
        points = np.concatenate([m.table.ravel() for m in group])
        elems = np.concatenate(
            [np.repeat(np.arange(n, dtype=np.int64), m.arity) for m in group]
        )
        to_size = group[0].to_set.size
        refs = np.unique(points * np.int64(n) + elems)
        ref_points = refs // n
        ref_elems = refs % n
        counts = np.bincount(ref_points, minlength=to_size)
        indptr = np.zeros(to_size + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        us, vs = _accel.pairs_from_segments(indptr, ref_elems)
        if len(us):
            pair_keys.append(us * np.int64(n) + vs)

    if pair_keys:
        keys, weights = np.unique(np.concatenate(pair_keys), return_counts=True)
        us, vs = keys // n, keys % n
    else:
        us = vs = weights = np.empty(0, dtype=np.int64)

    src = np.concatenate([us, vs])
    dst = np.concatenate([vs, us])
    w = np.concatenate([weights, weights]).astype(np.int64)
    order = np.lexsort((dst, src))
    src, dst, w = src[order], dst[order], w[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    return ThreadGraph(n=n, indptr=indptr, indices=dst, weights=w)


@dataclass(frozen=True)
class PartitionConfig:
    """Requested block size plus the imbalance margins.

    ``block_size`` caps the launched block width; ``tolerance`` (>= 1) is the
    requested load-imbalance factor and ``epsilon`` a small additive margin
    that lets blocks fill up to the cap.  The partitioner works with the
    derived effective block size and tolerance.
    """

    block_size: int = 128
    tolerance: float = 1.001
    epsilon: float = 0.5
    seed: int = 0
    unweighted_cut: bool = False

    def __post_init__(self):
        if self.block_size < 1:
            raise MeshValidationError("block size must be >= 1")
        if self.tolerance < 1.0:
            raise MeshValidationError("tolerance must be >= 1")
        if self.epsilon < 0.0:
            raise MeshValidationError("epsilon must be >= 0")


def compute_effective_block_size(cfg: PartitionConfig) -> tuple[int, float]:
    """Shrunken block size and widened tolerance making room for imbalance.

    Returns ``(floor(S/l), (S + eps) / floor(S/l))``; a configuration whose
    effective block size floors to zero is unsatisfiable.
    """
    eff = int(math.floor(cfg.block_size / cfg.tolerance))
    if eff < 1:
        raise MeshValidationError(
            f"unsatisfiable config: block size {cfg.block_size} with tolerance {cfg.tolerance} floors to zero"
        )
    return eff, (cfg.block_size + cfg.epsilon) / eff


@dataclass(frozen=True)
class Partition:
    """Assignment of from-set elements to dense block ids."""

    assignment: np.ndarray
    num_blocks: int
    over_tolerance: bool = False
    cut: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        arr = np.ascontiguousarray(self.assignment, dtype=np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "assignment", arr)
        if len(arr) and (arr.min() < 0 or arr.max() >= self.num_blocks):
            raise ValueError("block ids out of range")

    def block_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.num_blocks)

    def imbalance(self) -> float:
        """Achieved imbalance: num_blocks * max block size / total elements."""
        n = len(self.assignment)
        if n == 0 or self.num_blocks == 0:
            return 1.0
        return self.num_blocks * int(self.block_sizes().max()) / n


def chunk_partition(n: int, chunk: int) -> Partition:
    """Contiguous chunks of the existing order; the no-reordering baseline."""
    if chunk < 1:
        raise ValueError("chunk size must be >= 1")
    assignment = np.arange(n, dtype=np.int64) // chunk
    return Partition(assignment=assignment, num_blocks=max(0, -(-n // chunk)))


def _contract(indptr, indices, weights, node_w, match):
    """Collapse matched pairs; returns the coarse graph and the fine->coarse map."""
    n = len(node_w)
    rep = np.minimum(np.arange(n, dtype=np.int64), match)
    reps = np.unique(rep)
    coarse_id = np.empty(n, dtype=np.int64)
    coarse_id[reps] = np.arange(len(reps), dtype=np.int64)
    cmap = coarse_id[rep]

    coarse_w = np.bincount(cmap, weights=node_w, minlength=len(reps)).astype(np.int64)

    rows = np.repeat(cmap, np.diff(indptr))
    cols = cmap[indices]
    keep = rows != cols
    rows, cols, ew = rows[keep], cols[keep], weights[keep]
    nc = len(reps)
    keys = rows * np.int64(nc) + cols
    uniq, inverse = np.unique(keys, return_inverse=True)
    summed = np.bincount(inverse, weights=ew, minlength=len(uniq)).astype(np.int64)
    rows, cols = uniq // nc, uniq % nc
    cindptr = np.zeros(nc + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=nc), out=cindptr[1:])
    return cindptr, cols, summed, coarse_w, cmap


def _grow_bisection(indptr, indices, node_w, subset, k1, k2, cap):
    """Split ``subset`` into two sides for k1 and k2 blocks by region growing."""
    total = int(node_w[subset].sum())
    lower = max(0, total - k2 * cap)
    upper = min(k1 * cap, total)
    target = min(max(int(round(total * k1 / (k1 + k2))), lower), upper)

    in_subset = np.zeros(len(node_w), dtype=bool)
    in_subset[subset] = True
    taken = np.zeros(len(node_w), dtype=bool)
    queue = []
    left = []
    w = 0
    seeds = subset  # ascending: deterministic seed order
    seed_pos = 0
    head = 0
    while w < target:
        if head >= len(queue):
            while seed_pos < len(seeds) and taken[seeds[seed_pos]]:
                seed_pos += 1
            if seed_pos >= len(seeds):
                break
            queue.append(int(seeds[seed_pos]))
            taken[seeds[seed_pos]] = True
        u = queue[head]
        head += 1
        if w + node_w[u] > upper:
            continue
        left.append(u)
        w += int(node_w[u])
        for v in indices[indptr[u] : indptr[u + 1]]:
            if in_subset[v] and not taken[v]:
                taken[v] = True
                queue.append(int(v))

    left_mask = np.zeros(len(node_w), dtype=bool)
    left_mask[np.asarray(left, dtype=np.int64)] = True
    right = subset[~left_mask[subset]]
    return np.asarray(sorted(left), dtype=np.int64), right


def _initial_partition(indptr, indices, node_w, num_blocks, cap):
    assignment = np.full(len(node_w), -1, dtype=np.int64)

    def recurse(subset, first_block, k):
        if k == 1 or len(subset) == 0:
            assignment[subset] = first_block
            return
        k1 = (k + 1) // 2
        left, right = _grow_bisection(indptr, indices, node_w, subset, k1, k - k1, cap)
        recurse(left, first_block, k1)
        recurse(right, first_block + k1, k - k1)

    recurse(np.arange(len(node_w), dtype=np.int64), 0, num_blocks)
    return assignment


def _rebalance(indptr, indices, weights, assignment, block_w, node_w, cap, use_w):
    """Deterministically push members out of over-cap blocks; best-effort."""
    num_blocks = len(block_w)
    guard = 0
    while True:
        over = np.flatnonzero(block_w > cap)
        if len(over) == 0 or guard > len(assignment) * 4:
            break
        guard += 1
        b = int(over[0])
        members = np.flatnonzero(assignment == b)
        moved = False
        for u in members:
            if block_w[b] <= cap:
                break
            # prefer a neighbouring block with room, else the lightest one
            conn = np.zeros(num_blocks, dtype=np.int64)
            for j in range(indptr[u], indptr[u + 1]):
                conn[assignment[indices[j]]] += weights[j] if use_w else 1
            conn[b] = -1
            candidates = np.flatnonzero(block_w + node_w[u] <= cap)
            candidates = candidates[candidates != b]
            if len(candidates) == 0:
                continue
            best = candidates[np.lexsort((candidates, -conn[candidates]))][0]
            assignment[u] = best
            block_w[b] -= node_w[u]
            block_w[best] += node_w[u]
            moved = True
        if not moved:
            break  # give up; caller flags over-tolerance


def partition_kway(g: ThreadGraph, cfg: PartitionConfig) -> Partition:
    """Multilevel k-way partition into ``ceil(n / effective_block_size)`` blocks.

    Coarsens by seeded heavy-edge matching, seeds blocks by recursive
    region-growing bisection, then sweeps boundary refinement while
    uncoarsening; every refinement pass is checked to never increase the
    cut.  Block sizes never exceed the configured block size; when the
    effective tolerance cannot be met the result is flagged
    ``over_tolerance`` instead of failing.
    """
    eff_size, eff_tol = compute_effective_block_size(cfg)
    n = g.n
    if n == 0:
        return Partition(assignment=np.empty(0, dtype=np.int64), num_blocks=0, cut=0)
    num_blocks = -(-n // eff_size)
    use_w = not cfg.unweighted_cut
    if num_blocks == 1:
        return Partition(assignment=np.zeros(n, dtype=np.int64), num_blocks=1, cut=0)

    cap = min(cfg.block_size, max(int(math.floor(eff_tol * n / num_blocks)), -(-n // num_blocks)))

    levels = []
    indptr, indices, weights = g.indptr, g.indices, g.weights
    node_w = np.ones(n, dtype=np.int64)
    rng = np.random.default_rng(cfg.seed)
    target_coarse = max(2 * num_blocks, 64)
    max_cluster = max(1, cap // 4)
    while len(node_w) > target_coarse:
        visit = rng.permutation(len(node_w)).astype(np.int64)
        match = _accel.heavy_edge_matching(indptr, indices, weights, node_w, visit, max_cluster)
        cindptr, cindices, cweights, cnode_w, cmap = _contract(indptr, indices, weights, node_w, match)
        if len(cnode_w) >= 0.95 * len(node_w):
            break
        levels.append((indptr, indices, weights, node_w, cmap))
        indptr, indices, weights, node_w = cindptr, cindices, cweights, cnode_w

    assignment = _initial_partition(indptr, indices, node_w, num_blocks, cap)

    def refine(indptr, indices, weights, assignment, node_w):
        block_w = np.bincount(assignment, weights=node_w, minlength=num_blocks).astype(np.int64)
        _rebalance(indptr, indices, weights, assignment, block_w, node_w, cap, use_w)
        for _ in range(8):
            before = _accel.cut_weight(indptr, indices, weights, assignment, use_w)
            moves = _accel.refine_boundary_pass(
                indptr, indices, weights, assignment, block_w, node_w, cap, use_w
            )
            after = _accel.cut_weight(indptr, indices, weights, assignment, use_w)
            if after > before:
                raise AssertionError(f"refinement increased cut: {before} -> {after}")
            if moves == 0:
                break

    refine(indptr, indices, weights, assignment, node_w)
    for findptr, findices, fweights, fnode_w, cmap in reversed(levels):
        assignment = assignment[cmap]
        indptr, indices, weights, node_w = findptr, findices, fweights, fnode_w
        refine(indptr, indices, weights, assignment, node_w)

    cut = _accel.cut_weight(g.indptr, g.indices, g.weights, assignment, use_w)
    part = Partition(assignment=assignment, num_blocks=num_blocks, cut=cut)
    if part.imbalance() > eff_tol + 1e-12 or int(part.block_sizes().max()) > cfg.block_size:
        part = Partition(assignment=assignment, num_blocks=num_blocks, cut=cut, over_tolerance=True)
    return part


def partition_structured_hex(dims, block_shape, target: str) -> Partition:
    """Handcrafted rectangular blocks on a generated hex mesh.

    ``target`` selects the iteration set: ``"cells-nodes"`` blocks the cells
    directly; ``"faces-cells"`` walks the same cell blocks and assigns each
    internal face to the block of its owner cell, so the blocks tile the
    face set.  The block shape must divide the grid exactly.
    """
    if target not in ("cells-nodes", "faces-cells"):
        raise MeshValidationError(f"unknown structured target {target!r}")
    try:
        cells = structured.hex_block_assignment(dims, block_shape)
    except ValueError as exc:
        raise MeshValidationError(str(exc)) from None
    nbx = dims[0] // block_shape[0]
    nby = dims[1] // block_shape[1]
    nbz = dims[2] // block_shape[2]
    num_blocks = nbx * nby * nbz
    meta = {"dims": tuple(dims), "block_shape": tuple(block_shape), "target": target}
    if target == "cells-nodes":
        return Partition(assignment=cells, num_blocks=num_blocks, meta=meta)
    _, owners = structured.hex_internal_faces(dims)
    return Partition(assignment=cells[owners], num_blocks=num_blocks, meta=meta)


def save_partition(part: Partition, path) -> None:
    """Write block ids one per line behind a version/header line."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(_PART_MAGIC + "\n")
        fh.write(f"blocks {part.num_blocks}\n")
        fh.write("\n".join(str(int(b)) for b in part.assignment))
        if len(part.assignment):
            fh.write("\n")


def load_partition(path) -> Partition:
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != _PART_MAGIC:
        raise FileFormatError(f"{path}: not a partition file")
    if not lines[1].startswith("blocks "):
        raise FileFormatError(f"{path}: missing blocks header")
    num_blocks = int(lines[1].split()[1])
    assignment = np.array([int(v) for v in lines[2:]], dtype=np.int64)
    return Partition(assignment=assignment, num_blocks=num_blocks)
