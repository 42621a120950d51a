"""Race-freedom colouring at element, block and intra-block thread level.

Two items conflict when they write a common to-set point (read-only slots
never race).  The global and block colourings use a greedy pass with a
least-loaded colour choice by default; thread colouring inside a block runs
greedy first-fit over a smallest-last elimination order of the conflict
graph.  Colour ids are dense and deterministic for a fixed input order.
"""

from dataclasses import dataclass

import numpy as np

from . import _accel
from .mesh import Mapping
from .partition import Partition
from .permutation import Permutation

CHOOSERS = ("least-loaded", "first-fit")


@dataclass(frozen=True)
class ColourAssignment:
    """Dense per-item colours plus per-colour item counts."""

    colours: np.ndarray
    num_colours: int
    counts: np.ndarray

    def __post_init__(self):
        for name in ("colours", "counts"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_colours(cls, colours: np.ndarray) -> "ColourAssignment":
        colours = np.asarray(colours, dtype=np.int64)
        num = int(colours.max()) + 1 if len(colours) else 0
        return cls(colours=colours, num_colours=num, counts=np.bincount(colours, minlength=num))


def normalize_slots(arity: int, written_slots=None) -> tuple[int, ...]:
    """Written-slot selector: None means all slots; accepts indices or a mask."""
    if written_slots is None:
        return tuple(range(arity))
    written_slots = list(written_slots)
    if len(written_slots) == arity and all(isinstance(s, (bool, np.bool_)) for s in written_slots):
        return tuple(i for i, flag in enumerate(written_slots) if flag)
    slots = tuple(sorted(int(s) for s in written_slots))
    if any(s < 0 or s >= arity for s in slots):
        raise ValueError(f"written slots {slots} out of range for arity {arity}")
    return slots


def _dedup_rows(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """CSR of the distinct values of each row, row order preserved."""
    if rows.size == 0:
        return np.zeros(len(rows) + 1, dtype=np.int64), np.empty(0, dtype=np.int64)
    srt = np.sort(rows, axis=1)
    keep = np.ones_like(srt, dtype=bool)
    keep[:, 1:] = srt[:, 1:] != srt[:, :-1]
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    np.cumsum(keep.sum(axis=1), out=indptr[1:])
    return indptr, srt[keep].astype(np.int64)


def _relabel_by_load(colours: np.ndarray, num: int) -> ColourAssignment:
    """Renumber colours by descending item count (ties keep old id order)."""
    counts = np.bincount(colours, minlength=num)
    order = np.lexsort((np.arange(num), -counts))
    remap = np.empty(num, dtype=np.int64)
    remap[order] = np.arange(num)
    return ColourAssignment(colours=remap[colours], num_colours=num, counts=counts[order])


def written_points_csr(m: Mapping, written_slots=None, elements=None):
    """Per-element distinct written points, CSR over the given elements."""
    slots = normalize_slots(m.arity, written_slots)
    table = m.table if elements is None else m.table[np.asarray(elements, dtype=np.int64)]
    return _dedup_rows(table[:, slots])


def colour_global(m: Mapping, written_slots=None, chooser: str = "least-loaded") -> ColourAssignment:
    """Greedy element colouring: equal colours never write a common point.

    Elements are visited in their current order; the default chooser picks
    the admissible colour with the fewest elements so far, and colour ids
    are finally renumbered by descending load.
    """
    _check_chooser(chooser)
    indptr, indices = written_points_csr(m, written_slots)
    colours = _accel.greedy_colour_csr(indptr, indices, m.to_set.size, chooser == "least-loaded")
    if len(colours) == 0:
        return ColourAssignment(colours, 0, np.empty(0, dtype=np.int64))
    num = int(colours.max()) + 1
    if chooser == "least-loaded":
        return _relabel_by_load(colours, num)
    return ColourAssignment.from_colours(colours)


def colour_blocks(part: Partition, m: Mapping, written_slots=None, chooser: str = "least-loaded") -> ColourAssignment:
    """Colour blocks so same-coloured blocks write disjoint points."""
    _check_chooser(chooser)
    slots = normalize_slots(m.arity, written_slots)
    n = m.table.shape[0]
    if len(part.assignment) != n:
        raise ValueError("partition does not cover the mapping's from-set")
    if part.num_blocks == 0:
        empty = np.empty(0, dtype=np.int64)
        return ColourAssignment(empty, 0, empty.copy())
    to_size = max(m.to_set.size, 1)
    points = m.table[:, slots].ravel()
    blocks = np.repeat(part.assignment, len(slots))
    pairs = np.unique(blocks * np.int64(to_size) + points)
    pair_blocks = pairs // to_size
    pair_points = pairs % to_size
    indptr = np.zeros(part.num_blocks + 1, dtype=np.int64)
    np.cumsum(np.bincount(pair_blocks, minlength=part.num_blocks), out=indptr[1:])
    colours = _accel.greedy_colour_csr(indptr, pair_points, to_size, chooser == "least-loaded")
    num = int(colours.max()) + 1 if len(colours) else 0
    if chooser == "least-loaded" and num:
        return _relabel_by_load(colours, num)
    return ColourAssignment.from_colours(colours)


def block_conflict_graph(block: np.ndarray, m: Mapping, written_slots=None):
    """Local conflict graph (CSR) between the block's elements."""
    block = np.asarray(block, dtype=np.int64)
    k = len(block)
    indptr, points = written_points_csr(m, written_slots, elements=block)
    # local element ids per (point, element) reference, grouped by point
    owners = np.repeat(np.arange(k, dtype=np.int64), np.diff(indptr))
    order = np.argsort(points, kind="stable")
    pts_sorted = points[order]
    owners_sorted = owners[order]
    seg_indptr = np.zeros(m.to_set.size + 1, dtype=np.int64)
    np.cumsum(np.bincount(pts_sorted, minlength=m.to_set.size), out=seg_indptr[1:])
    us, vs = _accel.pairs_from_segments(seg_indptr, owners_sorted)
    if len(us):
        keys = np.unique(us * np.int64(k) + vs)
        us, vs = keys // k, keys % k
    src = np.concatenate([us, vs])
    dst = np.concatenate([vs, us])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    adj_indptr = np.zeros(k + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=k), out=adj_indptr[1:])
    return adj_indptr, dst


def colour_threads_in_block(block, m: Mapping, written_slots=None, chooser: str = "first-fit") -> ColourAssignment:
    """Colour a block's threads over a smallest-last elimination order.

    The elimination order repeatedly removes a minimum-remaining-degree node
    of the intra-block conflict graph and places it last; greedy colouring
    in that order keeps the colour count at most degeneracy + 1.
    """
    _check_chooser(chooser)
    block = np.asarray(block, dtype=np.int64)
    if len(block) == 0:
        raise ValueError("block is empty")
    adj_indptr, adj = block_conflict_graph(block, m, written_slots)
    order = _accel.smallest_last_order(adj_indptr, adj)
    colours = _accel.greedy_colour_adj(adj_indptr, adj, order, chooser == "least-loaded")
    return ColourAssignment.from_colours(colours)


def sort_threads_by_colour(colours: ColourAssignment) -> Permutation:
    """Stable intra-block sort by colour id.

    After applying the permutation, threads of one colour occupy a
    contiguous index range; ties keep their original relative order.
    """
    order = np.argsort(colours.colours, kind="stable").astype(np.int64)
    return Permutation.from_order(order)


def _check_chooser(chooser: str) -> None:
    if chooser not in CHOOSERS:
        raise ValueError(f"unknown colour chooser {chooser!r}; expected one of {CHOOSERS}")
