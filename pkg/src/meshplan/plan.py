"""Execution-plan assembly.

A plan fixes everything needed to run one parallel loop deterministically:
the element and point renumberings, per-array layouts, colour assignments,
and (for the block-parallel strategy) block extents, per-block staging lists
and shared-storage budgets.

Two strategies exist.  The *global* plan colours elements so equal colours
write disjoint points and reorders them colour-contiguously; each colour is
one launch.  The *hierarchical* plan groups elements into thread-block-sized
blocks (by chunking, by graph partitioning, or by handcrafted structured
blocks), colours blocks against each other and threads within blocks, sorts
threads by colour, and precomputes the per-block staging index that backs
the shared-storage model.
"""

import json
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .colouring import (
    ColourAssignment,
    _dedup_rows,
    _relabel_by_load,
)
from . import _accel
from .errors import CapacityError, FileFormatError, KernelSpecError, MeshValidationError
from .hardware import HardwareDescriptor, P100
from .kernelspec import KernelSpec
from .mesh import Mesh, transform_layout, validate_mesh, apply_permutation
from .partition import (
    Partition,
    PartitionConfig,
    build_thread_graph,
    chunk_partition,
    compute_effective_block_size,
    partition_kway,
    partition_structured_hex,
)
from .permutation import Permutation
from .reorder import (
    first_touch_renumber,
    gps_renumber,
    lex_sort_elements,
    mesh_to_graph,
    reorder_points_by_writer_sets,
)

_PLAN_MAGIC = "meshplan-plan 1"

STRATEGIES = ("global", "hier")
REORDER_MODES = ("none", "gps", "partition")  # plus "structured:bx,by,bz" for hier
STAGING_MODES = ("all-indirect", "increment-only")


@dataclass(frozen=True)
class PlanConfig:
    """All tuning knobs recorded with a plan."""

    strategy: str = "hier"
    reorder: str = "none"
    layout: str = "aos"  # indirect data layout; direct data is always soa
    staging: str = "all-indirect"
    block_size: int = 128
    tolerance: float = 1.001
    epsilon: float = 0.5
    seed: int = 0
    unweighted_cut: bool = False
    wide_transfers: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise MeshValidationError(f"unknown strategy {self.strategy!r}")
        if self.layout not in ("aos", "soa"):
            raise MeshValidationError(f"unknown layout {self.layout!r}")
        if self.staging not in STAGING_MODES:
            raise MeshValidationError(f"unknown staging mode {self.staging!r}")
        base = self.reorder.split(":", 1)[0]
        if base not in REORDER_MODES + ("structured",):
            raise MeshValidationError(f"unknown reorder mode {self.reorder!r}")

    def partition_config(self) -> PartitionConfig:
        return PartitionConfig(
            block_size=self.block_size,
            tolerance=self.tolerance,
            epsilon=self.epsilon,
            seed=self.seed,
            unweighted_cut=self.unweighted_cut,
        )

    def structured_shape(self) -> tuple[int, int, int] | None:
        if not self.reorder.startswith("structured"):
            return None
        _, _, arg = self.reorder.partition(":")
        parts = arg.replace(",", " ").split()
        if len(parts) != 3:
            raise MeshValidationError(f"structured reorder needs bx,by,bz, got {self.reorder!r}")
        return tuple(int(p) for p in parts)


# mapping tables are modelled as 4-byte entries on the device
MAPPING_ENTRY_BYTES = 4


@dataclass(frozen=True)
class GlobalPlan:
    """Colour-contiguous element ranges; one launch per colour."""

    mesh: Mesh
    kernel_key: str
    config: PlanConfig
    hw: HardwareDescriptor
    set_perms: dict
    colours: ColourAssignment
    colour_offsets: np.ndarray
    array_layouts: dict
    mapping_layout: str = "aos"

    @property
    def num_colours(self) -> int:
        return self.colours.num_colours

    def colour_range(self, c: int) -> tuple[int, int]:
        return int(self.colour_offsets[c]), int(self.colour_offsets[c + 1])

    def restore_data(self, result: Mesh) -> Mesh:
        return _restore(self, result)


@dataclass(frozen=True)
class HierarchicalPlan:
    """Blocked execution with two-level colouring and staging lists.

    ``staged``/``written`` map a to-set name to a CSR pair ``(indptr, ids)``
    over blocks; ``ids`` are ascending per block, and the shared-slot index
    of a global point is its position in the block's staged list.
    """

    mesh: Mesh
    kernel_key: str
    config: PlanConfig
    hw: HardwareDescriptor
    set_perms: dict
    block_offsets: np.ndarray
    block_colours: ColourAssignment
    thread_colours: np.ndarray
    thread_colour_counts: np.ndarray
    staged: dict
    written: dict
    shared_bytes: np.ndarray
    refs_per_element: int
    partition_meta: dict = field(default_factory=dict)
    array_layouts: dict = field(default_factory=dict)
    mapping_layout: str = "soa"

    @property
    def num_blocks(self) -> int:
        return len(self.block_offsets) - 1

    def block_range(self, b: int) -> tuple[int, int]:
        return int(self.block_offsets[b]), int(self.block_offsets[b + 1])

    def working_threads(self) -> np.ndarray:
        return np.diff(self.block_offsets)

    def staged_slots(self, set_name: str, block: int, points: np.ndarray) -> np.ndarray:
        """shared_ind: map global point ids to the block's staged slots."""
        indptr, ids = self.staged[set_name]
        lo, hi = indptr[block], indptr[block + 1]
        block_ids = ids[lo:hi]
        if len(block_ids) == 0:
            if len(points) == 0:
                return np.empty(0, dtype=np.int64)
            raise CapacityError(f"block {block}: nothing staged on set {set_name!r} but accesses exist")
        slots = np.searchsorted(block_ids, points)
        if np.any(slots >= len(block_ids)) or np.any(block_ids[np.minimum(slots, len(block_ids) - 1)] != points):
            raise CapacityError(
                f"block {block}: access to a point missing from its staging list on set {set_name!r}"
            )
        return slots

    def restore_data(self, result: Mesh) -> Mesh:
        return _restore(self, result)


def reuse_factor(plan: HierarchicalPlan) -> float:
    """Mean indirect references per distinct staged point.

    Sum over blocks of (block size x indirect slots per element) divided by
    the total staged-point count; >= 1 whenever anything is staged.
    """
    staged_total = sum(int(indptr[-1]) for indptr, _ in plan.staged.values())
    if staged_total == 0:
        return 1.0
    n = int(plan.block_offsets[-1])
    return plan.refs_per_element * n / staged_total


def _namespaced_refs(mesh: Mesh, kernel: KernelSpec, args) -> tuple[np.ndarray, dict, int]:
    """Stack the (set, point) references of the given args per element.

    Returns ``(rows, set_offsets, total_points)`` where ``rows`` is an
    ``(n_elems, total_slots)`` table of namespaced point ids.
    """
    set_offsets = {}
    total = 0
    for a in args:
        to = mesh.mappings[a.mapping].to_set
        if to.name not in set_offsets:
            set_offsets[to.name] = total
            total += to.size
    cols = []
    for a in args:
        m = mesh.mappings[a.mapping]
        slots = list(kernel.arg_slots(mesh, a))
        cols.append(m.table[:, slots] + set_offsets[m.to_set.name])
    if not cols:
        n = mesh.sets[kernel.iter_set_name(mesh)].size
        return np.empty((n, 0), dtype=np.int64), set_offsets, total
    return np.hstack(cols), set_offsets, total


def written_refs(mesh: Mesh, kernel: KernelSpec):
    """Per-element distinct written (set, point) references, namespaced CSR."""
    rows, offsets, total = _namespaced_refs(mesh, kernel, kernel.increment_args)
    indptr, indices = _dedup_rows(rows)
    return indptr, indices, offsets, max(total, 1)


def _colour_elements(mesh: Mesh, kernel: KernelSpec, chooser="least-loaded") -> ColourAssignment:
    indptr, indices, _, total = written_refs(mesh, kernel)
    colours = _accel.greedy_colour_csr(indptr, indices, total, chooser == "least-loaded")
    if len(colours) == 0:
        return ColourAssignment(colours, 0, np.empty(0, dtype=np.int64))
    num = int(colours.max()) + 1
    return _relabel_by_load(colours, num) if chooser == "least-loaded" else ColourAssignment.from_colours(colours)


def _colour_blocks_ns(indptr, indices, offsets_blocks) -> ColourAssignment:
    """Block colouring over namespaced written refs grouped per block."""
    nb = len(offsets_blocks) - 1
    seg_indptr = np.zeros(nb + 1, dtype=np.int64)
    seg_vals = []
    for b in range(nb):
        lo, hi = offsets_blocks[b], offsets_blocks[b + 1]
        vals = np.unique(indices[indptr[lo] : indptr[hi]])
        seg_vals.append(vals)
        seg_indptr[b + 1] = seg_indptr[b] + len(vals)
    merged = np.concatenate(seg_vals) if seg_vals else np.empty(0, dtype=np.int64)
    total_pts = 1
    if len(merged):
        total_pts = int(merged.max()) + 1
    colours = _accel.greedy_colour_csr(seg_indptr, merged, total_pts, True)
    num = int(colours.max()) + 1 if len(colours) else 0
    return _relabel_by_load(colours, num) if num else ColourAssignment(colours, 0, np.empty(0, dtype=np.int64))


def _thread_colours_for_block(w_indptr, w_indices, lo, hi) -> np.ndarray:
    """Smallest-last greedy colouring of one block's conflict graph."""
    k = hi - lo
    owners = np.repeat(np.arange(k, dtype=np.int64), np.diff(w_indptr[lo : hi + 1]))
    points = w_indices[w_indptr[lo] : w_indptr[hi]]
    if len(points) == 0:
        return np.zeros(k, dtype=np.int64)
    order = np.argsort(points, kind="stable")
    pts_sorted = points[order]
    owners_sorted = owners[order]
    # segment boundaries where the point id changes
    seg_starts = np.flatnonzero(np.concatenate(([True], pts_sorted[1:] != pts_sorted[:-1])))
    seg_indptr = np.concatenate((seg_starts, [len(pts_sorted)])).astype(np.int64)
    us, vs = _accel.pairs_from_segments(seg_indptr, owners_sorted)
    if len(us):
        keys = np.unique(us * np.int64(k) + vs)
        us, vs = keys // k, keys % k
    src = np.concatenate([us, vs])
    dst = np.concatenate([vs, us])
    adj_order = np.lexsort((dst, src))
    src, dst = src[adj_order], dst[adj_order]
    adj_indptr = np.zeros(k + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=k), out=adj_indptr[1:])
    order = _accel.smallest_last_order(adj_indptr, dst)
    return _accel.greedy_colour_adj(adj_indptr, dst, order, False)


def _reorder_for_plan(mesh: Mesh, kernel: KernelSpec, config: PlanConfig):
    """Apply the configured renumberings.

    Returns ``(mesh, set_perms, partition, partition_meta)`` where the
    partition (when present) is expressed in the new element numbering and
    is block-contiguous.
    """
    iter_set = kernel.iter_set_name(mesh)
    n = mesh.sets[iter_set].size
    set_perms = {name: Permutation.identity(s.size) for name, s in mesh.sets.items()}
    indirect_args = kernel.indirect_args
    mode = config.reorder.split(":", 1)[0]
    partition = None
    partition_meta = {}

    def apply_point_perm(mesh, set_name, perm):
        set_perms[set_name] = set_perms[set_name].then(perm)
        return apply_permutation(mesh, set_name, perm)

    def apply_elem_perm(mesh, perm):
        set_perms[iter_set] = set_perms[iter_set].then(perm)
        return apply_permutation(mesh, iter_set, perm)

    def renumber_secondary(mesh, elem_perm, primary_to_set):
        seen = {primary_to_set, iter_set}
        for a in indirect_args:
            m = mesh.mappings[a.mapping]
            if m.to_set.name in seen:
                continue
            seen.add(m.to_set.name)
            mesh = apply_point_perm(mesh, m.to_set.name, first_touch_renumber(m, elem_perm))
        return mesh

    if mode in ("gps", "partition") and not indirect_args:
        mode = "none"  # nothing to reorder against

    if mode == "gps":
        designated = mesh.mappings[indirect_args[0].mapping]
        point_perm = gps_renumber(mesh_to_graph(designated))
        elem_perm = lex_sort_elements(designated, point_perm)
        mesh = apply_point_perm(mesh, designated.to_set.name, point_perm)
        mesh = apply_elem_perm(mesh, elem_perm)
        mesh = renumber_secondary(mesh, elem_perm, designated.to_set.name)
    elif mode == "partition":
        mappings = [mesh.mappings[name] for name in kernel.mapping_names()]
        graph = build_thread_graph(mappings)
        part = partition_kway(graph, config.partition_config())
        order = np.lexsort((np.arange(n), part.assignment))
        elem_perm = Permutation.from_order(order.astype(np.int64))
        designated = mesh.mappings[indirect_args[0].mapping]
        point_perm = reorder_points_by_writer_sets(designated, part.assignment)
        mesh = apply_point_perm(mesh, designated.to_set.name, point_perm)
        mesh = apply_elem_perm(mesh, elem_perm)
        mesh = renumber_secondary(mesh, elem_perm, designated.to_set.name)
        partition = Partition(
            assignment=part.assignment[elem_perm.inverse],
            num_blocks=part.num_blocks,
            over_tolerance=part.over_tolerance,
            cut=part.cut,
        )
        partition_meta = {
            "num_blocks": part.num_blocks,
            "cut": part.cut,
            "over_tolerance": part.over_tolerance,
            "imbalance": part.imbalance(),
        }
    elif mode == "structured":
        shape = config.structured_shape()
        family = mesh.meta.get("family", "")
        dims = mesh.meta.get("dims", "")
        if family not in ("hex3d-nodes", "hex3d-faces") or not dims:
            raise MeshValidationError(
                "structured reorder needs a generated hex mesh with family/dims metadata"
            )
        dims = tuple(int(v) for v in str(dims).split())
        target = "cells-nodes" if family == "hex3d-nodes" else "faces-cells"
        part = partition_structured_hex(dims, shape, target)
        if len(part.assignment) != n:
            raise MeshValidationError("structured partition does not match the iteration set")
        order = np.lexsort((np.arange(n), part.assignment))
        elem_perm = Permutation.from_order(order.astype(np.int64))
        mesh = apply_elem_perm(mesh, elem_perm)
        partition = Partition(
            assignment=part.assignment[elem_perm.inverse],
            num_blocks=part.num_blocks,
            meta=part.meta,
        )
        partition_meta = {"num_blocks": part.num_blocks, "block_shape": list(shape)}
    elif mode != "none":
        raise MeshValidationError(f"unknown reorder mode {config.reorder!r}")

    return mesh, set_perms, partition, partition_meta


def _apply_layouts(mesh: Mesh, kernel: KernelSpec, config: PlanConfig) -> tuple[Mesh, dict]:
    indirect_arrays = {a.array for a in kernel.indirect_args}
    direct_arrays = {a.array for a in kernel.direct_args}
    both = indirect_arrays & direct_arrays
    if both:
        raise KernelSpecError(f"arrays accessed both directly and indirectly: {sorted(both)}")
    arrays = []
    layouts = {}
    for name, arr in mesh.data.items():
        if name in indirect_arrays:
            arrays.append(transform_layout(arr, config.layout))
            layouts[name] = config.layout
        elif name in direct_arrays:
            arrays.append(transform_layout(arr, "soa"))
            layouts[name] = "soa"
        else:
            layouts[name] = arr.layout
    return mesh.with_data(*arrays), layouts


def _check_valid(mesh: Mesh, kernel: KernelSpec) -> None:
    report = validate_mesh(mesh)
    if not report.valid:
        raise MeshValidationError(f"invalid mesh:\n{report}")
    kernel.validate_against(mesh)


def build_global_plan(
    mesh: Mesh,
    kernel: KernelSpec,
    config: PlanConfig | None = None,
    hw: HardwareDescriptor = P100,
) -> GlobalPlan:
    """Reorder, colour and range-split the element loop for per-colour launches."""
    config = config or PlanConfig(strategy="global")
    if config.strategy != "global":
        config = replace(config, strategy="global")
    if config.reorder.startswith("structured"):
        raise MeshValidationError("structured blocks only apply to the hierarchical strategy")
    _check_valid(mesh, kernel)

    mesh2, set_perms, _, _ = _reorder_for_plan(mesh, kernel, config)
    colours = _colour_elements(mesh2, kernel)
    n = len(colours.colours)
    if n:
        order = np.argsort(colours.colours, kind="stable").astype(np.int64)
        perm = Permutation.from_order(order)
        mesh2 = apply_permutation(mesh2, kernel.iter_set_name(mesh2), perm)
        iter_set = kernel.iter_set_name(mesh2)
        set_perms[iter_set] = set_perms[iter_set].then(perm)
        sorted_colours = colours.colours[order]
        offsets = np.zeros(colours.num_colours + 1, dtype=np.int64)
        np.cumsum(np.bincount(sorted_colours, minlength=colours.num_colours), out=offsets[1:])
        colours = ColourAssignment(sorted_colours, colours.num_colours, colours.counts)
    else:
        offsets = np.zeros(1, dtype=np.int64)

    mesh2, layouts = _apply_layouts(mesh2, kernel, config)
    return GlobalPlan(
        mesh=mesh2,
        kernel_key=kernel.signature_key(),
        config=config,
        hw=hw,
        set_perms=set_perms,
        colours=colours,
        colour_offsets=offsets,
        array_layouts=layouts,
    )


def _split_oversized(offsets: list[int], limit: int) -> list[int]:
    """Split any block span wider than ``limit`` at its midpoint, repeatedly."""
    out = [offsets[0]]
    for end in offsets[1:]:
        start = out[-1]
        pending = [(start, end)]
        while pending:
            lo, hi = pending.pop(0)
            if hi - lo > limit:
                mid = lo + (hi - lo + 1) // 2
                pending = [(lo, mid), (mid, hi)] + pending
            else:
                out.append(hi)
    return out


def build_hierarchical_plan(
    mesh: Mesh,
    kernel: KernelSpec,
    config: PlanConfig | None = None,
    hw: HardwareDescriptor = P100,
) -> HierarchicalPlan:
    """Block, two-level colour, thread-sort and stage the element loop.

    The reorder mode picks the blocking: ``none``/``gps`` chunk the (possibly
    renumbered) element order into full-width blocks, ``partition`` uses the
    k-way partitioner, ``structured:bx,by,bz`` uses handcrafted hex blocks.
    Oversized blocks are split in half until they fit the configured block
    size; per-block staged bytes are checked against the hardware limit.
    """
    config = config or PlanConfig(strategy="hier")
    if config.strategy != "hier":
        config = replace(config, strategy="hier")
    _check_valid(mesh, kernel)
    compute_effective_block_size(config.partition_config())  # reject unsatisfiable configs

    mesh2, set_perms, partition, partition_meta = _reorder_for_plan(mesh, kernel, config)
    iter_set = kernel.iter_set_name(mesh2)
    n = mesh2.sets[iter_set].size

    if partition is None:
        partition = chunk_partition(n, config.block_size)

    sizes = partition.block_sizes()
    offsets = [0]
    for b in range(partition.num_blocks):
        offsets.append(offsets[-1] + int(sizes[b]))
    if offsets[-1] != n:
        raise MeshValidationError("partition does not cover the iteration set")
    offsets = _split_oversized(offsets, config.block_size)
    block_offsets = np.asarray(offsets, dtype=np.int64)
    nb = len(block_offsets) - 1

    # written refs drive all colouring
    w_indptr, w_indices, _, _ = written_refs(mesh2, kernel)
    block_colours = _colour_blocks_ns(w_indptr, w_indices, block_offsets)

    thread_colours = np.zeros(n, dtype=np.int64)
    thread_counts = np.zeros(nb, dtype=np.int64)
    elem_order = np.arange(n, dtype=np.int64)
    for b in range(nb):
        lo, hi = int(block_offsets[b]), int(block_offsets[b + 1])
        tc = _thread_colours_for_block(w_indptr, w_indices, lo, hi)
        intra = np.argsort(tc, kind="stable")
        elem_order[lo:hi] = lo + intra
        thread_colours[lo:hi] = tc[intra]
        thread_counts[b] = tc.max() + 1 if len(tc) else 0

    sort_perm = Permutation.from_order(elem_order)
    if not sort_perm.is_identity():
        mesh2 = apply_permutation(mesh2, iter_set, sort_perm)
        set_perms[iter_set] = set_perms[iter_set].then(sort_perm)

    # staging lists on the final numbering
    staged_args = kernel.indirect_args if config.staging == "all-indirect" else kernel.increment_args
    staged = _per_block_point_lists(mesh2, kernel, staged_args, block_offsets)
    written = _per_block_point_lists(mesh2, kernel, kernel.increment_args, block_offsets)

    shared_bytes = np.zeros(nb, dtype=np.int64)
    staged_sets = {mesh2.mappings[a.mapping].to_set.name for a in staged_args}
    for set_name in staged_sets:
        indptr, _ = staged[set_name]
        per_point = 0
        counted = set()
        for a in staged_args:
            if mesh2.mappings[a.mapping].to_set.name != set_name or a.array in counted:
                continue
            counted.add(a.array)
            arr = mesh2.data[a.array]
            per_point += arr.components * arr.values.dtype.itemsize
        shared_bytes += np.diff(indptr) * per_point

    limit = hw.shared_bytes_per_sm
    if nb and shared_bytes.max() > limit:
        b = int(shared_bytes.argmax())
        raise CapacityError(
            f"block {b} needs {int(shared_bytes[b])} shared bytes, over the {limit}-byte limit"
        )

    refs_per_element = 0
    seen_maps = set()
    for a in kernel.indirect_args:
        if a.mapping in seen_maps:
            continue
        seen_maps.add(a.mapping)
        slots = set()
        for other in kernel.indirect_args:
            if other.mapping == a.mapping:
                slots.update(kernel.arg_slots(mesh2, other))
        refs_per_element += len(slots)

    mesh2, layouts = _apply_layouts(mesh2, kernel, config)
    return HierarchicalPlan(
        mesh=mesh2,
        kernel_key=kernel.signature_key(),
        config=config,
        hw=hw,
        set_perms=set_perms,
        block_offsets=block_offsets,
        block_colours=block_colours,
        thread_colours=thread_colours,
        thread_colour_counts=thread_counts,
        staged=staged,
        written=written,
        shared_bytes=shared_bytes,
        refs_per_element=refs_per_element,
        partition_meta=partition_meta,
        array_layouts=layouts,
    )


def _per_block_point_lists(mesh: Mesh, kernel: KernelSpec, args, block_offsets) -> dict:
    """Distinct (ascending) point ids per block, per to-set, CSR over blocks."""
    nb = len(block_offsets) - 1
    out = {}
    by_set: dict[str, list] = {}
    for a in args:
        by_set.setdefault(mesh.mappings[a.mapping].to_set.name, []).append(a)
    for set_name, set_args in by_set.items():
        cols = []
        for a in set_args:
            m = mesh.mappings[a.mapping]
            cols.append(m.table[:, list(kernel.arg_slots(mesh, a))])
        rows = np.hstack(cols)
        indptr = np.zeros(nb + 1, dtype=np.int64)
        ids_parts = []
        for b in range(nb):
            lo, hi = int(block_offsets[b]), int(block_offsets[b + 1])
            ids = np.unique(rows[lo:hi])
            ids_parts.append(ids)
            indptr[b + 1] = indptr[b] + len(ids)
        out[set_name] = (indptr, np.concatenate(ids_parts) if ids_parts else np.empty(0, dtype=np.int64))
    return out


def _restore(plan, result: Mesh) -> Mesh:
    """Map a plan-ordered result mesh back to the original numbering.

    Layouts are left as the plan chose them; value comparisons and file
    output go through per-element views, so only the numbering matters here.
    """
    mesh = result
    for set_name, perm in plan.set_perms.items():
        if not perm.is_identity():
            mesh = apply_permutation(mesh, set_name, perm.inverted())
    return mesh


def mesh_fingerprint(mesh: Mesh) -> dict:
    """Structure-only fingerprint used to pair plans with meshes."""
    return {
        "sets": {s.name: s.size for s in mesh.sets.values()},
        "mappings": {
            m.name: [m.from_set.name, m.to_set.name, m.arity, zlib.crc32(np.ascontiguousarray(m.table).tobytes())]
            for m in mesh.mappings.values()
        },
        "data": {a.name: [a.set.name, a.components, a.elem_type] for a in mesh.data.values()},
    }


def _perm_dict(set_perms: dict) -> dict:
    return {name: perm.forward.tolist() for name, perm in set_perms.items() if not perm.is_identity()}


def plan_to_dict(plan) -> dict:
    """Lossless JSON form of a plan (mesh itself excluded; see load_plan)."""
    base = {
        "format": _PLAN_MAGIC,
        "strategy": plan.config.strategy,
        "config": {
            "strategy": plan.config.strategy,
            "reorder": plan.config.reorder,
            "layout": plan.config.layout,
            "staging": plan.config.staging,
            "block_size": plan.config.block_size,
            "tolerance": plan.config.tolerance,
            "epsilon": plan.config.epsilon,
            "seed": plan.config.seed,
            "unweighted_cut": plan.config.unweighted_cut,
            "wide_transfers": plan.config.wide_transfers,
        },
        "hw": plan.hw.to_dict(),
        "kernel_key": plan.kernel_key,
        "set_perms": _perm_dict(plan.set_perms),
        "array_layouts": dict(plan.array_layouts),
    }
    if isinstance(plan, GlobalPlan):
        base["global"] = {
            "colours": plan.colours.colours.tolist(),
            "num_colours": plan.colours.num_colours,
            "colour_offsets": plan.colour_offsets.tolist(),
        }
    else:
        base["hier"] = {
            "block_offsets": plan.block_offsets.tolist(),
            "block_colours": plan.block_colours.colours.tolist(),
            "num_block_colours": plan.block_colours.num_colours,
            "thread_colours": plan.thread_colours.tolist(),
            "thread_colour_counts": plan.thread_colour_counts.tolist(),
            "staged": {k: {"indptr": v[0].tolist(), "ids": v[1].tolist()} for k, v in plan.staged.items()},
            "written": {k: {"indptr": v[0].tolist(), "ids": v[1].tolist()} for k, v in plan.written.items()},
            "shared_bytes": plan.shared_bytes.tolist(),
            "refs_per_element": plan.refs_per_element,
            "partition_meta": plan.partition_meta,
        }
    return base


def save_plan(plan, path, mesh: Mesh | None = None) -> None:
    data = plan_to_dict(plan)
    if mesh is not None:
        data["mesh_fingerprint"] = mesh_fingerprint(mesh)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_plan(path, mesh: Mesh):
    """Rebuild a plan against the mesh it was made for."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except ValueError as exc:
            raise FileFormatError(f"{path}: bad plan JSON: {exc}") from None
    if data.get("format") != _PLAN_MAGIC:
        raise FileFormatError(f"{path}: not a meshplan plan file")
    fp = data.get("mesh_fingerprint")
    if fp is not None and fp != mesh_fingerprint(mesh):
        raise MeshValidationError(f"{path}: plan was built for a different mesh")

    config = PlanConfig(**data["config"])
    hw = HardwareDescriptor.from_dict(data["hw"])
    set_perms = {name: Permutation.identity(s.size) for name, s in mesh.sets.items()}
    mesh2 = mesh
    for name, forward in data["set_perms"].items():
        perm = Permutation.from_forward(np.asarray(forward, dtype=np.int64))
        set_perms[name] = perm
        mesh2 = apply_permutation(mesh2, name, perm)
    layouts = data["array_layouts"]
    arrays = [transform_layout(arr, layouts.get(name, arr.layout)) for name, arr in mesh2.data.items()]
    mesh2 = mesh2.with_data(*arrays)

    if "global" in data:
        g = data["global"]
        colours = np.asarray(g["colours"], dtype=np.int64)
        ca = ColourAssignment(
            colours, g["num_colours"], np.bincount(colours, minlength=g["num_colours"])
        )
        return GlobalPlan(
            mesh=mesh2,
            kernel_key=data["kernel_key"],
            config=config,
            hw=hw,
            set_perms=set_perms,
            colours=ca,
            colour_offsets=np.asarray(g["colour_offsets"], dtype=np.int64),
            array_layouts=layouts,
        )
    h = data["hier"]
    bc = np.asarray(h["block_colours"], dtype=np.int64)
    return HierarchicalPlan(
        mesh=mesh2,
        kernel_key=data["kernel_key"],
        config=config,
        hw=hw,
        set_perms=set_perms,
        block_offsets=np.asarray(h["block_offsets"], dtype=np.int64),
        block_colours=ColourAssignment(
            bc, h["num_block_colours"], np.bincount(bc, minlength=h["num_block_colours"])
        ),
        thread_colours=np.asarray(h["thread_colours"], dtype=np.int64),
        thread_colour_counts=np.asarray(h["thread_colour_counts"], dtype=np.int64),
        staged={
            k: (np.asarray(v["indptr"], dtype=np.int64), np.asarray(v["ids"], dtype=np.int64))
            for k, v in h["staged"].items()
        },
        written={
            k: (np.asarray(v["indptr"], dtype=np.int64), np.asarray(v["ids"], dtype=np.int64))
            for k, v in h["written"].items()
        },
        shared_bytes=np.asarray(h["shared_bytes"], dtype=np.int64),
        refs_per_element=h["refs_per_element"],
        partition_meta=h["partition_meta"],
        array_layouts=layouts,
    )
