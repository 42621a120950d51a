"""Deterministic lockstep executor and memory cost model.

Runs a kernel under a plan, enforces race-freedom instead of assuming it,
verifies nothing silently falls outside the plan's staging lists, and counts
global-memory traffic in cache-line transactions.

Access model (the brute-force oracle in the tests re-derives this):

* Every array is its own address space; byte address of element ``e``,
  component ``c`` is ``(e*comps + c) * itemsize`` for ``aos`` storage and
  ``(c*size + e) * itemsize`` for ``soa``.  Bases are aligned to the
  hardware's ``base_alignment``, so line ids are ``addr // line_bytes``.
* A warp instruction is one (slot, component) access executed by up to 32
  consecutive threads; it costs one transaction per distinct line touched.
* Global-colouring launches run one colour range with the configured block
  width; thread ``t`` of a launch sits in warp ``(t // S, (t % S) // 32)``.
* Hierarchical blocks stage indirectly read data (policy permitting) with a
  block-wide copy loop over the ascending staged point list: one parallel
  loop over points for ``soa`` arrays (components walked inside), a single
  collapsed loop over (point, component) pairs for ``aos`` arrays, chunked
  32 entries per warp instruction either way.  Write-back walks the written
  point list the same way.
* Incrementing global memory is a read-modify-write: it counts one read and
  one write transaction per line, on both strategies.
* Each hierarchical block additionally reads its offset and working-thread
  count: two one-line loads per warp of the launch width.

Enabling wide transfers never changes transaction counts; it only divides
the reported copy-loop instruction count for eligible ``aos`` arrays.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, KernelSpecError, RaceError
from .hardware import HardwareDescriptor
from .kernelspec import KernelSpec
from .mesh import DataArray, Mesh
from .plan import (
    MAPPING_ENTRY_BYTES,
    GlobalPlan,
    HierarchicalPlan,
    written_refs,
)


def count_cache_lines(addresses, line_bytes: int = 32) -> int:
    """Distinct line-aligned windows touched by a set of byte addresses."""
    addresses = np.asarray(addresses, dtype=np.int64)
    if addresses.size == 0:
        return 0
    return len(np.unique(addresses // line_bytes))


@dataclass(frozen=True)
class OccupancyEstimate:
    blocks_per_sm: int
    occupancy: float
    fault: str | None = None


def estimate_occupancy(
    threads_per_block: int,
    shared_bytes: int,
    regs_per_thread: int,
    hw: HardwareDescriptor,
) -> OccupancyEstimate:
    """Resident blocks per multiprocessor and the warp-rounded occupancy.

    Registers are allocated per warp, rounded up to the hardware allocation
    granularity.  A block that exceeds any single-block limit yields
    occupancy 0 with a fault message.
    """
    if threads_per_block < 1 or regs_per_thread < 1 or shared_bytes < 0:
        raise ValueError("occupancy inputs must be positive")
    warps = -(-threads_per_block // hw.warp_size)
    regs_per_warp = -(-regs_per_thread * hw.warp_size // hw.reg_alloc_granularity) * hw.reg_alloc_granularity
    regs_per_block = warps * regs_per_warp

    fault = None
    if threads_per_block > hw.max_threads_per_block:
        fault = f"block of {threads_per_block} threads exceeds the {hw.max_threads_per_block}-thread limit"
    elif regs_per_thread > hw.max_registers_per_thread:
        fault = f"{regs_per_thread} registers/thread exceeds the {hw.max_registers_per_thread} limit"
    elif shared_bytes > hw.shared_bytes_per_sm:
        fault = f"{shared_bytes} shared bytes exceed the {hw.shared_bytes_per_sm}-byte limit"
    elif regs_per_block > hw.registers_per_sm:
        fault = f"{regs_per_block} registers/block exceed the {hw.registers_per_sm}/SM limit"
    if fault:
        return OccupancyEstimate(0, 0.0, fault)

    blocks = min(
        hw.max_blocks_per_sm,
        hw.max_threads_per_sm // threads_per_block,
        hw.max_warps_per_sm // warps,
        hw.registers_per_sm // regs_per_block,
    )
    if shared_bytes > 0:
        blocks = min(blocks, hw.shared_bytes_per_sm // shared_bytes)
    blocks = max(blocks, 0)
    occupancy = blocks * warps * hw.warp_size / hw.max_threads_per_sm
    return OccupancyEstimate(int(blocks), float(occupancy), None)


def wide_transfer_model(enabled: bool, components: int, itemsize: int) -> int:
    """Entries one lane moves per copy-loop trip (1 = scalar transfers).

    Wide 16-byte transfers apply to element-contiguous staging only, when the
    per-element byte footprint divides into 16-byte chunks.
    """
    if not enabled:
        return 1
    group = 16 // itemsize
    if group <= 1 or components % group:
        return 1
    return group


class _TransactionCounter:
    """Accumulates distinct-lines-per-warp-instruction counts."""

    def __init__(self, line_bytes: int):
        self.line_bytes = line_bytes
        self.reads = 0
        self.writes = 0

    def _count(self, lines: np.ndarray, warp: np.ndarray) -> int:
        # lines: (n, instructions); warp: (n,) group per row
        if lines.size == 0:
            return 0
        n_instr = lines.shape[1] if lines.ndim == 2 else 1
        lines = lines.reshape(len(warp), n_instr)
        span = int(lines.max()) + 1
        instr = np.arange(n_instr, dtype=np.int64)
        keys = (warp[:, None] * n_instr + instr) * span + lines
        return len(np.unique(keys))

    def add(self, lines, warp, read: bool, write: bool) -> int:
        n = self._count(np.asarray(lines, dtype=np.int64), np.asarray(warp, dtype=np.int64))
        if read:
            self.reads += n
        if write:
            self.writes += n
        return n


def _addr_lines(points: np.ndarray, comps: int, size: int, itemsize: int, layout: str, line_bytes: int) -> np.ndarray:
    """(n, comps) line ids of all components of the given elements."""
    points = points.astype(np.int64)
    c = np.arange(comps, dtype=np.int64)
    if layout == "aos":
        addr = (points[..., None] * comps + c) * itemsize
    else:
        addr = (c * size + points[..., None]) * itemsize
    return addr // line_bytes


def _check_outputs(kernel: KernelSpec, mesh: Mesh, outputs: dict, batch: int) -> None:
    expected = {}
    for a in kernel.args:
        if a.mode == "increment":
            arr = mesh.data[a.array]
            expected[a.name] = ((batch, len(kernel.arg_slots(mesh, a)), arr.components), arr.values.dtype)
        elif a.mode == "write":
            arr = mesh.data[a.array]
            expected[a.name] = ((batch, arr.components), arr.values.dtype)
    if set(outputs) != set(expected):
        raise KernelSpecError(
            f"kernel {kernel.name!r} returned outputs {sorted(outputs)}, expected {sorted(expected)}"
        )
    for name, (shape, dtype) in expected.items():
        out = outputs[name]
        if not isinstance(out, np.ndarray) or out.shape != shape or out.dtype != dtype:
            raise KernelSpecError(
                f"kernel {kernel.name!r} output {name!r}: expected {shape} of {dtype}, "
                f"got {getattr(out, 'shape', None)} of {getattr(out, 'dtype', None)}"
            )


def _gather_inputs(kernel: KernelSpec, mesh: Mesh, lo: int, hi: int) -> dict:
    inputs = {}
    for a in kernel.args:
        if a.mode != "read":
            continue
        arr = mesh.data[a.array]
        if a.indirect:
            m = mesh.mappings[a.mapping]
            slots = list(kernel.arg_slots(mesh, a))
            gathered = arr.view2d()[m.table[lo:hi][:, slots]]
            gathered.setflags(write=False)
            inputs[a.name] = gathered
        else:
            inputs[a.name] = arr.view2d()[lo:hi]
    return inputs


def _writable_outputs(kernel: KernelSpec, mesh: Mesh) -> dict:
    out = {}
    for a in kernel.args:
        if a.mode in ("write", "increment") and a.array not in out:
            out[a.array] = np.array(mesh.data[a.array].view2d())  # writable copy
    return out


def _result_mesh(mesh: Mesh, out2d: dict) -> Mesh:
    arrays = []
    for name, v2d in out2d.items():
        arr = mesh.data[name]
        values = v2d.ravel() if arr.layout == "aos" else v2d.T.ravel()
        arrays.append(DataArray(arr.name, arr.set, arr.components, values, arr.layout))
    return mesh.with_data(*arrays)


def execute_serial(mesh: Mesh, kernel: KernelSpec) -> Mesh:
    """Canonical oracle: elements in index order, increments applied in order.

    Kernels never read arrays they increment, so one vectorised evaluation
    plus an ordered scatter-add reproduces the element-at-a-time loop
    exactly (bitwise for integer data).
    """
    kernel.validate_against(mesh)
    n = mesh.sets[kernel.iter_set_name(mesh)].size
    out2d = _writable_outputs(kernel, mesh)
    if n:
        inputs = _gather_inputs(kernel, mesh, 0, n)
        outputs = kernel.fn(inputs)
        _check_outputs(kernel, mesh, outputs, n)
        _apply_outputs(kernel, mesh, out2d, outputs, 0, n)
    return _result_mesh(mesh, out2d)


def _apply_outputs(kernel: KernelSpec, mesh: Mesh, out2d: dict, outputs: dict, lo: int, hi: int) -> None:
    for a in kernel.args:
        if a.mode == "increment":
            m = mesh.mappings[a.mapping]
            slots = list(kernel.arg_slots(mesh, a))
            idx = m.table[lo:hi][:, slots].ravel()
            inc = outputs[a.name].reshape(-1, mesh.data[a.array].components)
            np.add.at(out2d[a.array], idx, inc)
        elif a.mode == "write":
            out2d[a.array][lo:hi] = outputs[a.name]


def _check_colour_races(plan_mesh: Mesh, kernel: KernelSpec, groups: np.ndarray, what: str) -> None:
    """Fault when two distinct elements of one group write a common point."""
    indptr, indices, _, _ = written_refs(plan_mesh, kernel)
    elems = np.repeat(np.arange(len(groups), dtype=np.int64), np.diff(indptr))
    if len(elems) == 0:
        return
    keys = groups[elems] * np.int64(indices.max() + 1 if len(indices) else 1) + indices
    order = np.lexsort((elems, keys))
    k_sorted = keys[order]
    e_sorted = elems[order]
    dup = np.flatnonzero((k_sorted[1:] == k_sorted[:-1]) & (e_sorted[1:] != e_sorted[:-1]))
    if len(dup):
        i = dup[0]
        a, b = int(e_sorted[i]), int(e_sorted[i + 1])
        raise RaceError(
            f"{what}: elements {a} and {b} share group {int(groups[a])} but write a common point"
        )


@dataclass
class MetricsReport:
    """Counted cost-model metrics for one kernel invocation.

    ``bandwidth_proxy`` is useful bytes over modelled moved bytes
    (transactions x line size); it is a deterministic stand-in for measured
    bandwidth, never GB/s.  ``temp_array_bytes`` and ``atomic_ops`` size the
    temporary-array and atomics alternatives for comparison.
    """

    strategy: str
    n_elements: int
    num_launches: int
    read_transactions: int
    write_transactions: int
    block_colours: int
    warp_efficiency: float
    occupancy_estimate: float
    blocks_per_sm: int
    bandwidth_proxy: float
    temp_array_bytes: int
    atomic_ops: int
    reuse_factor: float | None = None
    thread_colours_max: int | None = None
    thread_colours_mean: float | None = None
    sync_count: int = 0
    sync_counts: np.ndarray | None = None
    cache_lines_per_block: float | None = None
    shared_bytes_max: int = 0
    staging_instructions: int | None = None
    num_blocks: int = 0

    @property
    def total_transactions(self) -> int:
        return self.read_transactions + self.write_transactions

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, (np.integer,)):
                return int(v)
            if isinstance(v, (np.floating,)):
                return float(v)
            return v

        data = {k: clean(v) for k, v in self.__dict__.items()}
        data["total_transactions"] = self.total_transactions
        return data


def _useful_bytes(kernel: KernelSpec, mesh: Mesh) -> int:
    total = 0
    seen = set()
    for a in kernel.args:
        if a.array in seen:
            continue
        seen.add(a.array)
        arr = mesh.data[a.array]
        weight = 2 if a.mode == "increment" else 1
        total += weight * arr.set.size * arr.components * arr.values.dtype.itemsize
    for name in kernel.mapping_names():
        m = mesh.mappings[name]
        total += m.from_set.size * m.arity * MAPPING_ENTRY_BYTES
    return total


def _alt_strategy_costs(kernel: KernelSpec, mesh: Mesh) -> tuple[int, int]:
    """Footprints of the two classical race-avoidance alternatives."""
    temp_bytes = 0
    atomic_ops = 0
    n = mesh.sets[kernel.iter_set_name(mesh)].size
    for a in kernel.increment_args:
        arr = mesh.data[a.array]
        slots = len(kernel.arg_slots(mesh, a))
        temp_bytes += n * slots * arr.components * arr.values.dtype.itemsize
        atomic_ops += n * slots * arr.components
    return temp_bytes, atomic_ops


def _warp_of_launch_threads(n_threads: int, block_width: int, warp_size: int) -> tuple[np.ndarray, int]:
    """Warp ids of launch threads 0..n-1 plus the total warp count."""
    t = np.arange(n_threads, dtype=np.int64)
    wpb = -(-block_width // warp_size)
    warp = (t // block_width) * wpb + (t % block_width) // warp_size
    full_blocks = n_threads // block_width
    tail = n_threads - full_blocks * block_width
    total = full_blocks * wpb + (-(-tail // warp_size) if tail else 0)
    return warp, total


def execute_global(plan: GlobalPlan, kernel: KernelSpec) -> tuple[Mesh, MetricsReport]:
    """Run the colour launches of a global plan; oracle-equal by construction.

    Race-freedom of every colour is asserted up front (before any output is
    produced); within a colour, increments are applied in ascending thread
    order so float results are deterministic run to run.
    """
    if kernel.signature_key() != plan.kernel_key:
        raise KernelSpecError("plan was built for a different kernel signature")
    mesh = plan.mesh
    kernel.validate_against(mesh)
    n = int(plan.colour_offsets[-1])

    colour_of = np.empty(n, dtype=np.int64)
    for c in range(plan.num_colours):
        lo, hi = plan.colour_range(c)
        colour_of[lo:hi] = c
    _check_colour_races(mesh, kernel, colour_of, "global colouring")

    counter = _TransactionCounter(plan.hw.cache_line_bytes)
    S = plan.config.block_size
    warp_size = plan.hw.warp_size
    active_threads = 0
    total_warps = 0
    total_blocks = 0
    out2d = _writable_outputs(kernel, mesh)

    for c in range(plan.num_colours):
        lo, hi = plan.colour_range(c)
        count = hi - lo
        if count == 0:
            continue
        elems = np.arange(lo, hi, dtype=np.int64)
        warp, n_warps = _warp_of_launch_threads(count, S, warp_size)
        active_threads += count
        total_warps += n_warps
        total_blocks += -(-count // S)

        for name in kernel.mapping_names():
            m = mesh.mappings[name]
            lines = _addr_lines(elems, m.arity, n, MAPPING_ENTRY_BYTES, plan.mapping_layout, counter.line_bytes)
            counter.add(lines, warp, read=True, write=False)

        for a in kernel.args:
            arr = mesh.data[a.array]
            itemsize = arr.values.dtype.itemsize
            if not a.indirect:
                lines = _addr_lines(elems, arr.components, arr.set.size, itemsize, "soa", counter.line_bytes)
                counter.add(lines, warp, read=a.mode == "read", write=a.mode == "write")
            else:
                m = mesh.mappings[a.mapping]
                slots = list(kernel.arg_slots(mesh, a))
                pts = m.table[lo:hi][:, slots]
                lines = _addr_lines(pts, arr.components, arr.set.size, itemsize, arr.layout, counter.line_bytes)
                lines = lines.reshape(count, -1)
                if a.mode == "read":
                    counter.add(lines, warp, read=True, write=False)
                else:  # increment: global read-modify-write
                    counter.add(lines, warp, read=True, write=True)

        inputs = _gather_inputs(kernel, mesh, lo, hi)
        outputs = kernel.fn(inputs)
        _check_outputs(kernel, mesh, outputs, count)
        _apply_outputs(kernel, mesh, out2d, outputs, lo, hi)

    temp_bytes, atomic_ops = _alt_strategy_costs(kernel, mesh)
    occ = estimate_occupancy(S, 0, kernel.regs_per_thread, plan.hw)
    useful = _useful_bytes(kernel, mesh)
    total_tx = counter.reads + counter.writes
    report = MetricsReport(
        strategy="global",
        n_elements=n,
        num_launches=plan.num_colours,
        read_transactions=counter.reads,
        write_transactions=counter.writes,
        block_colours=plan.num_colours,
        warp_efficiency=(active_threads / (warp_size * total_warps)) if total_warps else 1.0,
        occupancy_estimate=occ.occupancy,
        blocks_per_sm=occ.blocks_per_sm,
        bandwidth_proxy=(useful / (total_tx * counter.line_bytes)) if total_tx else 0.0,
        temp_array_bytes=temp_bytes,
        atomic_ops=atomic_ops,
        num_blocks=total_blocks,
    )
    return _result_mesh(mesh, out2d), report


def _block_of_elements(plan: HierarchicalPlan) -> np.ndarray:
    return np.repeat(np.arange(plan.num_blocks, dtype=np.int64), np.diff(plan.block_offsets))


def _check_hier_races(plan: HierarchicalPlan, kernel: KernelSpec) -> None:
    mesh = plan.mesh
    block_of = _block_of_elements(plan)
    # thread level: same block, same thread colour, common written point
    groups = block_of * np.int64(max(int(plan.thread_colour_counts.max(initial=0)), 1) + 1) + plan.thread_colours
    _check_colour_races(mesh, kernel, groups, "thread colouring")
    # block level: same block colour, overlapping written point lists
    for set_name, (indptr, ids) in plan.written.items():
        counts = np.diff(indptr)
        blk = np.repeat(np.arange(plan.num_blocks, dtype=np.int64), counts)
        colours = plan.block_colours.colours[blk]
        if len(ids) == 0:
            continue
        keys = colours * np.int64(ids.max() + 1) + ids
        order = np.lexsort((blk, keys))
        k_sorted = keys[order]
        b_sorted = blk[order]
        dup = np.flatnonzero((k_sorted[1:] == k_sorted[:-1]) & (b_sorted[1:] != b_sorted[:-1]))
        if len(dup):
            i = dup[0]
            raise RaceError(
                f"block colouring: blocks {int(b_sorted[i])} and {int(b_sorted[i + 1])} share a colour "
                f"but write a common point of set {set_name!r}"
            )


def _staged_copy_counts(plan, counter, arrays, csr, read, write, instr_acc):
    """Transactions + loop trips for block-wide copy loops over point lists."""
    wide = plan.config.wide_transfers
    for arr in arrays:
        comps = arr.components
        itemsize = arr.values.dtype.itemsize
        indptr, ids = csr[arr.set.name]
        if len(ids) == 0:
            continue
        block_of = np.repeat(np.arange(len(indptr) - 1, dtype=np.int64), np.diff(indptr))
        pos = np.arange(len(ids), dtype=np.int64) - indptr[block_of]
        if arr.layout == "soa":
            for c in range(comps):
                lines = ((np.int64(c) * arr.set.size + ids) * itemsize) // counter.line_bytes
                warp = block_of * (np.int64(len(ids)) + 32) + pos // 32
                counter.add(lines[:, None], warp, read=read, write=write)
            per_block = np.diff(indptr)
            instr_acc[0] += int(comps * np.sum(-(-per_block // 32)))
        else:
            c = np.arange(comps, dtype=np.int64)
            flat_pos = (pos[:, None] * comps + c).ravel()
            flat_ids = np.repeat(ids, comps)
            flat_c = np.tile(c, len(ids))
            lines = ((flat_ids * comps + flat_c) * itemsize) // counter.line_bytes
            warp = np.repeat(block_of, comps) * (np.int64(len(flat_pos)) + 32) + flat_pos // 32
            counter.add(lines[:, None], warp, read=read, write=write)
            group = wide_transfer_model(wide, comps, itemsize)
            per_block = np.diff(indptr) * comps
            instr_acc[0] += int(np.sum(-(-per_block // (32 * group))))


def colour_loop_efficiency(colours_by_block, warp_size: int = 32) -> float:
    """Mean active-lane fraction across the increment colour loop.

    For every (block, colour) round, only that colour's threads are active;
    the proxy is total active lanes over lanes in every warp the round
    touches.  Sorting threads by colour packs rounds into fewer warps, so
    the sorted layout never scores lower.
    """
    active = 0
    slots = 0
    for colours in colours_by_block:
        colours = np.asarray(colours)
        if len(colours) == 0:
            continue
        warps = np.arange(len(colours)) // warp_size
        for c in np.unique(colours):
            mask = colours == c
            active += int(mask.sum())
            slots += warp_size * len(np.unique(warps[mask]))
    return active / slots if slots else 1.0


def execute_hierarchical(plan: HierarchicalPlan, kernel: KernelSpec) -> tuple[Mesh, MetricsReport]:
    """Run the block launches of a hierarchical plan.

    Per block and block colour: stage, compute into per-thread increments,
    zero the shared increment region, apply increments one thread colour at
    a time, write back.  Both colouring levels are checked for races before
    any output is produced; staged lists are checked to cover every indirect
    access, and per-block shared bytes are re-derived and checked against
    the limit.
    """
    if kernel.signature_key() != plan.kernel_key:
        raise KernelSpecError("plan was built for a different kernel signature")
    mesh = plan.mesh
    kernel.validate_against(mesh)
    n = int(plan.block_offsets[-1])
    nb = plan.num_blocks
    hw = plan.hw
    S = plan.config.block_size
    if nb and int(np.diff(plan.block_offsets).max()) > S:
        raise CapacityError("plan contains a block wider than the configured block size")

    _check_hier_races(plan, kernel)
    if nb and int(plan.shared_bytes.max()) > hw.shared_bytes_per_sm:
        b = int(plan.shared_bytes.argmax())
        raise CapacityError(
            f"block {b} needs {int(plan.shared_bytes[b])} shared bytes, over the {hw.shared_bytes_per_sm}-byte limit"
        )

    staged_arg_names = (
        kernel.indirect_args if plan.config.staging == "all-indirect" else kernel.increment_args
    )
    staged_read_arrays = []
    seen = set()
    if plan.config.staging == "all-indirect":
        for a in kernel.indirect_read_args:
            if a.array not in seen:
                seen.add(a.array)
                staged_read_arrays.append(mesh.data[a.array])
    inc_arrays = []
    seen = set()
    for a in kernel.increment_args:
        if a.array not in seen:
            seen.add(a.array)
            inc_arrays.append(mesh.data[a.array])

    # staged coverage check: every indirect access must resolve to a staged slot
    for a in staged_arg_names:
        m = mesh.mappings[a.mapping]
        slots = list(kernel.arg_slots(mesh, a))
        for b in range(nb):
            lo, hi = plan.block_range(b)
            pts = np.unique(m.table[lo:hi][:, slots])
            plan.staged_slots(m.to_set.name, b, pts)

    counter = _TransactionCounter(hw.cache_line_bytes)
    instr_acc = [0]
    _staged_copy_counts(plan, counter, staged_read_arrays, plan.staged, read=True, write=False, instr_acc=instr_acc)
    _staged_copy_counts(plan, counter, inc_arrays, plan.written, read=True, write=True, instr_acc=instr_acc)

    block_of = _block_of_elements(plan)
    elems = np.arange(n, dtype=np.int64)
    pos_in_block = elems - plan.block_offsets[block_of]
    wpb = -(-S // hw.warp_size)
    warp = block_of * wpb + pos_in_block // hw.warp_size

    # per-thread overhead: block offset + working-thread count, once per launch warp
    launch_warps = nb * wpb
    counter.reads += 2 * launch_warps

    for name in kernel.mapping_names():
        m = mesh.mappings[name]
        lines = _addr_lines(elems, m.arity, n, MAPPING_ENTRY_BYTES, plan.mapping_layout, counter.line_bytes)
        counter.add(lines, warp, read=True, write=False)

    for a in kernel.args:
        arr = mesh.data[a.array]
        itemsize = arr.values.dtype.itemsize
        if not a.indirect:
            lines = _addr_lines(elems, arr.components, arr.set.size, itemsize, "soa", counter.line_bytes)
            counter.add(lines, warp, read=a.mode == "read", write=a.mode == "write")
        elif a.mode == "read" and plan.config.staging == "increment-only":
            m = mesh.mappings[a.mapping]
            slots = list(kernel.arg_slots(mesh, a))
            pts = m.table[:, slots]
            lines = _addr_lines(pts, arr.components, arr.set.size, itemsize, arr.layout, counter.line_bytes)
            counter.add(lines.reshape(n, -1), warp, read=True, write=False)

    out2d = _writable_outputs(kernel, mesh)
    order = np.lexsort((np.arange(nb), plan.block_colours.colours)) if nb else np.empty(0, dtype=np.int64)
    for b in order:
        b = int(b)
        lo, hi = plan.block_range(b)
        count = hi - lo
        inputs = _gather_inputs(kernel, mesh, lo, hi)
        outputs = kernel.fn(inputs)
        _check_outputs(kernel, mesh, outputs, count)
        tc = plan.thread_colours[lo:hi]
        n_colours = int(plan.thread_colour_counts[b])
        shared = {}
        for a in kernel.increment_args:
            arr = mesh.data[a.array]
            m = mesh.mappings[a.mapping]
            slots = list(kernel.arg_slots(mesh, a))
            indptr, ids = plan.staged[arr.set.name]
            staged_count = int(indptr[b + 1] - indptr[b])
            key = a.array
            if key not in shared:
                shared[key] = np.zeros((staged_count, arr.components), dtype=arr.values.dtype)
            local = plan.staged_slots(arr.set.name, b, m.table[lo:hi][:, slots])
            inc = outputs[a.name]
            for c in range(n_colours):
                mask = tc == c
                if not mask.any():
                    continue
                np.add.at(
                    shared[key],
                    local[mask].ravel(),
                    inc[mask].reshape(-1, arr.components),
                )
        for a in kernel.args:
            if a.mode == "write":
                out2d[a.array][lo:hi] = outputs[a.name]
        for arr in inc_arrays:
            w_indptr, w_ids = plan.written[arr.set.name]
            wl, wh = int(w_indptr[b]), int(w_indptr[b + 1])
            wr = w_ids[wl:wh]
            if len(wr) == 0:
                continue
            slots_of = plan.staged_slots(arr.set.name, b, wr)
            out2d[arr.name][wr] += shared[arr.name][slots_of]

    sync_counts = plan.thread_colour_counts + 2
    temp_bytes, atomic_ops = _alt_strategy_costs(kernel, mesh)
    shared_max = int(plan.shared_bytes.max()) if nb else 0
    occ = estimate_occupancy(S, shared_max, kernel.regs_per_thread, hw)
    useful = _useful_bytes(kernel, mesh)
    total_tx = counter.reads + counter.writes

    from .plan import reuse_factor as _reuse

    colours_by_block = [plan.thread_colours[plan.block_range(b)[0] : plan.block_range(b)[1]] for b in range(nb)]
    report = MetricsReport(
        strategy="hier",
        n_elements=n,
        num_launches=plan.block_colours.num_colours,
        read_transactions=counter.reads,
        write_transactions=counter.writes,
        block_colours=plan.block_colours.num_colours,
        warp_efficiency=colour_loop_efficiency(colours_by_block, hw.warp_size),
        occupancy_estimate=occ.occupancy,
        blocks_per_sm=occ.blocks_per_sm,
        bandwidth_proxy=(useful / (total_tx * counter.line_bytes)) if total_tx else 0.0,
        temp_array_bytes=temp_bytes,
        atomic_ops=atomic_ops,
        reuse_factor=_reuse(plan),
        thread_colours_max=int(plan.thread_colour_counts.max()) if nb else 0,
        thread_colours_mean=float(plan.thread_colour_counts.mean()) if nb else 0.0,
        sync_count=int(sync_counts.sum()) if nb else 0,
        sync_counts=sync_counts,
        cache_lines_per_block=_indirect_lines_per_block(plan, kernel),
        shared_bytes_max=shared_max,
        staging_instructions=instr_acc[0],
        num_blocks=nb,
    )
    return _result_mesh(mesh, out2d), report


def _indirect_lines_per_block(plan: HierarchicalPlan, kernel: KernelSpec) -> float | None:
    """Mean distinct indirect-data lines a block touches in global memory."""
    mesh = plan.mesh
    nb = plan.num_blocks
    if nb == 0:
        return None
    totals = np.zeros(nb, dtype=np.int64)
    seen = set()
    for a in kernel.indirect_args:
        if a.array in seen:
            continue
        seen.add(a.array)
        arr = mesh.data[a.array]
        itemsize = arr.values.dtype.itemsize
        m = mesh.mappings[a.mapping]
        slots = list(kernel.arg_slots(mesh, a))
        for b in range(nb):
            lo, hi = plan.block_range(b)
            pts = np.unique(m.table[lo:hi][:, slots])
            lines = _addr_lines(pts, arr.components, arr.set.size, itemsize, arr.layout, plan.hw.cache_line_bytes)
            totals[b] += len(np.unique(lines))
    return float(totals.mean())
