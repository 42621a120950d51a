"""Command-line front end: gen / plan / run / compare.

Exit codes: 0 ok, 2 validation problem, 3 race or verification fault,
4 capacity fault, 5 I/O or file-format problem.  Faults print one
machine-readable JSON object to stderr.  Identical invocations (same files,
flags and seed) produce byte-identical outputs.
"""

import argparse
import itertools
import json
import sys

import numpy as np

from .bench_kernels import FAMILIES, KERNEL_NAMES, generate_mesh, kernel_for_mesh
from .errors import (
    CapacityError,
    FileFormatError,
    KernelSpecError,
    MeshValidationError,
    MeshplanError,
    RaceError,
)
from .hardware import get_hardware
from .kernelspec import KernelSpec
from .mesh import ELEM_TYPES, Mesh, transform_layout, validate_mesh
from .meshio import read_mesh, write_mesh
from .partition import save_partition, Partition
from .permutation import save_permutation
from .plan import (
    GlobalPlan,
    PlanConfig,
    build_global_plan,
    build_hierarchical_plan,
    load_plan,
    save_plan,
)
from .simulator import MetricsReport, execute_global, execute_hierarchical, execute_serial

METRIC_COLUMNS = (
    "family",
    "kernel",
    "strategy",
    "reorder",
    "layout",
    "staging",
    "block_size",
    "seed",
    "n_elements",
    "num_blocks",
    "num_launches",
    "block_colours",
    "thread_colours_max",
    "thread_colours_mean",
    "reuse_factor",
    "read_transactions",
    "write_transactions",
    "total_transactions",
    "cache_lines_per_block",
    "sync_count",
    "warp_efficiency",
    "occupancy_estimate",
    "blocks_per_sm",
    "shared_bytes_max",
    "staging_instructions",
    "bandwidth_proxy",
    "temp_array_bytes",
    "atomic_ops",
)


class VerificationError(RaceError):
    """Parallel output disagreed with the serial oracle."""


def _parse_dims(text: str) -> tuple[int, ...]:
    parts = text.replace(",", " ").split()
    return tuple(int(p) for p in parts)


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _metrics_row(meta: dict, report: MetricsReport) -> dict:
    row = dict(meta)
    row.update(report.to_dict())
    return {k: row.get(k) for k in METRIC_COLUMNS}


def _write_csv(path, rows: list[dict]) -> None:
    lines = [",".join(METRIC_COLUMNS)]
    for row in rows:
        lines.append(",".join(_format_cell(row[k]) for k in METRIC_COLUMNS))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _text_table(rows: list[dict], columns) -> str:
    cells = [[str(c) for c in columns]]
    for row in rows:
        cells.append([_format_cell(row[k]) for k in columns])
    widths = [max(len(r[i]) for r in cells) for i in range(len(columns))]
    out = []
    for r in cells:
        out.append("  ".join(v.rjust(w) for v, w in zip(r, widths)))
    return "\n".join(out)


def _write_svg(path, rows: list[dict], metric: str = "bandwidth_proxy") -> None:
    """Minimal deterministic bar chart of one metric per configuration."""
    bars = [(f"{r['strategy']}/{r['reorder']}/{r['layout']}", float(r[metric] or 0.0)) for r in rows]
    width, bar_h, gap, label_w = 640, 18, 6, 220
    height = len(bars) * (bar_h + gap) + gap
    peak = max((v for _, v in bars), default=1.0) or 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="monospace" font-size="12">'
    ]
    for i, (label, value) in enumerate(bars):
        y = gap + i * (bar_h + gap)
        w = int((width - label_w - 80) * value / peak)
        parts.append(f'<text x="4" y="{y + 13}">{label}</text>')
        parts.append(f'<rect x="{label_w}" y="{y}" width="{w}" height="{bar_h}" fill="#4878a8"/>')
        parts.append(f'<text x="{label_w + w + 4}" y="{y + 13}">{value:.4f}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(parts) + "\n")


def _build_plan(mesh: Mesh, kernel: KernelSpec, args, strategy: str, reorder: str, layout: str):
    config = PlanConfig(
        strategy=strategy,
        reorder=reorder,
        layout=layout,
        staging=args.staging,
        block_size=args.block_size,
        tolerance=args.tolerance,
        epsilon=args.epsilon,
        seed=args.seed,
        unweighted_cut=args.unweighted_cut,
        wide_transfers=args.wide_transfers,
    )
    hw = get_hardware(args.hw)
    if strategy == "global":
        return build_global_plan(mesh, kernel, config, hw)
    return build_hierarchical_plan(mesh, kernel, config, hw)


def _execute(plan, kernel: KernelSpec):
    if isinstance(plan, GlobalPlan):
        return execute_global(plan, kernel)
    return execute_hierarchical(plan, kernel)


def _verify(plan, kernel: KernelSpec, mesh: Mesh, result: Mesh, rel_tol: float = 1e-12) -> None:
    """Compare a restored parallel result against the serial oracle.

    Integer data must match bit for bit.  Float data is compared per value at
    ``rel_tol`` relative, with the array's own magnitude as the scale floor:
    parallel execution differs from serial only by increment reassociation,
    whose error scales with the summed terms, not with a (possibly
    cancelled-to-zero) result.
    """
    serial = execute_serial(mesh, kernel_for_mesh(kernel.name, mesh))
    restored = plan.restore_data(result)
    for name, arr in serial.data.items():
        a = arr.view2d()
        b = restored.data[name].view2d()
        if arr.values.dtype.kind == "i":
            if not np.array_equal(a, b):
                raise VerificationError(f"array {name!r}: integer mismatch against the serial oracle")
            continue
        diff = np.abs(a.astype(np.float64) - b.astype(np.float64))
        floor = float(np.abs(a).max(initial=0.0))
        scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), max(floor, np.finfo(np.float64).tiny))
        bad = diff > rel_tol * scale
        if np.any(bad):
            i = np.argwhere(bad)[0]
            raise VerificationError(
                f"array {name!r}: value at {tuple(int(v) for v in i)} differs from the serial "
                f"oracle beyond {rel_tol} relative"
            )


def cmd_gen(args) -> int:
    mesh = generate_mesh(args.family, _parse_dims(args.dims), seed=args.seed, dtype=args.dtype)
    write_mesh(mesh, args.output)
    print(f"wrote {args.output}: " + ", ".join(f"{s.name}={s.size}" for s in mesh.sets.values()))
    return 0


def cmd_plan(args) -> int:
    mesh = read_mesh(args.mesh)
    report = validate_mesh(mesh)
    if not report.valid:
        raise MeshValidationError(f"invalid mesh {args.mesh}:\n{report}")
    kernel = kernel_for_mesh(args.kernel, mesh)
    plan = _build_plan(mesh, kernel, args, args.strategy, args.reorder, args.layout)
    save_plan(plan, args.output, mesh=mesh)
    if args.save_permutation:
        iter_set = kernel.iter_set_name(mesh)
        save_permutation(plan.set_perms[iter_set], args.save_permutation)
    if args.save_partition:
        if isinstance(plan, GlobalPlan):
            raise MeshValidationError("--save-partition needs the hierarchical strategy")
        iter_set = kernel.iter_set_name(mesh)
        forward = plan.set_perms[iter_set].forward
        block_of = np.repeat(
            np.arange(plan.num_blocks, dtype=np.int64), np.diff(plan.block_offsets)
        )
        save_partition(
            Partition(assignment=block_of[forward], num_blocks=plan.num_blocks),
            args.save_partition,
        )
    print(f"wrote {args.output}")
    return 0


def cmd_run(args) -> int:
    mesh = read_mesh(args.mesh)
    plan = load_plan(args.plan, mesh)
    kernel = kernel_for_mesh(args.kernel, plan.mesh)
    result, report = _execute(plan, kernel)
    if not args.no_verify:
        _verify(plan, kernel, mesh, result)
    meta = {
        "family": mesh.meta.get("family", ""),
        "kernel": args.kernel,
        "strategy": plan.config.strategy,
        "reorder": plan.config.reorder,
        "layout": plan.config.layout,
        "staging": plan.config.staging,
        "block_size": plan.config.block_size,
        "seed": plan.config.seed,
    }
    row = _metrics_row(meta, report)
    with open(args.metrics, "w", encoding="ascii") as fh:
        json.dump(row, fh, sort_keys=True, indent=2)
        fh.write("\n")
    if args.metrics_csv:
        _write_csv(args.metrics_csv, [row])
    if args.output:
        restored = plan.restore_data(result)
        arrays = [
            transform_layout(arr, mesh.data[name].layout)
            for name, arr in restored.data.items()
        ]
        write_mesh(restored.with_data(*arrays), args.output)
    print(f"ok: {report.read_transactions} read / {report.write_transactions} write transactions")
    return 0


def cmd_compare(args) -> int:
    mesh = read_mesh(args.mesh)
    validation = validate_mesh(mesh)
    if not validation.valid:
        raise MeshValidationError(f"invalid mesh {args.mesh}:\n{validation}")
    strategies = args.strategies.split(",")
    reorders = args.reorders.split(",")
    layouts = args.layouts.split(",")
    rows = []
    for strategy, reorder, layout in itertools.product(strategies, reorders, layouts):
        if strategy == "global" and reorder.startswith("structured"):
            continue
        kernel = kernel_for_mesh(args.kernel, mesh)
        plan = _build_plan(mesh, kernel, args, strategy, reorder, layout)
        result, report = _execute(plan, kernel)
        if not args.no_verify:
            _verify(plan, kernel, mesh, result)
        meta = {
            "family": mesh.meta.get("family", ""),
            "kernel": args.kernel,
            "strategy": strategy,
            "reorder": reorder,
            "layout": layout,
            "staging": args.staging,
            "block_size": args.block_size,
            "seed": args.seed,
        }
        rows.append(_metrics_row(meta, report))
    _write_csv(args.output, rows)
    columns = (
        "strategy",
        "reorder",
        "layout",
        "block_colours",
        "thread_colours_max",
        "reuse_factor",
        "read_transactions",
        "write_transactions",
        "cache_lines_per_block",
        "occupancy_estimate",
        "bandwidth_proxy",
    )
    print(_text_table(rows, columns))
    if args.svg:
        _write_svg(args.svg, rows)
    print(f"wrote {args.output}")
    return 0


def _add_plan_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--block-size", type=int, default=128)
    p.add_argument("--tolerance", type=float, default=1.001)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--layout", choices=["aos", "soa"], default="aos")
    p.add_argument("--staging", choices=["all-indirect", "increment-only"], default="all-indirect")
    p.add_argument("--hw", default="p100", help="p100, v100 or a JSON descriptor path")
    p.add_argument("--unweighted-cut", action="store_true")
    p.add_argument("--wide-transfers", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="meshplan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a mesh file")
    p.add_argument("--family", choices=list(FAMILIES), required=True)
    p.add_argument("--dims", required=True, help="e.g. 32,32 or 8,8,16")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dtype", choices=sorted(ELEM_TYPES), default="f64")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("plan", help="build an execution plan")
    p.add_argument("--mesh", required=True)
    p.add_argument("--kernel", choices=list(KERNEL_NAMES), required=True)
    p.add_argument("--strategy", choices=["global", "hier"], default="hier")
    p.add_argument("--reorder", default="none", help="none | gps | partition | structured:bx,by,bz")
    _add_plan_flags(p)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--save-permutation")
    p.add_argument("--save-partition")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("run", help="execute a kernel under a plan")
    p.add_argument("--mesh", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--kernel", choices=list(KERNEL_NAMES), required=True)
    p.add_argument("--metrics", required=True, help="metrics JSON output path")
    p.add_argument("--metrics-csv", help="optional metrics CSV output path")
    p.add_argument("-o", "--output", help="write the result mesh here")
    p.add_argument("--no-verify", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="run a configuration matrix and tabulate metrics")
    p.add_argument("--mesh", required=True)
    p.add_argument("--kernel", choices=list(KERNEL_NAMES), required=True)
    p.add_argument("--strategies", default="global,hier")
    p.add_argument("--reorders", default="none,gps,partition")
    p.add_argument("--layouts", default="aos,soa")
    _add_plan_flags(p)
    p.add_argument("--no-verify", action="store_true")
    p.add_argument("-o", "--output", required=True, help="CSV output path")
    p.add_argument("--svg", help="optional SVG bar chart path")
    p.set_defaults(func=cmd_compare)

    return parser


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, (RaceError, VerificationError)):
        return 3
    if isinstance(exc, CapacityError):
        return 4
    if isinstance(exc, (FileFormatError, OSError)):
        return 5
    if isinstance(exc, (MeshValidationError, KernelSpecError, ValueError)):
        return 2
    return 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MeshplanError, ValueError, OSError) as exc:
        code = _exit_code(exc)
        payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
