"""Benchmark the numba hot-kernel backend against the pure-numpy fallback.

Runs both implementations of every accelerated kernel on identical inputs,
checks they agree, and reports per-kernel timings plus an end-to-end
planning comparison.  Usage::

    python benchmarks/bench_backends.py [--scale N]

The numbers justify (or indict) the accelerated lane; the fallback stays
the reference semantics either way.
"""

import argparse
import time

import numpy as np

from meshplan._accel import numba_impl, numpy_impl
from meshplan.bench_kernels import gen_quad2d, kernel_for_mesh
from meshplan.colouring import written_points_csr
from meshplan.partition import build_thread_graph


def timeit(fn, *args, repeats=3):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scale", type=int, default=96, help="quad grid edge length")
    args = parser.parse_args()

    mesh = gen_quad2d(args.scale, args.scale, seed=0, dtype="f64")
    mapping = mesh.mappings["e2c"]
    n = mapping.from_set.size
    print(f"mesh: {args.scale}x{args.scale} quad grid, {n} edges, {mapping.to_set.size} cells")

    graph = build_thread_graph([mapping])
    w_indptr, w_indices = written_points_csr(mapping)
    rng = np.random.default_rng(0)
    visit = rng.permutation(graph.n).astype(np.int64)
    node_w = np.ones(graph.n, dtype=np.int64)
    assignment = (np.arange(graph.n) // 128).astype(np.int64)
    block_w = np.bincount(assignment).astype(np.int64)

    cases = [
        ("greedy_colour_csr", (w_indptr, w_indices, mapping.to_set.size, True)),
        ("smallest_last_order", (graph.indptr, graph.indices)),
        ("bfs_levels", (graph.indptr, graph.indices, 0)),
        ("heavy_edge_matching", (graph.indptr, graph.indices, graph.weights, node_w, visit, 32)),
        ("cut_weight", (graph.indptr, graph.indices, graph.weights, assignment, True)),
        ("pairs_from_segments", (w_indptr, w_indices)),
    ]

    print(f"\n{'kernel':<24} {'numpy':>10} {'numba':>10} {'speedup':>9}  agree")
    for name, call_args in cases:
        np_fn = getattr(numpy_impl, name)
        nb_fn = getattr(numba_impl, name)
        nb_fn(*[a.copy() if isinstance(a, np.ndarray) else a for a in call_args])  # JIT warmup
        t_np, r_np = timeit(np_fn, *[a.copy() if isinstance(a, np.ndarray) else a for a in call_args])
        t_nb, r_nb = timeit(nb_fn, *[a.copy() if isinstance(a, np.ndarray) else a for a in call_args])
        if name == "pairs_from_segments":  # pair order is backend-specific
            agree = sorted(zip(*map(np.ndarray.tolist, r_np))) == sorted(zip(*map(np.ndarray.tolist, r_nb)))
        else:
            agree = same(r_np, r_nb)
        print(f"{name:<24} {t_np * 1e3:>8.2f}ms {t_nb * 1e3:>8.2f}ms {t_np / t_nb:>8.1f}x  {agree}")
        assert agree, f"{name}: backends disagree"

    # refinement mutates in place; run it separately on twin inputs
    a1, a2 = assignment.copy(), assignment.copy()
    b1, b2 = block_w.copy(), block_w.copy()
    numba_impl.refine_boundary_pass(graph.indptr, graph.indices, graph.weights, a2.copy(), b2.copy(), node_w, 160, True)
    t_np, _ = timeit(numpy_impl.refine_boundary_pass, graph.indptr, graph.indices, graph.weights, a1, b1, node_w, 160, True, repeats=1)
    t_nb, _ = timeit(numba_impl.refine_boundary_pass, graph.indptr, graph.indices, graph.weights, a2, b2, node_w, 160, True, repeats=1)
    print(f"{'refine_boundary_pass':<24} {t_np * 1e3:>8.2f}ms {t_nb * 1e3:>8.2f}ms {t_np / t_nb:>8.1f}x  {np.array_equal(a1, a2)}")
    assert np.array_equal(a1, a2)

    # end to end: hierarchical partition plan under each backend
    import meshplan as mp

    kernel = kernel_for_mesh("flux", mesh)
    cfg = mp.PlanConfig(strategy="hier", reorder="partition", block_size=128)
    t0 = time.perf_counter()
    plan = mp.build_hierarchical_plan(mesh, kernel, cfg)
    t_active = time.perf_counter() - t0
    from meshplan import _accel

    print(
        f"\nend-to-end hierarchical partition plan with active backend "
        f"({_accel.backend()}): {t_active * 1e3:.1f}ms, "
        f"{plan.num_blocks} blocks, reuse {mp.reuse_factor(plan):.3f}"
    )
    print("rerun with MESHPLAN_NUMBA=0 to time the fallback end to end")


if __name__ == "__main__":
    main()
