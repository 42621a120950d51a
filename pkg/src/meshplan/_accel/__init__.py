"""Backend dispatch for the hot inner-loop kernels.

The algorithms that dominate planning time (greedy colouring, elimination
ordering, BFS level sweeps, matching/refinement in the partitioner) are
implemented twice: once as numba ``@njit`` loops and once in pure
numpy/Python.  The environment variable ``MESHPLAN_NUMBA`` picks the backend:

* unset or ``auto`` -- use numba when it imports cleanly, else fall back;
* ``1``/``on``      -- require numba, raise if unavailable;
* ``0``/``off``     -- force the pure-numpy fallback.

Both backends are written to produce bit-identical outputs; the benchmark in
``benchmarks/bench_backends.py`` checks that while timing them against each
other.
"""

import os

_requested = os.environ.get("MESHPLAN_NUMBA", "auto").strip().lower()

if _requested in ("0", "off", "no", "false"):
    from . import numpy_impl as _impl

    _backend_name = "numpy"
else:
    try:
        from . import numba_impl as _impl

        _backend_name = "numba"
    except ImportError:
        if _requested in ("1", "on", "yes", "true"):
            raise
        from . import numpy_impl as _impl

        _backend_name = "numpy"


def backend() -> str:
    """Name of the active backend, ``"numba"`` or ``"numpy"``."""
    return _backend_name


greedy_colour_csr = _impl.greedy_colour_csr
greedy_colour_adj = _impl.greedy_colour_adj
smallest_last_order = _impl.smallest_last_order
bfs_levels = _impl.bfs_levels
heavy_edge_matching = _impl.heavy_edge_matching
refine_boundary_pass = _impl.refine_boundary_pass
cut_weight = _impl.cut_weight
pairs_from_segments = _impl.pairs_from_segments
