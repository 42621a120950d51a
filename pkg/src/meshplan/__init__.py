"""Locality-optimised planning and cost-model simulation of unstructured-mesh loops."""

from ._accel import backend as accel_backend
from .colouring import (
    ColourAssignment,
    colour_blocks,
    colour_global,
    colour_threads_in_block,
    sort_threads_by_colour,
)
from .errors import (
    CapacityError,
    FileFormatError,
    KernelSpecError,
    MeshValidationError,
    MeshplanError,
    RaceError,
)
from .hardware import P100, V100, HardwareDescriptor, get_hardware
from .kernelspec import KernelArg, KernelSpec
from .mesh import (
    DataArray,
    Mapping,
    Mesh,
    MeshSet,
    ValidationReport,
    apply_permutation,
    invert_mapping,
    transform_layout,
    validate_mesh,
)
from .meshio import read_mesh, write_mesh
from .partition import (
    Partition,
    PartitionConfig,
    ThreadGraph,
    build_thread_graph,
    chunk_partition,
    compute_effective_block_size,
    partition_kway,
    partition_structured_hex,
)
from .permutation import Permutation, load_permutation, save_permutation
from .plan import (
    GlobalPlan,
    HierarchicalPlan,
    PlanConfig,
    build_global_plan,
    build_hierarchical_plan,
    load_plan,
    reuse_factor,
    save_plan,
)
from .reorder import (
    PointGraph,
    bandwidth,
    gps_renumber,
    lex_sort_elements,
    mesh_to_graph,
    reorder_points_by_writer_sets,
)
from .simulator import (
    MetricsReport,
    count_cache_lines,
    estimate_occupancy,
    execute_global,
    execute_hierarchical,
    execute_serial,
    wide_transfer_model,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
