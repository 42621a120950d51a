"""Generated meshes and representative indirect-increment kernels.

Four mesh families cover the studied loop shapes: 2D quad and triangle
grids iterating interior edges into cells (arity 2), and generated hex
grids iterating either cells into their 8 nodes or internal faces into 2
cells.  Kernels are synthetic but dimension-faithful: component counts
follow the applications they stand in for, so staging sizes and transaction
counts are representative.

Float data is drawn from the 1/1024 grid, which keeps every product and
partial sum exactly representable in both float32 and float64; parallel
reassociation then cannot perturb results, making oracle comparisons exact.
Integer variants use small integers for the same reason.
"""

import numpy as np

from . import structured
from .errors import MeshValidationError
from .kernelspec import KernelArg, KernelSpec
from .mesh import ELEM_TYPES, DataArray, Mapping, Mesh, MeshSet

FAMILIES = ("quad2d", "tri2d", "hex3d-nodes", "hex3d-faces")


def _rand(rng, shape, dtype):
    if dtype.kind == "i":
        return rng.integers(-9, 10, size=shape).astype(dtype)
    return (rng.integers(-1024, 1025, size=shape) / 1024.0).astype(dtype)


def _edge_family_data(rng, edges: MeshSet, cells: MeshSet, dtype) -> list[DataArray]:
    def arr(name, on, comps, zero=False):
        shape = (on.size, comps)
        values = np.zeros(shape, dtype=dtype) if zero else _rand(rng, shape, dtype)
        return DataArray(name, on, comps, values.ravel(), "aos")

    return [
        arr("q", cells, 4),
        arr("res", cells, 4, zero=True),
        arr("w", edges, 2),
        arr("state", cells, 28),
        arr("flux", cells, 5, zero=True),
        arr("facew", edges, 4),
    ]


def gen_quad2d(nx: int, ny: int, seed: int = 0, dtype: str = "f64") -> Mesh:
    """Quad grid, interior edges -> cells (arity 2).

    Cell (x, y) has index ``x*ny + y``; edges list y-neighbour pairs first,
    then x-neighbour pairs, giving ``nx(ny-1) + ny(nx-1)`` interior edges.
    """
    if nx < 1 or ny < 1:
        raise MeshValidationError("dims must be >= 1")
    dt = ELEM_TYPES[dtype]
    rng = np.random.default_rng(seed)
    n_cells = nx * ny
    x, y = np.divmod(np.arange(n_cells, dtype=np.int64), ny)
    rows = []
    ymask = y < ny - 1
    rows.append(np.stack([np.flatnonzero(ymask), np.flatnonzero(ymask) + 1], axis=1))
    xmask = x < nx - 1
    rows.append(np.stack([np.flatnonzero(xmask), np.flatnonzero(xmask) + ny], axis=1))
    table = np.concatenate(rows) if rows else np.empty((0, 2), dtype=np.int64)

    edges = MeshSet("edges", len(table))
    cells = MeshSet("cells", n_cells)
    mapping = Mapping("e2c", edges, cells, table)
    data = _edge_family_data(rng, edges, cells, dt)
    meta = {"family": "quad2d", "dims": f"{nx} {ny}", "seed": str(seed), "dtype": dtype}
    return Mesh.build(sets=[edges, cells], mappings=[mapping], data=data, meta=meta)


def gen_tri2d(nx: int, ny: int, seed: int = 0, dtype: str = "f64") -> Mesh:
    """Triangulated quad grid: each quad splits into two triangles.

    Quad (x, y) becomes triangles ``2q`` (lower-left) and ``2q+1``
    (upper-right); interior edges are the quad diagonals plus the original
    interior quad edges, ``nx*ny + nx(ny-1) + ny(nx-1)`` in total.
    """
    if nx < 1 or ny < 1:
        raise MeshValidationError("dims must be >= 1")
    dt = ELEM_TYPES[dtype]
    rng = np.random.default_rng(seed)
    n_quads = nx * ny
    q = np.arange(n_quads, dtype=np.int64)
    x, y = np.divmod(q, ny)
    rows = [np.stack([2 * q, 2 * q + 1], axis=1)]  # diagonals
    ym = np.flatnonzero(y < ny - 1)
    rows.append(np.stack([2 * ym + 1, 2 * (ym + 1)], axis=1))  # upper of (x,y) vs lower of (x,y+1)
    xm = np.flatnonzero(x < nx - 1)
    rows.append(np.stack([2 * xm + 1, 2 * (xm + ny)], axis=1))  # east vs west neighbour
    table = np.concatenate(rows)

    edges = MeshSet("edges", len(table))
    cells = MeshSet("cells", 2 * n_quads)
    mapping = Mapping("e2c", edges, cells, table)
    data = _edge_family_data(rng, edges, cells, dt)
    meta = {"family": "tri2d", "dims": f"{nx} {ny}", "seed": str(seed), "dtype": dtype}
    return Mesh.build(sets=[edges, cells], mappings=[mapping], data=data, meta=meta)


def gen_hex3d(nx: int, ny: int, nz: int, target: str = "nodes", seed: int = 0, dtype: str = "f64") -> Mesh:
    """Generated hex grid iterating cells -> nodes or internal faces -> cells."""
    if nx < 1 or ny < 1 or nz < 1:
        raise MeshValidationError("dims must be >= 1")
    if target not in ("nodes", "faces"):
        raise MeshValidationError(f"unknown hex target {target!r}")
    dt = ELEM_TYPES[dtype]
    rng = np.random.default_rng(seed)
    dims = (nx, ny, nz)
    cells = MeshSet("cells", structured.cell_count(dims))
    meta = {"dims": f"{nx} {ny} {nz}", "seed": str(seed), "dtype": dtype}

    if target == "nodes":
        nodes = MeshSet("nodes", structured.node_count(dims))
        mapping = Mapping("c2n", cells, nodes, structured.hex_cell_nodes(dims))
        data = [
            DataArray("stress", cells, 4, _rand(rng, (cells.size, 4), dt).ravel(), "aos"),
            DataArray("force", nodes, 3, np.zeros(nodes.size * 3, dtype=dt), "aos"),
        ]
        meta["family"] = "hex3d-nodes"
        return Mesh.build(sets=[cells, nodes], mappings=[mapping], data=data, meta=meta)

    table, _ = structured.hex_internal_faces(dims)
    faces = MeshSet("faces", len(table))
    mapping = Mapping("f2c", faces, cells, table)
    data = _edge_family_data(rng, faces, cells, dt)
    meta["family"] = "hex3d-faces"
    return Mesh.build(sets=[faces, cells], mappings=[mapping], data=data, meta=meta)


def generate_mesh(family: str, dims, seed: int = 0, dtype: str = "f64") -> Mesh:
    """Build any family from its dims tuple."""
    if family == "quad2d":
        return gen_quad2d(*_need_dims(dims, 2), seed=seed, dtype=dtype)
    if family == "tri2d":
        return gen_tri2d(*_need_dims(dims, 2), seed=seed, dtype=dtype)
    if family == "hex3d-nodes":
        return gen_hex3d(*_need_dims(dims, 3), target="nodes", seed=seed, dtype=dtype)
    if family == "hex3d-faces":
        return gen_hex3d(*_need_dims(dims, 3), target="faces", seed=seed, dtype=dtype)
    raise MeshValidationError(f"unknown mesh family {family!r}; expected one of {FAMILIES}")


def _need_dims(dims, k):
    dims = tuple(int(d) for d in dims)
    if len(dims) != k:
        raise MeshValidationError(f"expected {k} dims, got {dims}")
    return dims


def kernel_flux_increment(
    dtype: str = "f64",
    mapping: str = "e2c",
    unit: bool = False,
    no_indirect_read: bool = False,
) -> KernelSpec:
    """Edge flux: read both cell states and direct edge data, increment both cells.

    The flux is the state difference scaled by the first edge weight, added
    to one cell and subtracted from the other.  ``unit`` increments every
    touched component by one (incidence-count oracle); ``no_indirect_read``
    drops the indirect read and derives both increments from the edge data
    alone.
    """
    dt = ELEM_TYPES[dtype]

    def fn(inputs):
        w = inputs["w"]
        if unit:
            return {"res": np.ones((len(w), 2, 4), dtype=dt)}
        if no_indirect_read:
            left = np.repeat(w[:, 0:1], 4, axis=1)
            right = np.repeat(w[:, 1:2], 4, axis=1)
        else:
            q = inputs["q"]
            left = (q[:, 1, :] - q[:, 0, :]) * w[:, 0:1]
            right = -left
        return {"res": np.stack([left, right], axis=1)}

    args = []
    if not no_indirect_read:
        args.append(KernelArg("q", "q", "read", mapping=mapping))
    args.append(KernelArg("w", "w", "read"))
    args.append(KernelArg("res", "res", "increment", mapping=mapping))
    name = "flux-noread" if no_indirect_read else "flux"
    return KernelSpec(name=name, args=tuple(args), fn=fn, regs_per_thread=48)


def kernel_scatter8(dtype: str = "f64", mapping: str = "c2n", unit: bool = False) -> KernelSpec:
    """Cell-to-nodes scatter: per-cell values increment all eight corner nodes."""
    dt = ELEM_TYPES[dtype]

    def fn(inputs):
        s = inputs["stress"]
        if unit:
            return {"force": np.ones((len(s), 8, 3), dtype=dt)}
        v = np.stack([s[:, 0] + s[:, 1], s[:, 1] * s[:, 2], s[:, 3] - s[:, 0]], axis=1)
        return {"force": np.repeat(v[:, None, :], 8, axis=1)}

    args = (
        KernelArg("stress", "stress", "read"),
        KernelArg("force", "force", "increment", mapping=mapping),
    )
    return KernelSpec(name="scatter8", args=args, fn=fn, regs_per_thread=96)


def kernel_face_flux(
    dtype: str = "f64",
    mapping: str = "f2c",
    heavy: bool = False,
    unit: bool = False,
) -> KernelSpec:
    """Face flux over wide cell state: 28-component reads, 5-component increments.

    Antisymmetric by construction (one cell gains what the other loses), so
    equal states across a face produce zero increments.  ``heavy`` adds
    square-root-rich scaling and requires float data.
    """
    dt = ELEM_TYPES[dtype]
    if heavy and dt.kind != "f":
        raise MeshValidationError("heavy face flux needs float data")

    def fn(inputs):
        fw = inputs["facew"]
        if unit:
            return {"flux": np.ones((len(fw), 2, 5), dtype=dt)}
        state = inputs["state"]
        s_left = state[:, 0, :]
        s_right = state[:, 1, :]
        phi = (s_right[:, :5] - s_left[:, :5]) * fw[:, 0:1]
        if heavy:
            scale = np.sqrt(np.abs(s_left[:, 5:6]) + 1) + np.sqrt(np.abs(s_right[:, 6:7]) + 2)
            phi = phi * scale / np.sqrt(fw[:, 1:2] * fw[:, 1:2] + 1)
            phi = phi.astype(dt)
        return {"flux": np.stack([phi, -phi], axis=1)}

    name = "face-flux-heavy" if heavy else "face-flux"
    args = (
        KernelArg("state", "state", "read", mapping=mapping),
        KernelArg("facew", "facew", "read"),
        KernelArg("flux", "flux", "increment", mapping=mapping),
    )
    return KernelSpec(name=name, args=args, fn=fn, regs_per_thread=165)


KERNEL_NAMES = ("flux", "flux-noread", "scatter8", "face-flux", "face-flux-heavy")


def kernel_for_mesh(name: str, mesh: Mesh, unit: bool = False) -> KernelSpec:
    """Instantiate a named kernel against a generated mesh.

    Resolves the mapping name and element type from the mesh; raises when
    the mesh lacks the arrays or arity the kernel needs.
    """
    if len(mesh.mappings) != 1:
        raise MeshValidationError("bench kernels expect a single-mapping mesh")
    mapping = next(iter(mesh.mappings.values()))

    def dtype_of(array: str) -> str:
        arr = mesh.data.get(array)
        if arr is None:
            raise MeshValidationError(f"kernel {name!r} needs data array {array!r}, mesh has {sorted(mesh.data)}")
        return arr.elem_type

    if name in ("flux", "flux-noread"):
        if mapping.arity != 2:
            raise MeshValidationError(f"kernel {name!r} needs an arity-2 mapping")
        return kernel_flux_increment(
            dtype_of("res"), mapping=mapping.name, unit=unit, no_indirect_read=name == "flux-noread"
        )
    if name == "scatter8":
        if mapping.arity != 8:
            raise MeshValidationError("kernel 'scatter8' needs an arity-8 mapping")
        return kernel_scatter8(dtype_of("force"), mapping=mapping.name, unit=unit)
    if name in ("face-flux", "face-flux-heavy"):
        if mapping.arity != 2:
            raise MeshValidationError(f"kernel {name!r} needs an arity-2 mapping")
        return kernel_face_flux(
            dtype_of("flux"), mapping=mapping.name, heavy=name == "face-flux-heavy", unit=unit
        )
    raise MeshValidationError(f"unknown kernel {name!r}; expected one of {KERNEL_NAMES}")


def kernels_for_family(family: str) -> tuple[str, ...]:
    """The representative kernels that type-check on a family's meshes."""
    if family == "hex3d-nodes":
        return ("scatter8",)
    return ("flux", "face-flux")
