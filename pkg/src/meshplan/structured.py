"""Index arithmetic for generated structured hex meshes.

Cells of an ``(nx, ny, nz)`` grid are numbered with z fastest:
``cell(x, y, z) = (x*ny + y)*nz + z``; nodes likewise on the
``(nx+1, ny+1, nz+1)`` grid.  Internal faces are enumerated by walking cells
in index order and appending, per cell, its owned +x/+y/+z faces (a face is
owned by the cell on its lower side), so faces owned by a contiguous cell
range are themselves contiguous.
"""

import numpy as np


def cell_count(dims) -> int:
    nx, ny, nz = dims
    return nx * ny * nz


def node_count(dims) -> int:
    nx, ny, nz = dims
    return (nx + 1) * (ny + 1) * (nz + 1)


def internal_face_count(dims) -> int:
    nx, ny, nz = dims
    return (nx - 1) * ny * nz + nx * (ny - 1) * nz + nx * ny * (nz - 1)


def cell_coords(dims) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-cell (x, y, z) arrays in cell index order."""
    nx, ny, nz = dims
    ids = np.arange(cell_count(dims), dtype=np.int64)
    return ids // (ny * nz), (ids // nz) % ny, ids % nz


def node_index(dims, x, y, z):
    _, ny, nz = dims
    return (x * (ny + 1) + y) * (nz + 1) + z


def hex_cell_nodes(dims) -> np.ndarray:
    """(n_cells, 8) table of the corner nodes of every cell."""
    x, y, z = cell_coords(dims)
    corners = []
    for dx in (0, 1):
        for dy in (0, 1):
            for dz in (0, 1):
                corners.append(node_index(dims, x + dx, y + dy, z + dz))
    return np.stack(corners, axis=1).astype(np.int64)


def hex_internal_faces(dims) -> tuple[np.ndarray, np.ndarray]:
    """Internal faces as ``(table, owners)``.

    ``table`` is the (n_faces, 2) face->cell mapping (lower cell first);
    ``owners[f]`` is the lower cell, which the face enumeration walks.
    """
    nx, ny, nz = dims
    x, y, z = cell_coords(dims)
    cells = np.arange(cell_count(dims), dtype=np.int64)
    strides = (ny * nz, nz, 1)
    has = (x < nx - 1, y < ny - 1, z < nz - 1)

    # interleave owned faces in +x, +y, +z order per cell
    per_cell = sum(h.astype(np.int64) for h in has)
    offsets = np.zeros(len(cells) + 1, dtype=np.int64)
    np.cumsum(per_cell, out=offsets[1:])
    n_faces = int(offsets[-1])
    table = np.empty((n_faces, 2), dtype=np.int64)
    owners = np.empty(n_faces, dtype=np.int64)
    cursor = offsets[:-1].copy()
    for axis in range(3):
        mask = has[axis]
        pos = cursor[mask]
        table[pos, 0] = cells[mask]
        table[pos, 1] = cells[mask] + strides[axis]
        owners[pos] = cells[mask]
        cursor[mask] += 1
    return table, owners


def hex_block_assignment(dims, block_shape) -> np.ndarray:
    """Per-cell block id for an exact tiling by ``block_shape`` rectangles.

    Blocks are numbered row-major in block coordinates (z-blocks fastest).
    Raises ``ValueError`` when the shape does not divide the grid.
    """
    nx, ny, nz = dims
    bx, by, bz = block_shape
    if bx < 1 or by < 1 or bz < 1 or nx % bx or ny % by or nz % bz:
        raise ValueError(f"block shape {block_shape} does not tile dims {dims}")
    x, y, z = cell_coords(dims)
    nby, nbz = ny // by, nz // bz
    return ((x // bx) * nby + (y // by)) * nbz + (z // bz)
