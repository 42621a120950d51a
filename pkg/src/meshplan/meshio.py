"""Text mesh format.

Grammar (one mesh per file)::

    meshplan-mesh 1
    # key=value                (optional metadata lines, any number)
    sets <k>
    <name> <size>              (k lines)
    mapping <name> <from> <to> <arity>
    <arity integers>           (from.size lines)
    data <name> <set> <components> <f64|f32|i64|i32> <aos|soa>
    <components values>        (set.size lines, element order)
    ...

``mapping`` and ``data`` sections repeat in any order after the sets.  Data
lines are always element-major regardless of the in-memory layout named in
the header.  The leading version line is required on write; readers accept
legacy files that start directly with ``sets``.
"""

import numpy as np

from .errors import FileFormatError
from .mesh import ELEM_TYPES, DataArray, Mapping, Mesh, MeshSet

_MESH_MAGIC = "meshplan-mesh 1"


def _format_value(v, dtype) -> str:
    if dtype.kind == "i":
        return str(int(v))
    return repr(float(v))


def write_mesh(mesh: Mesh, path) -> None:
    """Serialize a mesh; byte-deterministic for equal meshes."""
    lines = [_MESH_MAGIC]
    for key in sorted(mesh.meta):
        lines.append(f"# {key}={mesh.meta[key]}")
    lines.append(f"sets {len(mesh.sets)}")
    for s in mesh.sets.values():
        lines.append(f"{s.name} {s.size}")
    for m in mesh.mappings.values():
        lines.append(f"mapping {m.name} {m.from_set.name} {m.to_set.name} {m.arity}")
        for row in m.table:
            lines.append(" ".join(str(int(v)) for v in row))
    for arr in mesh.data.values():
        lines.append(f"data {arr.name} {arr.set.name} {arr.components} {arr.elem_type} {arr.layout}")
        dtype = arr.values.dtype
        for row in arr.view2d():
            lines.append(" ".join(_format_value(v, dtype) for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


class _Lines:
    def __init__(self, path):
        with open(path, "r", encoding="ascii") as fh:
            self.lines = fh.read().splitlines()
        self.pos = 0
        self.path = path

    def peek(self):
        while self.pos < len(self.lines) and not self.lines[self.pos].strip():
            self.pos += 1
        if self.pos >= len(self.lines):
            return None
        return self.lines[self.pos].strip()

    def take(self):
        line = self.peek()
        if line is None:
            raise FileFormatError(f"{self.path}: unexpected end of file")
        self.pos += 1
        return line


def read_mesh(path) -> Mesh:
    """Parse a mesh file written by :func:`write_mesh`."""
    src = _Lines(path)
    meta = {}

    line = src.peek()
    if line is None:
        raise FileFormatError(f"{path}: empty file")
    if line.startswith("meshplan-mesh"):
        if line != _MESH_MAGIC:
            raise FileFormatError(f"{path}: unsupported version line {line!r}")
        src.take()

    while (line := src.peek()) is not None and line.startswith("#"):
        src.take()
        body = line[1:].strip()
        if "=" in body:
            key, _, value = body.partition("=")
            meta[key.strip()] = value.strip()

    header = src.take().split()
    if len(header) != 2 or header[0] != "sets":
        raise FileFormatError(f"{path}: expected 'sets <k>', got {header!r}")
    sets = {}
    for _ in range(int(header[1])):
        name, size = src.take().split()
        sets[name] = MeshSet(name, int(size))

    def get_set(name, where):
        if name not in sets:
            raise FileFormatError(f"{path}: {where} references unknown set {name!r}")
        return sets[name]

    mappings = []
    data = []
    while (line := src.peek()) is not None:
        fields = src.take().split()
        if fields[0] == "mapping":
            if len(fields) != 5:
                raise FileFormatError(f"{path}: bad mapping header {fields!r}")
            _, name, from_name, to_name, arity = fields
            from_set = get_set(from_name, f"mapping {name}")
            to_set = get_set(to_name, f"mapping {name}")
            arity = int(arity)
            table = np.empty((from_set.size, arity), dtype=np.int64)
            for i in range(from_set.size):
                row = src.take().split()
                if len(row) != arity:
                    raise FileFormatError(f"{path}: mapping {name} row {i} has {len(row)} entries, wanted {arity}")
                table[i] = [int(v) for v in row]
            mappings.append(Mapping(name, from_set, to_set, table))
        elif fields[0] == "data":
            if len(fields) != 6:
                raise FileFormatError(f"{path}: bad data header {fields!r}")
            _, name, set_name, components, elem_type, layout = fields
            on = get_set(set_name, f"data {name}")
            components = int(components)
            if elem_type not in ELEM_TYPES:
                raise FileFormatError(f"{path}: data {name} has unknown element type {elem_type!r}")
            if layout not in ("aos", "soa"):
                raise FileFormatError(f"{path}: data {name} has unknown layout {layout!r}")
            dtype = ELEM_TYPES[elem_type]
            v2d = np.empty((on.size, components), dtype=dtype)
            for i in range(on.size):
                row = src.take().split()
                if len(row) != components:
                    raise FileFormatError(f"{path}: data {name} row {i} has {len(row)} values, wanted {components}")
                try:
                    v2d[i] = [float(v) if dtype.kind == "f" else int(v) for v in row]
                except ValueError as exc:
                    raise FileFormatError(f"{path}: data {name} row {i}: {exc}") from None
            values = v2d.ravel() if layout == "aos" else v2d.T.ravel()
            data.append(DataArray(name, on, components, values, layout))
        else:
            raise FileFormatError(f"{path}: unexpected line {line!r}")

    return Mesh.build(sets=sets.values(), mappings=mappings, data=data, meta=meta)
