"""Mesh data model: sets, fixed-arity mappings and per-set data arrays.

Sets are index ranges ``0..size-1``.  A mapping is a dense table giving, per
element of its from-set, the indices of its to-set neighbours.  Data arrays
bind ``components`` values per element to a set, stored flat in either
element-contiguous (``aos``) or component-contiguous (``soa``) order.

Everything here is immutable after construction; the operations are pure and
return new values.  Semantic problems (out-of-range mapping entries, length
mismatches) are *findings* reported by :func:`validate_mesh`, not
construction failures, so that broken inputs can be loaded and diagnosed.
"""

from dataclasses import dataclass, field

import numpy as np

from .permutation import Permutation

ELEM_TYPES = {
    "f64": np.dtype(np.float64),
    "f32": np.dtype(np.float32),
    "i64": np.dtype(np.int64),
    "i32": np.dtype(np.int32),
}
_DTYPE_NAMES = {v: k for k, v in ELEM_TYPES.items()}

LAYOUTS = ("aos", "soa")

# indices must fit signed 32-bit consumers even though tables are int64
MAX_SET_SIZE = 2**31 - 1


@dataclass(frozen=True)
class MeshSet:
    """A named set of ``size`` elements indexed ``0..size-1``."""

    name: str
    size: int

    def __post_init__(self):
        if not 0 <= self.size <= MAX_SET_SIZE:
            raise ValueError(f"set {self.name!r}: size {self.size} out of range")


@dataclass(frozen=True)
class Mapping:
    """Dense from-set -> to-set connectivity table, row-major, one row per element."""

    name: str
    from_set: MeshSet
    to_set: MeshSet
    table: np.ndarray

    def __post_init__(self):
        table = np.ascontiguousarray(self.table, dtype=np.int64)
        if table.ndim != 2:
            raise ValueError(f"mapping {self.name!r}: table must be 2-D (rows, arity)")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def arity(self) -> int:
        return self.table.shape[1]


@dataclass(frozen=True)
class DataArray:
    """``components`` values per element of ``set``, stored flat.

    Component ``c`` of element ``i`` lives at flat index ``i*components + c``
    for ``aos`` and ``c*set.size + i`` for ``soa``.
    """

    name: str
    set: MeshSet
    components: int
    values: np.ndarray
    layout: str = "aos"

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ValueError(f"data {self.name!r}: unknown layout {self.layout!r}")
        if self.components < 1:
            raise ValueError(f"data {self.name!r}: components must be >= 1")
        values = np.ascontiguousarray(self.values)
        if values.dtype not in _DTYPE_NAMES:
            raise ValueError(f"data {self.name!r}: unsupported dtype {values.dtype}")
        if values.ndim != 1:
            values = values.ravel()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def elem_type(self) -> str:
        return _DTYPE_NAMES[self.values.dtype]

    @property
    def stride(self) -> int:
        """Distance between consecutive components of one element."""
        return 1 if self.layout == "aos" else self.set.size

    def view2d(self) -> np.ndarray:
        """``(set.size, components)`` view of the values, any layout."""
        if self.layout == "aos":
            return self.values.reshape(self.set.size, self.components)
        return self.values.reshape(self.components, self.set.size).T


@dataclass(frozen=True)
class Mesh:
    """Named sets plus the mappings and data arrays defined on them."""

    sets: dict = field(default_factory=dict)
    mappings: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @classmethod
    def build(cls, sets=(), mappings=(), data=(), meta=None) -> "Mesh":
        def keyed(items, what):
            out = {}
            for item in items:
                if item.name in out:
                    raise ValueError(f"duplicate {what} name {item.name!r}")
                out[item.name] = item
            return out

        return cls(
            sets=keyed(sets, "set"),
            mappings=keyed(mappings, "mapping"),
            data=keyed(data, "data array"),
            meta=dict(meta or {}),
        )

    def with_data(self, *arrays: DataArray) -> "Mesh":
        """Copy of the mesh with the given arrays replacing same-named ones."""
        data = dict(self.data)
        for arr in arrays:
            data[arr.name] = arr
        return Mesh(sets=self.sets, mappings=self.mappings, data=data, meta=self.meta)


@dataclass(frozen=True)
class Finding:
    """One validation problem; ``where`` names the offending object."""

    kind: str
    where: str
    detail: str

    def __str__(self) -> str:
        return f"[{self.kind}] {self.where}: {self.detail}"


@dataclass(frozen=True)
class ValidationReport:
    findings: tuple

    @property
    def valid(self) -> bool:
        return not self.findings

    def __str__(self) -> str:
        if self.valid:
            return "mesh valid (0 findings)"
        return "\n".join(str(f) for f in self.findings)


def validate_mesh(mesh: Mesh) -> ValidationReport:
    """Check set references, table shapes and index ranges.

    Returns every problem found; an empty mesh is vacuously valid.
    """
    findings = []

    def note(kind, where, detail):
        findings.append(Finding(kind, where, detail))

    for m in mesh.mappings.values():
        where = f"mapping {m.name}"
        for s in (m.from_set, m.to_set):
            if mesh.sets.get(s.name) is not s:
                note("unregistered-set", where, f"set {s.name!r} is not registered in this mesh")
        if m.arity < 1:
            note("bad-arity", where, f"arity {m.arity} < 1")
        if m.table.shape[0] != m.from_set.size:
            note(
                "size-mismatch",
                where,
                f"table has {m.table.shape[0]} rows, from-set {m.from_set.name!r} has {m.from_set.size}",
            )
        bad = (m.table < 0) | (m.table >= m.to_set.size)
        for row, slot in np.argwhere(bad):
            note(
                "out-of-range",
                where,
                f"entry [{row},{slot}] = {m.table[row, slot]} outside 0..{m.to_set.size - 1}",
            )

    for arr in mesh.data.values():
        where = f"data {arr.name}"
        if mesh.sets.get(arr.set.name) is not arr.set:
            note("unregistered-set", where, f"set {arr.set.name!r} is not registered in this mesh")
        expected = arr.set.size * arr.components
        if len(arr.values) != expected:
            note(
                "size-mismatch",
                where,
                f"{len(arr.values)} values, expected {expected} ({arr.set.size} x {arr.components})",
            )

    return ValidationReport(tuple(findings))


def transform_layout(arr: DataArray, target: str) -> DataArray:
    """Rewrite the flat value order for ``target`` layout; values unchanged."""
    if target not in LAYOUTS:
        raise ValueError(f"unknown layout {target!r}")
    if target == arr.layout:
        return arr
    if arr.layout == "aos":
        values = arr.values.reshape(arr.set.size, arr.components).T.ravel()
    else:
        values = arr.values.reshape(arr.components, arr.set.size).T.ravel()
    return DataArray(arr.name, arr.set, arr.components, values, target)


@dataclass(frozen=True)
class InverseIndex:
    """For each to-set element, the (from-element, slot) pairs referencing it.

    Pairs for point ``t`` occupy ``offsets[t]:offsets[t+1]`` of ``elems`` /
    ``slots``, sorted by (from-element, slot).
    """

    to_size: int
    offsets: np.ndarray
    elems: np.ndarray
    slots: np.ndarray

    def refs(self, t: int):
        lo, hi = self.offsets[t], self.offsets[t + 1]
        return list(zip(self.elems[lo:hi].tolist(), self.slots[lo:hi].tolist()))

    @property
    def pair_count(self) -> int:
        return len(self.elems)


def invert_mapping(m: Mapping) -> InverseIndex:
    """Invert a (valid) mapping into per-point reference lists."""
    flat = m.table.ravel()
    if len(flat) and (flat.min() < 0 or flat.max() >= m.to_set.size):
        raise ValueError(f"mapping {m.name!r} has out-of-range entries; validate first")
    # stable sort by point keeps (elem, slot) ascending within each point
    order = np.argsort(flat, kind="stable")
    n, arity = m.table.shape
    counts = np.bincount(flat, minlength=m.to_set.size)
    offsets = np.zeros(m.to_set.size + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return InverseIndex(
        to_size=m.to_set.size,
        offsets=offsets,
        elems=(order // arity).astype(np.int64),
        slots=(order % arity).astype(np.int64),
    )


def apply_permutation(mesh: Mesh, set_name: str, perm: Permutation) -> Mesh:
    """Renumber one set consistently across every mapping and data array.

    Element ``i`` becomes ``perm.forward[i]``: mapping rows move when the set
    is a from-set, mapping entries are relabelled when it is a to-set, and
    data arrays on the set are reordered.  Kernel results computed on the
    permuted mesh equal the original results after un-permuting outputs.
    """
    target = mesh.sets.get(set_name)
    if target is None:
        raise ValueError(f"no set named {set_name!r}")
    if len(perm) != target.size:
        raise ValueError(f"permutation length {len(perm)} != set size {target.size}")

    mappings = {}
    for m in mesh.mappings.values():
        table = m.table
        if m.from_set is target:
            table = table[perm.inverse]
        if m.to_set is target:
            table = perm.forward[table]
        mappings[m.name] = Mapping(m.name, m.from_set, m.to_set, table) if table is not m.table else m

    data = {}
    for arr in mesh.data.values():
        if arr.set is target:
            reordered = arr.view2d()[perm.inverse]
            values = reordered.ravel() if arr.layout == "aos" else reordered.T.ravel()
            data[arr.name] = DataArray(arr.name, arr.set, arr.components, values, arr.layout)
        else:
            data[arr.name] = arr

    return Mesh(sets=mesh.sets, mappings=mappings, data=data, meta=mesh.meta)
