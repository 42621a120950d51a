"""Kernel signatures: which arrays a loop touches and how.

A kernel iterates one from-set.  Each argument names a data array and an
access mode; indirect arguments go through a mapping and may restrict the
slots they touch.  The element function is vectorised over a batch of
elements: it receives one read view per argument and returns the produced
values for every ``write``/``increment`` argument.

Contract of ``fn(inputs) -> outputs`` (dicts keyed by argument name):

* direct read input: ``(batch, components)`` view, possibly strided
  (component-contiguous storage shows up as a transposed view);
* indirect read input: ``(batch, n_slots, components)`` gathered copy;
* increment output: ``(batch, n_slots, components)`` array of addends;
* direct write output: ``(batch, components)``.

Inputs are non-writeable; outputs must match the array dtype exactly.  The
function must be pure and order-independent, which the model guarantees by
rejecting kernels that read an array they also increment.
"""

from dataclasses import dataclass
from typing import Callable

from .errors import KernelSpecError
from .mesh import Mesh

ACCESS_MODES = ("read", "write", "increment")


@dataclass(frozen=True)
class KernelArg:
    """One kernel argument: array, access mode, optional indirection."""

    name: str
    array: str
    mode: str
    mapping: str | None = None
    slots: tuple[int, ...] | None = None  # None = all slots of the mapping

    def __post_init__(self):
        if self.mode not in ACCESS_MODES:
            raise KernelSpecError(f"arg {self.name!r}: unknown access mode {self.mode!r}")
        if self.slots is not None:
            object.__setattr__(self, "slots", tuple(int(s) for s in self.slots))

    @property
    def indirect(self) -> bool:
        return self.mapping is not None


@dataclass(frozen=True)
class KernelSpec:
    """A named element loop over a from-set.

    ``regs_per_thread`` is the modelled register footprint used by the
    occupancy estimate.
    """

    name: str
    args: tuple
    fn: Callable
    regs_per_thread: int = 48

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        seen = set()
        for arg in self.args:
            if arg.name in seen:
                raise KernelSpecError(f"duplicate argument name {arg.name!r}")
            seen.add(arg.name)
            if arg.mode == "increment" and not arg.indirect:
                raise KernelSpecError(f"arg {arg.name!r}: increments must be indirect")
            if arg.mode == "write" and arg.indirect:
                raise KernelSpecError(
                    f"arg {arg.name!r}: indirect writes race unconditionally; use an increment"
                )
        incremented = {a.array for a in self.args if a.mode == "increment"}
        read = {a.array for a in self.args if a.mode == "read"}
        overlap = incremented & read
        if overlap:
            raise KernelSpecError(
                f"arrays {sorted(overlap)} both read and incremented; results would depend on element order"
            )

    @property
    def indirect_args(self) -> tuple:
        return tuple(a for a in self.args if a.indirect)

    @property
    def increment_args(self) -> tuple:
        return tuple(a for a in self.args if a.mode == "increment")

    @property
    def indirect_read_args(self) -> tuple:
        return tuple(a for a in self.args if a.indirect and a.mode == "read")

    @property
    def direct_args(self) -> tuple:
        return tuple(a for a in self.args if not a.indirect)

    def mapping_names(self) -> tuple:
        names = []
        for a in self.indirect_args:
            if a.mapping not in names:
                names.append(a.mapping)
        return tuple(names)

    def validate_against(self, mesh: Mesh) -> None:
        """Check that every array/mapping resolves and shares one from-set."""
        from_sets = set()
        for a in self.args:
            arr = mesh.data.get(a.array)
            if arr is None:
                raise KernelSpecError(f"kernel {self.name!r}: no data array {a.array!r} in mesh")
            if a.indirect:
                m = mesh.mappings.get(a.mapping)
                if m is None:
                    raise KernelSpecError(f"kernel {self.name!r}: no mapping {a.mapping!r} in mesh")
                if arr.set is not m.to_set:
                    raise KernelSpecError(
                        f"arg {a.name!r}: array {a.array!r} lives on {arr.set.name!r}, "
                        f"not on mapping to-set {m.to_set.name!r}"
                    )
                slots = a.slots if a.slots is not None else tuple(range(m.arity))
                if any(s < 0 or s >= m.arity for s in slots):
                    raise KernelSpecError(f"arg {a.name!r}: slots {slots} out of range for arity {m.arity}")
                from_sets.add(m.from_set.name)
            else:
                from_sets.add(arr.set.name)
        if len(from_sets) > 1:
            raise KernelSpecError(
                f"kernel {self.name!r}: arguments disagree on the iteration set: {sorted(from_sets)}"
            )
        if not from_sets:
            raise KernelSpecError(f"kernel {self.name!r}: no arguments")

    def iter_set_name(self, mesh: Mesh) -> str:
        for a in self.args:
            if a.indirect:
                return mesh.mappings[a.mapping].from_set.name
            return mesh.data[a.array].set.name
        raise KernelSpecError(f"kernel {self.name!r}: no arguments")

    def arg_slots(self, mesh: Mesh, arg: KernelArg) -> tuple:
        if not arg.indirect:
            return ()
        if arg.slots is not None:
            return arg.slots
        return tuple(range(mesh.mappings[arg.mapping].arity))

    def written_slots_by_mapping(self, mesh: Mesh) -> dict:
        """Union of written slots per mapping name, from the increment args."""
        out: dict[str, set] = {}
        for a in self.increment_args:
            out.setdefault(a.mapping, set()).update(self.arg_slots(mesh, a))
        return {k: tuple(sorted(v)) for k, v in out.items()}

    def signature_key(self) -> str:
        """Stable pairing key recorded in plans."""
        parts = [self.name]
        for a in self.args:
            parts.append(f"{a.name}:{a.array}:{a.mode}:{a.mapping or '-'}:{a.slots or 'all'}")
        return "|".join(parts)
