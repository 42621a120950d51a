"""Bijective index maps with both directions materialised."""

from dataclasses import dataclass

import numpy as np

from .errors import FileFormatError

_PERM_MAGIC = "meshplan-perm 1"


@dataclass(frozen=True)
class Permutation:
    """A bijection on ``0..n-1``.

    ``forward[old] = new`` and ``inverse[new] = old``; the two compose to the
    identity.  Instances are validated and immutable.
    """

    forward: np.ndarray
    inverse: np.ndarray

    def __post_init__(self):
        fwd = np.ascontiguousarray(self.forward, dtype=np.int64)
        inv = np.ascontiguousarray(self.inverse, dtype=np.int64)
        object.__setattr__(self, "forward", fwd)
        object.__setattr__(self, "inverse", inv)
        if len(fwd) != len(inv) or np.any(fwd[inv] != np.arange(len(fwd))):
            raise ValueError("forward/inverse are not mutually inverse bijections")
        fwd.setflags(write=False)
        inv.setflags(write=False)

    @classmethod
    def from_forward(cls, forward) -> "Permutation":
        forward = np.ascontiguousarray(forward, dtype=np.int64)
        n = len(forward)
        inverse = np.empty(n, dtype=np.int64)
        seen = np.zeros(n, dtype=bool)
        if n and (forward.min() < 0 or forward.max() >= n):
            raise ValueError("permutation entries out of range")
        seen[forward] = True
        if not seen.all():
            raise ValueError("permutation is not a bijection")
        inverse[forward] = np.arange(n)
        return cls(forward, inverse)

    @classmethod
    def from_order(cls, order) -> "Permutation":
        """Build from a visit order: ``order[k]`` is the old index placed at ``k``."""
        order = np.ascontiguousarray(order, dtype=np.int64)
        n = len(order)
        forward = np.empty(n, dtype=np.int64)
        forward[order] = np.arange(n)
        return cls.from_forward(forward)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        ar = np.arange(n, dtype=np.int64)
        return cls(ar, ar.copy())

    def __len__(self) -> int:
        return len(self.forward)

    def then(self, other: "Permutation") -> "Permutation":
        """Composition: apply ``self`` first, then ``other``."""
        return Permutation.from_forward(other.forward[self.forward])

    def inverted(self) -> "Permutation":
        return Permutation(self.inverse, self.forward)

    def is_identity(self) -> bool:
        return bool(np.all(self.forward == np.arange(len(self.forward))))


def save_permutation(perm: Permutation, path) -> None:
    """Write the forward array, one integer per line, behind a version line."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(_PERM_MAGIC + "\n")
        fh.write("\n".join(str(int(v)) for v in perm.forward))
        if len(perm):
            fh.write("\n")


def load_permutation(path) -> Permutation:
    """Read a permutation written by :func:`save_permutation`.

    Bare newline-separated integers (no version line) are accepted too.
    """
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if lines and lines[0].startswith("meshplan-perm"):
        if lines[0] != _PERM_MAGIC:
            raise FileFormatError(f"unsupported permutation version line: {lines[0]!r}")
        lines = lines[1:]
    try:
        forward = np.array([int(ln) for ln in lines], dtype=np.int64)
    except ValueError as exc:
        raise FileFormatError(f"bad permutation entry: {exc}") from None
    return Permutation.from_forward(forward)
