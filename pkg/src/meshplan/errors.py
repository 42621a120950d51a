"""Exception hierarchy shared across the package.

The CLI maps these onto its exit codes: validation problems exit 2, race
faults 3, capacity faults 4, I/O and file-format problems 5.
"""


class MeshplanError(Exception):
    """Base class for all meshplan errors."""


class MeshValidationError(MeshplanError):
    """Invalid mesh, configuration or flag combination."""


class KernelSpecError(MeshplanError):
    """A kernel signature or its element function violated its contract."""


class RaceError(MeshplanError):
    """A plan would let two parallel writers touch the same data."""


class CapacityError(MeshplanError):
    """A plan exceeds a hardware limit (shared storage, block limits)."""


class FileFormatError(MeshplanError):
    """A mesh/plan/permutation file is malformed."""
