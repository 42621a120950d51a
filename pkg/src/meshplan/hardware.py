"""Per-multiprocessor hardware limits driving the occupancy estimate."""

import dataclasses
import json
from dataclasses import dataclass

from .errors import FileFormatError


@dataclass(frozen=True)
class HardwareDescriptor:
    """Resource limits of one streaming multiprocessor.

    ``reg_alloc_granularity`` is the register-file allocation unit applied
    per warp; ``base_alignment`` is the modelled alignment of every array's
    base address (128 keeps cache-line windows aligned to array starts).
    """

    name: str = "p100"
    shared_bytes_per_sm: int = 64 * 1024
    max_threads_per_sm: int = 2048
    max_blocks_per_sm: int = 32
    max_warps_per_sm: int = 64
    registers_per_sm: int = 65536
    max_threads_per_block: int = 1024
    max_registers_per_thread: int = 255
    warp_size: int = 32
    cache_line_bytes: int = 32
    reg_alloc_granularity: int = 256
    base_alignment: int = 128
    sm_count: int = 56

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if f.name == "name":
                continue
            if getattr(self, f.name) <= 0:
                raise ValueError(f"hardware field {f.name} must be positive")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "HardwareDescriptor":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise FileFormatError(f"unknown hardware fields: {sorted(unknown)}")
        return cls(**data)


P100 = HardwareDescriptor(name="p100", sm_count=56)
V100 = HardwareDescriptor(name="v100", sm_count=80)

PRESETS = {"p100": P100, "v100": V100}


def get_hardware(spec: str) -> HardwareDescriptor:
    """Resolve a preset name (``p100``, ``v100``) or a JSON descriptor path."""
    if spec in PRESETS:
        return PRESETS[spec]
    try:
        with open(spec, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError:
        raise
    except ValueError as exc:
        raise FileFormatError(f"{spec}: bad hardware JSON: {exc}") from None
    return HardwareDescriptor.from_dict(data)
