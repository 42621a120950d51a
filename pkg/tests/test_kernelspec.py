import pytest

import meshplan as mp
from meshplan.bench_kernels import gen_quad2d
from meshplan.kernelspec import KernelArg, KernelSpec


def dummy_fn(inputs):
    return {}


class TestKernelSpecValidation:
    def test_read_and_increment_same_array_rejected(self):
        with pytest.raises(mp.KernelSpecError, match="read and incremented"):
            KernelSpec(
                name="bad",
                args=(
                    KernelArg("a", "res", "read", mapping="e2c"),
                    KernelArg("b", "res", "increment", mapping="e2c"),
                ),
                fn=dummy_fn,
            )

    def test_direct_increment_rejected(self):
        with pytest.raises(mp.KernelSpecError, match="indirect"):
            KernelSpec(name="bad", args=(KernelArg("a", "res", "increment"),), fn=dummy_fn)

    def test_indirect_write_rejected(self):
        with pytest.raises(mp.KernelSpecError, match="race"):
            KernelSpec(
                name="bad",
                args=(KernelArg("a", "res", "write", mapping="e2c"),),
                fn=dummy_fn,
            )

    def test_duplicate_arg_names_rejected(self):
        with pytest.raises(mp.KernelSpecError, match="duplicate"):
            KernelSpec(
                name="bad",
                args=(KernelArg("a", "q", "read"), KernelArg("a", "w", "read")),
                fn=dummy_fn,
            )

    def test_missing_array_caught_against_mesh(self):
        mesh = gen_quad2d(2, 2)
        spec = KernelSpec(
            name="ghost",
            args=(KernelArg("a", "nothere", "read"),),
            fn=dummy_fn,
        )
        with pytest.raises(mp.KernelSpecError, match="nothere"):
            spec.validate_against(mesh)

    def test_slot_range_checked(self):
        mesh = gen_quad2d(2, 2)
        spec = KernelSpec(
            name="slots",
            args=(KernelArg("a", "q", "read", mapping="e2c", slots=(0, 5)),),
            fn=dummy_fn,
        )
        with pytest.raises(mp.KernelSpecError, match="slots"):
            spec.validate_against(mesh)

    def test_signature_key_stable(self):
        spec = KernelSpec(
            name="k",
            args=(
                KernelArg("q", "q", "read", mapping="e2c"),
                KernelArg("res", "res", "increment", mapping="e2c"),
            ),
            fn=dummy_fn,
        )
        assert spec.signature_key() == "k|q:q:read:e2c:all|res:res:increment:e2c:all"

    def test_written_slots_by_mapping(self):
        mesh = gen_quad2d(2, 2)
        spec = KernelSpec(
            name="k",
            args=(KernelArg("res", "res", "increment", mapping="e2c", slots=(1,)),),
            fn=dummy_fn,
        )
        assert spec.written_slots_by_mapping(mesh) == {"e2c": (1,)}
