"""Randomised whole-pipeline property: any valid mesh + kernel shape must
plan, execute race-free, and match the serial oracle bit for bit."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

import meshplan as mp
from meshplan.kernelspec import KernelArg, KernelSpec
from meshplan.mesh import DataArray, Mapping, Mesh, MeshSet

from conftest import build_plan, run_plan


@st.composite
def random_mesh_and_kernel(draw):
    n_elems = draw(st.integers(1, 40))
    n_points = draw(st.integers(1, 30))
    arity = draw(st.integers(1, 4))
    comps = draw(st.integers(1, 3))
    seed = draw(st.integers(0, 2**31 - 1))
    with_read = draw(st.booleans())
    rng = np.random.default_rng(seed)

    elems = MeshSet("elems", n_elems)
    points = MeshSet("points", n_points)
    # duplicate entries within a row are allowed and must be handled
    table = rng.integers(0, n_points, (n_elems, arity))
    mapping = Mapping("m", elems, points, table)
    data = [
        DataArray("pv", points, comps, rng.integers(-6, 7, n_points * comps).astype(np.int64), "aos"),
        DataArray("acc", points, comps, np.zeros(n_points * comps, dtype=np.int64), "aos"),
        DataArray("ev", elems, 2, rng.integers(-6, 7, n_elems * 2).astype(np.int64), "aos"),
    ]
    mesh = Mesh.build(sets=[elems, points], mappings=[mapping], data=data)

    def fn(inputs):
        ev = inputs["ev"]
        base = ev[:, 0:1, None] + np.zeros((1, arity, comps), dtype=np.int64)
        if with_read:
            base = base + inputs["pv"] * ev[:, 1:2, None]
        return {"acc": base}

    args = [KernelArg("ev", "ev", "read")]
    if with_read:
        args.insert(0, KernelArg("pv", "pv", "read", mapping="m"))
    args.append(KernelArg("acc", "acc", "increment", mapping="m"))
    kernel = KernelSpec(name="rand", args=tuple(args), fn=fn)
    return mesh, kernel, draw(st.sampled_from(["global", "hier"])), draw(
        st.sampled_from(["none", "gps", "partition"])
    )


@settings(max_examples=40, deadline=None)
@given(case=random_mesh_and_kernel())
def test_random_pipeline_oracle_equal(case):
    mesh, kernel, strategy, reorder = case
    serial = mp.execute_serial(mesh, kernel)
    plan = build_plan(mesh, kernel, strategy, reorder, block_size=16)
    result, report = run_plan(plan, kernel)
    restored = plan.restore_data(result)
    assert np.array_equal(restored.data["acc"].view2d(), serial.data["acc"].view2d())
    assert report.read_transactions > 0
    if strategy == "hier":
        assert np.array_equal(report.sync_counts, plan.thread_colour_counts + 2)
