"""Shared fixtures: small meshes, kernels and a standard plan matrix."""

import numpy as np
import pytest

import meshplan as mp
from meshplan.bench_kernels import generate_mesh, kernel_for_mesh

# (family, dims, kernels) pairs exercised across the suite
SUITE_SPECS = [
    ("quad2d", (16, 16), ("flux", "face-flux")),
    ("tri2d", (10, 10), ("flux", "face-flux")),
    ("hex3d-nodes", (6, 6, 8), ("scatter8",)),
    ("hex3d-faces", (5, 5, 6), ("flux", "face-flux")),
]

REORDERS = ("none", "gps", "partition")
LAYOUTS = ("aos", "soa")


def suite_meshes(dtype="i64", seed=0):
    out = []
    for family, dims, kernels in SUITE_SPECS:
        mesh = generate_mesh(family, dims, seed=seed, dtype=dtype)
        for kname in kernels:
            out.append((mesh, kname))
    return out


@pytest.fixture(scope="session")
def int_suite():
    return suite_meshes(dtype="i64")


@pytest.fixture(scope="session")
def f64_suite():
    return suite_meshes(dtype="f64")


def build_plan(mesh, kernel, strategy, reorder, layout="aos", **kw):
    cfg = mp.PlanConfig(strategy=strategy, reorder=reorder, layout=layout, **kw)
    if strategy == "global":
        return mp.build_global_plan(mesh, kernel, cfg)
    return mp.build_hierarchical_plan(mesh, kernel, cfg)


def run_plan(plan, kernel):
    if isinstance(plan, mp.GlobalPlan):
        return mp.execute_global(plan, kernel)
    return mp.execute_hierarchical(plan, kernel)


def assert_oracle_equal(mesh, kernel_name, plan, result, rel_tol=1e-12):
    """Restored parallel output must match the serial oracle."""
    kernel = kernel_for_mesh(kernel_name, mesh)
    serial = mp.execute_serial(mesh, kernel)
    restored = plan.restore_data(result)
    for name, arr in serial.data.items():
        a = arr.view2d()
        b = restored.data[name].view2d()
        if arr.values.dtype.kind == "i":
            assert np.array_equal(a, b), f"{name}: integer outputs differ from serial"
        else:
            diff = np.abs(a - b)
            scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), np.finfo(np.float64).tiny)
            assert (diff <= rel_tol * scale).all(), f"{name}: beyond {rel_tol} relative"
