import json

import pytest

from meshplan.cli import main


def run_cli(*args) -> int:
    return main([str(a) for a in args])


@pytest.fixture()
def quad_mesh(tmp_path):
    path = tmp_path / "mesh.txt"
    assert run_cli("gen", "--family", "quad2d", "--dims", "12,12", "--seed", "3", "-o", path) == 0
    return path


class TestGen:
    def test_writes_mesh(self, tmp_path):
        out = tmp_path / "m.txt"
        assert run_cli("gen", "--family", "hex3d-faces", "--dims", "3,3,4", "-o", out) == 0
        assert out.exists()

    def test_bad_dims_is_validation_error(self, tmp_path, capsys):
        code = run_cli("gen", "--family", "quad2d", "--dims", "3,3,3", "-o", tmp_path / "x.txt")
        assert code == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "MeshValidationError"


class TestPlanRun:
    def test_plan_run_verify(self, tmp_path, quad_mesh):
        plan = tmp_path / "plan.json"
        assert run_cli(
            "plan", "--mesh", quad_mesh, "--kernel", "flux", "--strategy", "hier",
            "--reorder", "partition", "--block-size", "48", "-o", plan,
        ) == 0
        metrics = tmp_path / "metrics.json"
        result = tmp_path / "result.txt"
        assert run_cli(
            "run", "--mesh", quad_mesh, "--plan", plan, "--kernel", "flux",
            "--metrics", metrics, "-o", result,
        ) == 0
        data = json.loads(metrics.read_text())
        assert data["strategy"] == "hier"
        assert data["read_transactions"] > 0
        assert result.exists()

    def test_no_verify_skips_oracle(self, tmp_path, quad_mesh):
        plan = tmp_path / "plan.json"
        run_cli("plan", "--mesh", quad_mesh, "--kernel", "flux", "-o", plan)
        metrics = tmp_path / "m.json"
        assert run_cli(
            "run", "--mesh", quad_mesh, "--plan", plan, "--kernel", "flux",
            "--metrics", metrics, "--no-verify",
        ) == 0

    def test_structured_on_unstructured_exits_2(self, tmp_path, quad_mesh, capsys):
        code = run_cli(
            "plan", "--mesh", quad_mesh, "--kernel", "flux",
            "--reorder", "structured:2,2,2", "-o", tmp_path / "p.json",
        )
        assert code == 2
        assert json.loads(capsys.readouterr().err)["exit_code"] == 2

    def test_corrupt_plan_exits_3(self, tmp_path, quad_mesh, capsys):
        plan = tmp_path / "plan.json"
        run_cli("plan", "--mesh", quad_mesh, "--kernel", "flux", "--block-size", "32", "-o", plan)
        data = json.loads(plan.read_text())
        data["hier"]["thread_colours"] = [0] * len(data["hier"]["thread_colours"])
        plan.write_text(json.dumps(data))
        code = run_cli(
            "run", "--mesh", quad_mesh, "--plan", plan, "--kernel", "flux",
            "--metrics", tmp_path / "m.json",
        )
        assert code == 3
        assert json.loads(capsys.readouterr().err)["error"] == "RaceError"

    def test_capacity_exits_4(self, tmp_path, quad_mesh, capsys):
        hw = tmp_path / "tiny.json"
        hw.write_text(json.dumps({"name": "tiny", "shared_bytes_per_sm": 256}))
        code = run_cli(
            "plan", "--mesh", quad_mesh, "--kernel", "face-flux", "--hw", hw,
            "-o", tmp_path / "p.json",
        )
        assert code == 4
        assert json.loads(capsys.readouterr().err)["error"] == "CapacityError"

    def test_missing_file_exits_5(self, tmp_path, capsys):
        code = run_cli(
            "plan", "--mesh", tmp_path / "nope.txt", "--kernel", "flux", "-o", tmp_path / "p.json"
        )
        assert code == 5

    def test_saved_artifacts(self, tmp_path, quad_mesh):
        plan = tmp_path / "plan.json"
        perm = tmp_path / "perm.txt"
        part = tmp_path / "part.txt"
        assert run_cli(
            "plan", "--mesh", quad_mesh, "--kernel", "flux", "--reorder", "partition",
            "--block-size", "48", "-o", plan, "--save-permutation", perm, "--save-partition", part,
        ) == 0
        import meshplan as mp

        loaded = mp.load_permutation(perm)
        partition = mp.partition.load_partition(part)
        mesh = mp.read_mesh(quad_mesh)
        assert len(loaded) == mesh.sets["edges"].size
        assert len(partition.assignment) == mesh.sets["edges"].size


class TestCompare:
    def test_matrix_and_determinism(self, tmp_path, quad_mesh, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        svg = tmp_path / "cmp.svg"
        assert run_cli(
            "compare", "--mesh", quad_mesh, "--kernel", "flux", "--block-size", "48",
            "--reorders", "none,gps,partition", "--strategies", "hier", "--layouts", "aos",
            "-o", a, "--svg", svg,
        ) == 0
        table = capsys.readouterr().out
        assert "partition" in table
        assert run_cli(
            "compare", "--mesh", quad_mesh, "--kernel", "flux", "--block-size", "48",
            "--reorders", "none,gps,partition", "--strategies", "hier", "--layouts", "aos",
            "-o", b,
        ) == 0
        assert a.read_bytes() == b.read_bytes()
        assert svg.read_text().startswith("<svg")

    def test_partition_row_has_max_reuse(self, tmp_path):
        mesh = tmp_path / "mesh.txt"
        run_cli("gen", "--family", "quad2d", "--dims", "32,32", "-o", mesh)
        out = tmp_path / "cmp.csv"
        assert run_cli(
            "compare", "--mesh", mesh, "--kernel", "flux", "--strategies", "hier",
            "--reorders", "none,gps,partition", "--layouts", "aos", "-o", out,
        ) == 0
        lines = out.read_text().splitlines()
        header = lines[0].split(",")
        rows = [dict(zip(header, ln.split(","))) for ln in lines[1:]]
        reuse = {r["reorder"]: float(r["reuse_factor"]) for r in rows}
        assert max(reuse, key=reuse.get) == "partition"


class TestHeavyKernelVerification:
    @pytest.mark.parametrize("seed", [4, 11, 23])
    def test_heavy_kernel_survives_verification(self, tmp_path, seed):
        # square-root-rich arithmetic makes sums inexact; ulp-level increment
        # reassociation must not trip the oracle check
        mesh = tmp_path / "mesh.txt"
        assert run_cli(
            "gen", "--family", "hex3d-faces", "--dims", "5,5,5", "--seed", seed, "-o", mesh
        ) == 0
        plan = tmp_path / "plan.json"
        assert run_cli(
            "plan", "--mesh", mesh, "--kernel", "face-flux-heavy", "--reorder", "partition",
            "--block-size", "96", "--staging", "increment-only", "-o", plan,
        ) == 0
        assert run_cli(
            "run", "--mesh", mesh, "--plan", plan, "--kernel", "face-flux-heavy",
            "--metrics", tmp_path / "m.json",
        ) == 0
