import numpy as np
import pytest

import meshplan as mp
from meshplan.bench_kernels import gen_hex3d, gen_quad2d


class TestRoundTrip:
    @pytest.mark.parametrize("dtype", ["f64", "f32", "i64", "i32"])
    def test_all_dtypes(self, tmp_path, dtype):
        mesh = gen_quad2d(5, 4, seed=3, dtype=dtype)
        path = tmp_path / "m.txt"
        mp.write_mesh(mesh, path)
        again = mp.read_mesh(path)
        assert again.meta["family"] == "quad2d"
        for name, arr in mesh.data.items():
            assert np.array_equal(again.data[name].values, arr.values)
            assert again.data[name].layout == arr.layout
        assert np.array_equal(again.mappings["e2c"].table, mesh.mappings["e2c"].table)

    def test_soa_layout_preserved(self, tmp_path):
        mesh = gen_quad2d(3, 3, seed=1)
        soa = mp.transform_layout(mesh.data["q"], "soa")
        mesh = mesh.with_data(soa)
        path = tmp_path / "m.txt"
        mp.write_mesh(mesh, path)
        again = mp.read_mesh(path)
        assert again.data["q"].layout == "soa"
        assert np.array_equal(again.data["q"].view2d(), mesh.data["q"].view2d())

    def test_hex_meta_dims(self, tmp_path):
        mesh = gen_hex3d(2, 3, 4, target="faces", seed=0)
        path = tmp_path / "m.txt"
        mp.write_mesh(mesh, path)
        again = mp.read_mesh(path)
        assert again.meta["dims"] == "2 3 4"

    def test_byte_deterministic(self, tmp_path):
        mesh = gen_quad2d(4, 4, seed=7)
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        mp.write_mesh(mesh, a)
        mp.write_mesh(mesh, b)
        assert a.read_bytes() == b.read_bytes()


class TestParsing:
    def test_legacy_file_without_version_line(self, tmp_path):
        path = tmp_path / "legacy.txt"
        path.write_text("sets 1\npts 2\ndata v pts 1 i64 aos\n5\n-3\n")
        mesh = mp.read_mesh(path)
        assert mesh.data["v"].values.tolist() == [5, -3]

    def test_bad_version_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("meshplan-mesh 99\nsets 0\n")
        with pytest.raises(mp.FileFormatError, match="version"):
            mp.read_mesh(path)

    def test_truncated_mapping_rejected(self, tmp_path):
        path = tmp_path / "trunc.txt"
        path.write_text("sets 2\ne 2\nc 3\nmapping m e c 2\n0 1\n")
        with pytest.raises(mp.FileFormatError, match="end of file"):
            mp.read_mesh(path)

    def test_bad_value_rejected(self, tmp_path):
        path = tmp_path / "val.txt"
        path.write_text("sets 1\np 1\ndata v p 1 f64 aos\nbogus\n")
        with pytest.raises(mp.FileFormatError):
            mp.read_mesh(path)

    def test_unknown_set_rejected(self, tmp_path):
        path = tmp_path / "ref.txt"
        path.write_text("sets 1\np 1\ndata v ghost 1 f64 aos\n0.0\n")
        with pytest.raises(mp.FileFormatError, match="unknown set"):
            mp.read_mesh(path)
