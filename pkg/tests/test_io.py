import json

import numpy as np
import pytest

from jointdr.errors import InputError
from jointdr.estimator import SampleSet
from jointdr.io import (
    load_samples,
    read_matrix_bin,
    read_matrix_csv,
    read_vector_csv,
    save_samples,
    write_matrix_bin,
    write_matrix_csv,
)


class TestCsv:
    def test_round_trip_exact(self, tmp_path):
        x = np.random.default_rng(0).standard_normal((4, 3)) * 1e5
        write_matrix_csv(tmp_path / "x.csv", x)
        np.testing.assert_array_equal(read_matrix_csv(tmp_path / "x.csv"), x)

    def test_format(self, tmp_path):
        write_matrix_csv(tmp_path / "x.csv", np.array([[1.0, 0.5], [-2.0, 3.0]]))
        assert (tmp_path / "x.csv").read_text() == "1,0.5\n-2,3\n"

    def test_single_row_stays_2d(self, tmp_path):
        (tmp_path / "r.csv").write_text("1,2,3\n")
        assert read_matrix_csv(tmp_path / "r.csv").shape == (1, 3)

    def test_vector_row_or_column(self, tmp_path):
        (tmp_path / "row.csv").write_text("1,2,3\n")
        (tmp_path / "col.csv").write_text("1\n2\n3\n")
        np.testing.assert_array_equal(read_vector_csv(tmp_path / "row.csv"), [1, 2, 3])
        np.testing.assert_array_equal(read_vector_csv(tmp_path / "col.csv"), [1, 2, 3])

    def test_vector_rejects_matrix(self, tmp_path):
        (tmp_path / "m.csv").write_text("1,2\n3,4\n")
        with pytest.raises(InputError):
            read_vector_csv(tmp_path / "m.csv")

    def test_bad_inputs(self, tmp_path):
        (tmp_path / "bad.csv").write_text("1,abc\n")
        with pytest.raises(InputError):
            read_matrix_csv(tmp_path / "bad.csv")
        with pytest.raises(InputError):
            read_matrix_csv(tmp_path / "missing.csv")


class TestBinary:
    def test_round_trip(self, tmp_path):
        x = np.arange(6.0).reshape(2, 3)
        write_matrix_bin(tmp_path / "x.bin", x)
        np.testing.assert_array_equal(read_matrix_bin(tmp_path / "x.bin"), x)

    def test_layout_is_column_major(self, tmp_path):
        write_matrix_bin(tmp_path / "x.bin", np.array([[1.0, 2.0], [3.0, 4.0]]))
        data = (tmp_path / "x.bin").read_bytes()
        assert data[:4] == b"JDRM"
        assert int.from_bytes(data[4:8], "little") == 1
        assert int.from_bytes(data[8:16], "little") == 2
        np.testing.assert_array_equal(np.frombuffer(data[24:], "<f8"), [1, 3, 2, 4])

    @pytest.mark.parametrize("mutate", [lambda d: b"XXXX" + d[4:], lambda d: d[:-8], lambda d: d[:10], lambda d: d[:4] + b"\x02\x00\x00\x00" + d[8:]])
    def test_corrupt(self, tmp_path, mutate):
        write_matrix_bin(tmp_path / "x.bin", np.eye(2))
        (tmp_path / "x.bin").write_bytes(mutate((tmp_path / "x.bin").read_bytes()))
        with pytest.raises(InputError):
            read_matrix_bin(tmp_path / "x.bin")

    def test_rejects_vectors(self, tmp_path):
        with pytest.raises(InputError):
            write_matrix_bin(tmp_path / "v.bin", np.ones(3))


class TestSampleSets:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        s = SampleSet(rng.standard_normal((5, 3)), rng.standard_normal((5, 2)), rng.standard_normal(5))
        save_samples(s, tmp_path / "set", {"seed": 4, "link": "bilinear_gaussian"})
        loaded, meta = load_samples(tmp_path / "set")
        np.testing.assert_array_equal(loaded.a, s.a)
        np.testing.assert_array_equal(loaded.y, s.y)
        assert meta == {"m": 5, "n1": 3, "n2": 2, "seed": 4, "link": "bilinear_gaussian"}

    def test_sidecar_mismatch(self, tmp_path):
        s = SampleSet(np.ones((3, 2)), np.ones((3, 2)), np.ones(3))
        save_samples(s, tmp_path)
        meta = json.loads((tmp_path / "samples.json").read_text())
        meta["n1"] = 7
        (tmp_path / "samples.json").write_text(json.dumps(meta))
        with pytest.raises(InputError):
            load_samples(tmp_path)
