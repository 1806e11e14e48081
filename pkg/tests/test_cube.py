"""Core data structures, the on-disk format, flattening, subsampling."""

import json
import os

import numpy as np
import pytest

from tfscope.cube import (
    DataCube,
    SampleMatrix,
    StandardizationSpec,
    flatten,
    load_cube,
    rng_from_seed,
    save_cube,
    subsample,
    unflatten,
)
from tfscope.errors import DataFormatError, DegenerateDataError


def _small_cube(ny=4, nx=5, nt=6, nvars=2, seed=3, mask=None):
    rng = rng_from_seed(seed)
    values = rng.standard_normal((ny, nx, nt, nvars)).astype(np.float32)
    if mask is None:
        mask = np.ones((ny, nx), dtype=bool)
    return DataCube(values=values, mask=mask)


class TestRng:
    def test_same_seed_same_stream(self):
        a = rng_from_seed(7).standard_normal(10)
        b = rng_from_seed(7).standard_normal(10)
        np.testing.assert_array_equal(a, b)

    def test_different_seeds_differ(self):
        a = rng_from_seed(7).standard_normal(10)
        b = rng_from_seed(8).standard_normal(10)
        assert not np.array_equal(a, b)

    def test_counter_based_generator(self):
        # the generator is Philox so streams are seedable and jumpable
        assert isinstance(rng_from_seed(0).bit_generator, np.random.Philox)

    def test_negative_and_huge_seeds_accepted(self):
        rng_from_seed(-1).standard_normal(1)
        rng_from_seed(2**70).standard_normal(1)


class TestDataCube:
    def test_float32_storage(self):
        cube = _small_cube()
        assert cube.values.dtype == np.float32

    def test_dims(self):
        cube = _small_cube(ny=4, nx=5, nt=6, nvars=2)
        assert (cube.ny, cube.nx, cube.nt, cube.nvars) == (4, 5, 6, 2)
        assert cube.n_valid == 20

    def test_bad_shapes_rejected(self):
        with pytest.raises(ValueError):
            DataCube(values=np.zeros((3, 3, 4)), mask=np.ones((3, 3), dtype=bool))
        with pytest.raises(ValueError):
            DataCube(
                values=np.zeros((3, 3, 4, 1), dtype=np.float32),
                mask=np.ones((2, 3), dtype=bool),
            )


class TestFileFormat:
    def test_round_trip_bit_exact(self, tmp_path):
        mask = np.ones((4, 5), dtype=bool)
        mask[0, 0] = False
        cube = _small_cube(mask=mask)
        path = str(tmp_path / "c.json")
        save_cube(cube, path)
        back = load_cube(path)
        np.testing.assert_array_equal(back.values, cube.values)
        np.testing.assert_array_equal(back.mask, cube.mask)

    def test_resave_byte_identical(self, tmp_path):
        cube = _small_cube()
        (tmp_path / "one").mkdir()
        (tmp_path / "two").mkdir()
        save_cube(cube, str(tmp_path / "one" / "c.json"))
        save_cube(cube, str(tmp_path / "two" / "c.json"))
        for name in ("c.json", "c.f32", "c.mask"):
            with open(str(tmp_path / "one" / name), "rb") as f1, open(
                str(tmp_path / "two" / name), "rb"
            ) as f2:
                assert f1.read() == f2.read()

    def test_payload_is_little_endian_float32(self, tmp_path):
        cube = _small_cube(ny=2, nx=2, nt=3, nvars=1)
        save_cube(cube, str(tmp_path / "c.json"))
        raw = np.fromfile(str(tmp_path / "c.f32"), dtype="<f4")
        np.testing.assert_array_equal(raw.reshape(cube.values.shape), cube.values)

    def test_missing_header(self, tmp_path):
        with pytest.raises(DataFormatError):
            load_cube(str(tmp_path / "nope.json"))

    def test_size_mismatch(self, tmp_path):
        cube = _small_cube()
        path = str(tmp_path / "c.json")
        save_cube(cube, path)
        with open(str(tmp_path / "c.f32"), "ab") as fh:
            fh.write(b"\x00\x00\x00\x00")
        with pytest.raises(DataFormatError):
            load_cube(path)

    def test_corrupt_header_json(self, tmp_path):
        path = str(tmp_path / "c.json")
        with open(path, "w") as fh:
            fh.write("{not json")
        with pytest.raises(DataFormatError):
            load_cube(path)

    def test_nonfinite_under_valid_mask_rejected(self, tmp_path):
        cube = _small_cube(ny=2, nx=2, nt=3, nvars=1)
        path = str(tmp_path / "c.json")
        save_cube(cube, path)
        raw = np.fromfile(str(tmp_path / "c.f32"), dtype="<f4")
        raw[0] = np.nan
        raw.tofile(str(tmp_path / "c.f32"))
        with pytest.raises(DataFormatError):
            load_cube(path)

    def test_nonfinite_under_masked_cell_tolerated(self, tmp_path):
        mask = np.ones((2, 2), dtype=bool)
        mask[0, 0] = False
        cube = _small_cube(ny=2, nx=2, nt=3, nvars=1, mask=mask)
        path = str(tmp_path / "c.json")
        save_cube(cube, path)
        raw = np.fromfile(str(tmp_path / "c.f32"), dtype="<f4")
        raw[0] = np.nan  # first cell is masked out
        raw.tofile(str(tmp_path / "c.f32"))
        back = load_cube(path)
        assert back.n_valid == 3

    def test_absent_mask_means_all_valid(self, tmp_path):
        cube = _small_cube(ny=2, nx=2, nt=3, nvars=1)
        path = str(tmp_path / "c.json")
        save_cube(cube, path)
        with open(path) as fh:
            header = json.load(fh)
        header["mask"] = None
        with open(path, "w") as fh:
            json.dump(header, fh)
        os.remove(str(tmp_path / "c.mask"))
        assert load_cube(path).n_valid == 4


class TestFlatten:
    def test_row_major_order_and_feature_layout(self):
        cube = _small_cube(ny=2, nx=3, nt=4, nvars=2)
        m = flatten(cube, StandardizationSpec(mode="none"))
        assert m.data.shape == (6, 8)
        np.testing.assert_array_equal(
            m.index_map, [[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [1, 2]]
        )
        # column t*nvars + v is variable v at step t
        np.testing.assert_allclose(
            m.data[3], cube.values[1, 0].reshape(-1), rtol=0, atol=0
        )

    def test_masked_cells_skipped(self):
        mask = np.ones((2, 3), dtype=bool)
        mask[0, 1] = False
        cube = _small_cube(ny=2, nx=3, nt=4, nvars=1, mask=mask)
        m = flatten(cube, StandardizationSpec(mode="none"))
        assert m.n_samples == 5
        assert [tuple(r) for r in m.index_map] == [(0, 0), (0, 2), (1, 0), (1, 1), (1, 2)]

    def test_zscore_pooled_per_variable(self):
        cube = _small_cube(ny=3, nx=3, nt=5, nvars=2)
        m = flatten(cube, StandardizationSpec(mode="per-variable-zscore"))
        for v in range(2):
            col = m.data[:, v::2]
            assert abs(col.mean()) < 1e-12
            assert abs(col.std() - 1.0) < 1e-12
        # the spec actually applied is recorded on the matrix
        assert m.standardization.mode == "per-variable-zscore"
        assert m.standardization.offsets is not None
        assert len(m.standardization.offsets) == 2

    def test_zscore_reuses_recorded_constants(self):
        cube = _small_cube(ny=3, nx=3, nt=5, nvars=1)
        m = flatten(cube, StandardizationSpec(mode="per-variable-zscore"))
        again = flatten(cube, m.standardization)
        np.testing.assert_array_equal(again.data, m.data)

    def test_zero_variance_variable_raises(self):
        values = np.ones((2, 2, 3, 1), dtype=np.float32)
        cube = DataCube(values=values, mask=np.ones((2, 2), dtype=bool))
        with pytest.raises(DegenerateDataError):
            flatten(cube, StandardizationSpec(mode="per-variable-zscore"))

    def test_all_masked_raises(self):
        cube = _small_cube(ny=2, nx=2, nt=3, nvars=1, mask=np.zeros((2, 2), dtype=bool))
        with pytest.raises(DegenerateDataError):
            flatten(cube)

    def test_unflatten_round_trip(self):
        cube = _small_cube(ny=2, nx=3, nt=4, nvars=2)
        m = flatten(cube, StandardizationSpec(mode="none"))
        series = unflatten(m, 4)
        np.testing.assert_allclose(series, cube.values[1, 1], rtol=0, atol=0)

    def test_linear_ids(self):
        cube = _small_cube(ny=2, nx=3, nt=4, nvars=1)
        m = flatten(cube, StandardizationSpec(mode="none"))
        np.testing.assert_array_equal(m.linear_ids(3), [0, 1, 2, 3, 4, 5])


class TestSubsample:
    def _matrix(self, n=100, f=4):
        rng = rng_from_seed(1)
        data = rng.standard_normal((n, f))
        im = np.column_stack([np.arange(n) // 10, np.arange(n) % 10])
        return SampleMatrix(data=data, index_map=im, nt=f, nvars=1)

    def test_returns_input_when_it_fits(self):
        m = self._matrix(n=50)
        assert subsample(m, 50, 0) is m
        assert subsample(m, 99, 0) is m

    def test_deterministic(self):
        m = self._matrix()
        a = subsample(m, 30, 5)
        b = subsample(m, 30, 5)
        np.testing.assert_array_equal(a.data, b.data)
        np.testing.assert_array_equal(a.index_map, b.index_map)

    def test_seed_changes_selection(self):
        m = self._matrix()
        a = subsample(m, 30, 5)
        b = subsample(m, 30, 6)
        assert not np.array_equal(a.index_map, b.index_map)

    def test_canonical_order_preserved(self):
        m = self._matrix()
        s = subsample(m, 30, 5)
        lids = s.linear_ids(10)
        assert np.all(np.diff(lids) > 0)

    def test_rows_kept_intact(self):
        m = self._matrix()
        s = subsample(m, 30, 5)
        full = {tuple(r): row for r, row in zip(m.index_map, m.data)}
        for r, row in zip(s.index_map, s.data):
            np.testing.assert_array_equal(row, full[tuple(r)])

    def test_bad_cap(self):
        with pytest.raises(ValueError):
            subsample(self._matrix(), 0, 0)
