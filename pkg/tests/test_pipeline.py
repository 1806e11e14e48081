"""Joint characterization, separability statistic, and exports."""

import json
import os

import numpy as np
import pytest

from tfscope.cube import rng_from_seed
from tfscope.errors import DegenerateDataError
from tfscope.pipeline import (
    CharacterizationConfig,
    characterize,
    config_from_dict,
    declared_export_files,
    export_characterization,
    export_tfs,
    render_map,
    transformed_divergence,
)
from tfscope.synth import generate_toy_cube
from tfscope.tsne import TsneParams


def _small_config(**overrides):
    base = dict(
        subsample_cap=100,
        subsample_seed=0,
        pca_k=6,
        le_k=8,
        tsne=TsneParams(perplexity=8.0, max_iter=150, early_exaggeration_iters=50, seed=0),
        tsne_runs=2,
    )
    base.update(overrides)
    return CharacterizationConfig(**base)


@pytest.fixture(scope="module")
def small_cube():
    cube, _ = generate_toy_cube(12, 12, 60, seed=1)
    return cube


@pytest.fixture(scope="module")
def small_result(small_cube):
    return characterize(small_cube, _small_config())


class TestConfig:
    def test_defaults_valid(self):
        cfg = CharacterizationConfig()
        assert cfg.standardization == "per-variable-zscore"
        assert cfg.subsample_cap == 5000

    def test_round_trip(self):
        cfg = _small_config(le_normalization="symmetric", rgb_dims=(0, 2, 1))
        assert config_from_dict(cfg.to_dict()) == cfg

    def test_round_trip_json(self):
        cfg = _small_config()
        assert config_from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            config_from_dict({"subsample_cap": 10, "bogus": 1})

    def test_unknown_tsne_key_rejected(self):
        with pytest.raises(ValueError, match="unknown tsne keys"):
            config_from_dict({"tsne": {"perplexity": 5.0, "momentum": 0.8}})

    def test_tsne_must_be_object(self):
        with pytest.raises(ValueError, match="must be an object"):
            config_from_dict({"tsne": 30.0})

    def test_non_dict_rejected(self):
        with pytest.raises(ValueError):
            config_from_dict([1, 2])

    def test_validation(self):
        with pytest.raises(ValueError):
            CharacterizationConfig(standardization="whiten")
        with pytest.raises(ValueError):
            CharacterizationConfig(subsample_cap=0)
        with pytest.raises(ValueError):
            CharacterizationConfig(subsample_cap=30_000)
        with pytest.raises(ValueError):
            CharacterizationConfig(tsne_runs=1)
        with pytest.raises(ValueError):
            CharacterizationConfig(rgb_dims=(0, 1))
        with pytest.raises(ValueError):
            CharacterizationConfig(le_normalization="random-walk")


class TestCharacterize:
    def test_shared_subsample(self, small_result):
        n = small_result.matrix.n_samples
        assert n == 100
        assert small_result.pca.scores.shape[0] == n
        assert small_result.le.coordinates.shape[0] == n
        assert small_result.pctsne.stacked_scores.shape[0] == n
        assert small_result.matrix.index_map.shape == (n, 2)

    def test_timings_recorded(self, small_result):
        assert set(small_result.timings) == {"pca", "le", "pctsne"}
        assert all(v >= 0 for v in small_result.timings.values())

    def test_deterministic(self, small_cube, small_result):
        again = characterize(small_cube, _small_config())
        np.testing.assert_array_equal(again.pca.scores, small_result.pca.scores)
        np.testing.assert_array_equal(again.le.coordinates, small_result.le.coordinates)
        np.testing.assert_array_equal(
            again.pctsne.stacked_scores, small_result.pctsne.stacked_scores
        )

    def test_failure_names_stage(self, small_cube):
        # perplexity far beyond (n - 1) / 3 rejects inside the pctsne stage
        cfg = _small_config(tsne=TsneParams(perplexity=90.0, seed=0))
        with pytest.raises(ValueError, match="^pctsne: "):
            characterize(small_cube, cfg)


class TestTransformedDivergence:
    def test_identical_distributions_low(self):
        rng = rng_from_seed(30)
        coords = rng.standard_normal((600, 2))
        labels = np.array(["a"] * 300 + ["b"] * 300)
        rep = transformed_divergence(coords, labels)
        assert rep.pair("a", "b") < 0.2

    def test_far_separation_saturates(self):
        rng = rng_from_seed(31)
        a = rng.standard_normal((200, 2))
        b = rng.standard_normal((200, 2)) + np.array([50.0, 0.0])
        rep = transformed_divergence(np.vstack([a, b]), np.array([0] * 200 + [1] * 200))
        assert rep.pair(0, 1) > 1.99
        assert rep.pair(0, 1) <= 2.0

    def test_known_one_dimensional_value(self):
        # equal variances, means 4 apart, var 2: D = 8, TD = 2(1 - e^-1)
        coords = np.array([[-1.0], [1.0], [3.0], [5.0]])
        labels = np.array(["p", "p", "q", "q"])
        rep = transformed_divergence(coords, labels)
        expect = 2.0 * (1.0 - np.exp(-1.0))
        assert rep.pair("p", "q") == pytest.approx(expect, rel=1e-6)

    def test_affine_invariance(self):
        rng = rng_from_seed(32)
        coords = rng.standard_normal((400, 3))
        coords[200:] += np.array([2.0, -1.0, 0.5])
        labels = np.array([0] * 200 + [1] * 200)
        base = transformed_divergence(coords, labels).pair(0, 1)
        a = rng.standard_normal((3, 3)) + 3.0 * np.eye(3)
        mapped = coords @ a.T + np.array([5.0, -7.0, 1.0])
        moved = transformed_divergence(mapped, labels).pair(0, 1)
        assert moved == pytest.approx(base, rel=1e-5)

    def test_matrix_symmetric_zero_diagonal(self):
        rng = rng_from_seed(33)
        coords = rng.standard_normal((90, 2))
        labels = np.repeat([0, 1, 2], 30)
        rep = transformed_divergence(coords, labels)
        np.testing.assert_array_equal(rep.td, rep.td.T)
        assert np.all(np.diag(rep.td) == 0.0)
        assert rep.classes == (0, 1, 2)

    def test_small_class_rejected(self):
        coords = np.zeros((5, 2))
        coords[:, 0] = np.arange(5)
        labels = np.array(["a", "a", "a", "b", "b"])  # b has 2 < d + 1
        with pytest.raises(DegenerateDataError):
            transformed_divergence(coords, labels)

    def test_needs_two_classes(self):
        with pytest.raises(ValueError):
            transformed_divergence(np.zeros((4, 1)), np.zeros(4))

    def test_label_length_checked(self):
        with pytest.raises(ValueError):
            transformed_divergence(np.zeros((4, 1)), np.zeros(3))


class TestExportTfs:
    def test_format(self, tmp_path):
        coords = np.array([[1.5, -2.25], [0.125, 3.0]])
        im = np.array([[4, 7], [9, 2]])
        path = str(tmp_path / "emb.csv")
        export_tfs(coords, im, path, method="pca", params={"k": 2}, seed=5)
        raw = open(path, "rb").read()
        assert raw == b"sample_id,y,x,dim1,dim2\r\n0,4,7,1.5,-2.25\r\n1,9,2,0.125,3\r\n"

    def test_sidecar(self, tmp_path):
        path = str(tmp_path / "emb.csv")
        export_tfs(
            np.zeros((1, 1)),
            np.zeros((1, 2), dtype=int),
            path,
            method="le",
            params={"d": 1},
            seed=0,
            eigenvalues=[0.5],
        )
        raw = open(str(tmp_path / "emb.meta.json"), "rb").read()
        assert raw.endswith(b"\n")
        meta = json.loads(raw)
        assert meta == {
            "method": "le",
            "params": {"d": 1},
            "seed": 0,
            "eigenvalues": [0.5],
            "variance_fractions": None,
        }
        assert raw == json.dumps(meta, sort_keys=True, separators=(",", ":")).encode() + b"\n"


class TestRenderMap:
    def test_pgm_layout(self, tmp_path):
        im = np.array([[0, 0], [0, 1], [1, 0], [1, 1]])
        path = str(tmp_path / "m.pgm")
        render_map(np.array([0.0, 1.0, 2.0, 3.0]), im, 2, 2, path)
        raw = open(path, "rb").read()
        assert raw.startswith(b"P5\n2 2\n255\n")
        assert len(raw) == len(b"P5\n2 2\n255\n") + 4

    def test_ppm_layout(self, tmp_path):
        im = np.array([[0, 0], [0, 1]])
        path = str(tmp_path / "m.ppm")
        render_map(rng_from_seed(0).standard_normal((2, 3)), im, 1, 2, path)
        raw = open(path, "rb").read()
        assert raw.startswith(b"P6\n2 1\n255\n")
        assert len(raw) == len(b"P6\n2 1\n255\n") + 6

    def test_constant_maps_to_128(self, tmp_path):
        im = np.array([[0, 0], [0, 1], [0, 2]])
        path = str(tmp_path / "m.pgm")
        render_map(np.full(3, 7.5), im, 1, 3, path)
        payload = open(path, "rb").read()[len(b"P5\n3 1\n255\n") :]
        assert payload == bytes([128, 128, 128])

    def test_stretch_hits_extremes(self, tmp_path):
        vals = np.linspace(0.0, 1.0, 100)
        im = np.column_stack([np.zeros(100, dtype=int), np.arange(100)])
        path = str(tmp_path / "m.pgm")
        render_map(vals, im, 1, 100, path)
        payload = np.frombuffer(open(path, "rb").read()[len(b"P5\n100 1\n255\n") :], np.uint8)
        assert payload[0] == 0 and payload[-1] == 255
        assert np.all(np.diff(payload.astype(int)) >= 0)

    def test_unsampled_cells_black(self, tmp_path):
        im = np.array([[0, 0]])
        path = str(tmp_path / "m.pgm")
        render_map(np.array([5.0]), im, 2, 2, path)
        payload = open(path, "rb").read()[len(b"P5\n2 2\n255\n") :]
        assert payload[1:] == b"\x00\x00\x00"

    def test_rejects_bad_input(self, tmp_path):
        path = str(tmp_path / "m.pgm")
        with pytest.raises(ValueError):
            render_map(np.array([np.nan]), np.array([[0, 0]]), 1, 1, path)
        with pytest.raises(ValueError):
            render_map(np.zeros((2, 2)), np.array([[0, 0], [0, 1]]), 1, 2, path)


class TestExportCharacterization:
    def test_all_declared_files_written(self, small_result, tmp_path):
        out = str(tmp_path / "out")
        files = export_characterization(small_result, out, 12, 12)
        declared = declared_export_files(small_result.config)
        assert files == declared
        for name in declared:
            assert os.path.getsize(os.path.join(out, name)) > 0
        # defaults: rgb dims (0,1,2) fit pca_k=6 but not le_d=2
        assert "pca_rgb.ppm" in files
        assert "le_rgb.ppm" not in files

    def test_config_json_content(self, small_result, tmp_path):
        out = str(tmp_path / "out")
        export_characterization(small_result, out, 12, 12)
        raw = open(os.path.join(out, "config.json"), "rb").read()
        expect = small_result.config.to_dict()
        assert raw == json.dumps(expect, sort_keys=True, separators=(",", ":")).encode() + b"\n"

    def test_export_deterministic(self, small_result, tmp_path):
        a = str(tmp_path / "a")
        b = str(tmp_path / "b")
        export_characterization(small_result, a, 12, 12)
        export_characterization(small_result, b, 12, 12)
        for name in declared_export_files(small_result.config):
            with open(os.path.join(a, name), "rb") as fa, open(os.path.join(b, name), "rb") as fb:
                assert fa.read() == fb.read(), name

    def test_sample_ids_are_row_indices(self, small_result, tmp_path):
        out = str(tmp_path / "out")
        export_characterization(small_result, out, 12, 12)
        lines = open(os.path.join(out, "le.csv")).read().splitlines()
        ids = [int(l.split(",")[0]) for l in lines[1:]]
        assert ids == list(range(small_result.matrix.n_samples))

    def test_le_sidecar_params(self, small_result, tmp_path):
        out = str(tmp_path / "out")
        export_characterization(small_result, out, 12, 12)
        meta = json.load(open(os.path.join(out, "le.meta.json")))
        assert meta["params"]["k_neighbors"] == 8
        assert meta["params"]["component_count"] >= 1
        assert isinstance(meta["params"]["repairs"], list)
        assert meta["eigenvalues"] is not None
