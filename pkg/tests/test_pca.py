"""PC/EOF decomposition: dual routes, reconstruction, projection."""

import numpy as np
import pytest
from scipy.linalg import subspace_angles

from tfscope.cube import SampleMatrix, rng_from_seed
from tfscope.pca import pca_eof, pca_eof_svd, project, reconstruct


def _random_matrix(n, p, seed):
    rng = rng_from_seed(seed)
    base = rng.standard_normal((n, p))
    # induce a decaying spectrum so leading components are well separated
    scale = np.exp(-np.arange(p) / 3.0)
    return base * scale


class TestRoutes:
    def test_covariance_vs_svd_eigenvalues(self):
        for seed in range(10):
            n = int(rng_from_seed(seed).integers(20, 200))
            p = int(rng_from_seed(seed + 100).integers(3, 30))
            x = _random_matrix(n, p, seed)
            k = min(5, p)
            a = pca_eof(x, k)
            b = pca_eof_svd(x, k)
            np.testing.assert_allclose(a.eigenvalues, b.eigenvalues, rtol=1e-8, atol=1e-12)

    def test_covariance_vs_svd_subspace(self):
        for seed in range(10):
            x = _random_matrix(100, 12, seed + 50)
            a = pca_eof(x, 4)
            b = pca_eof_svd(x, 4)
            angles = subspace_angles(a.eofs.T, b.eofs.T)
            assert np.max(angles) < 1e-6

    def test_scores_match_projection_of_centered_data(self):
        x = _random_matrix(80, 10, 1)
        d = pca_eof(x, 3)
        np.testing.assert_allclose(d.scores, (x - d.mean) @ d.eofs.T, atol=1e-10)

    def test_eofs_orthonormal(self):
        d = pca_eof(_random_matrix(60, 8, 2), 5)
        np.testing.assert_allclose(d.eofs @ d.eofs.T, np.eye(5), atol=1e-10)

    def test_analytic_two_dim_case(self):
        # points on a line y = 2x: one positive eigenvalue, fraction 1
        t = np.linspace(-1, 1, 50)
        x = np.column_stack([t, 2 * t])
        d = pca_eof(x, 2)
        assert d.variance_fractions[0] == pytest.approx(1.0, abs=1e-12)
        assert d.eigenvalues[1] == pytest.approx(0.0, abs=1e-12)
        direction = d.eofs[0] / np.linalg.norm(d.eofs[0])
        np.testing.assert_allclose(np.abs(direction), [1, 2] / np.sqrt(5), atol=1e-12)


class TestContracts:
    def test_variance_fractions_sum_to_one_at_full_rank(self):
        x = _random_matrix(40, 6, 3)
        d = pca_eof(x, 6)
        assert d.variance_fractions.sum() == pytest.approx(1.0, abs=1e-10)

    def test_eigenvalues_sorted_descending_nonnegative(self):
        d = pca_eof(_random_matrix(50, 9, 4), 9)
        assert np.all(np.diff(d.eigenvalues) <= 1e-12)
        assert np.all(d.eigenvalues >= 0)

    def test_sign_pinned_largest_loading_positive(self):
        d = pca_eof(_random_matrix(50, 9, 5), 4)
        for row in d.eofs:
            assert row[np.argmax(np.abs(row))] > 0

    def test_sign_pinning_makes_decomposition_deterministic(self):
        x = _random_matrix(60, 7, 6)
        a = pca_eof(x, 3)
        b = pca_eof(x, 3)
        np.testing.assert_array_equal(a.eofs, b.eofs)
        np.testing.assert_array_equal(a.scores, b.scores)

    def test_constant_matrix_degenerates_to_zero_fractions(self):
        x = np.ones((20, 4))
        d = pca_eof(x, 2)
        np.testing.assert_allclose(d.variance_fractions, 0.0, atol=0)
        np.testing.assert_allclose(d.eigenvalues, 0.0, atol=1e-12)

    def test_k_out_of_range(self):
        x = _random_matrix(10, 4, 0)
        with pytest.raises(ValueError):
            pca_eof(x, 0)
        with pytest.raises(ValueError):
            pca_eof(x, 5)

    def test_accepts_sample_matrix(self):
        data = _random_matrix(30, 6, 7)
        im = np.column_stack([np.arange(30), np.zeros(30, dtype=int)])
        m = SampleMatrix(data=data, index_map=im, nt=6, nvars=1)
        d = pca_eof(m, 2)
        np.testing.assert_allclose(d.scores, pca_eof(data, 2).scores, atol=0)


class TestReconstruct:
    def test_full_rank_reconstruction_exact(self):
        x = _random_matrix(40, 6, 8)
        d = pca_eof(x, 6)
        np.testing.assert_allclose(reconstruct(d, 6), x, atol=1e-10)

    def test_zero_components_gives_mean(self):
        x = _random_matrix(40, 6, 9)
        d = pca_eof(x, 3)
        np.testing.assert_allclose(reconstruct(d, 0), np.tile(d.mean, (40, 1)), atol=0)

    def test_error_decreases_with_k(self):
        x = _random_matrix(60, 8, 10)
        d = pca_eof(x, 8)
        errs = [np.linalg.norm(x - reconstruct(d, k)) for k in range(9)]
        assert all(errs[i + 1] <= errs[i] + 1e-12 for i in range(8))

    def test_k_used_range_checked(self):
        d = pca_eof(_random_matrix(20, 5, 11), 3)
        with pytest.raises(ValueError):
            reconstruct(d, 4)
        with pytest.raises(ValueError):
            reconstruct(d, -1)


class TestProject:
    def test_new_rows_match_training_scores(self):
        x = _random_matrix(50, 7, 12)
        d = pca_eof(x, 3)
        np.testing.assert_allclose(project(d, x[:5]), d.scores[:5], atol=1e-10)

    def test_single_row(self):
        x = _random_matrix(50, 7, 13)
        d = pca_eof(x, 2)
        out = project(d, x[0])
        assert out.shape == (1, 2)

    def test_width_mismatch(self):
        d = pca_eof(_random_matrix(20, 5, 14), 2)
        with pytest.raises(ValueError):
            project(d, np.zeros((3, 4)))
