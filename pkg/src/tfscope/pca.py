"""Principal component / empirical orthogonal function decomposition.

Linear, invertible, global-variance dimensionality reduction of a sample
matrix. The default route eigendecomposes the feature-space covariance
(features number nt*nvars, far fewer than samples in the intended use);
an independent thin-SVD route cross-checks it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .cube import SampleMatrix


@dataclass(frozen=True)
class LinearDecomposition:
    """Mean-centered PCA/EOF decomposition of a sample matrix.

    Attributes
    ----------
    mean : ndarray, shape (n_features,)
        Per-feature mean over samples, in feature units.
    eofs : ndarray, shape (k, n_features)
        Orthonormal feature-space basis patterns, sorted by explained
        variance, sign pinned so each row's largest-magnitude entry is
        positive.
    scores : ndarray, shape (n_samples, k)
        Projection coordinates of every sample onto the EOFs.
    eigenvalues : ndarray, shape (k,)
        Nonnegative variances along each EOF, non-increasing.
    variance_fractions : ndarray, shape (k,)
        eigenvalues / total centered variance; in [0, 1] with cumulative
        sum <= 1.
    """

    mean: np.ndarray
    eofs: np.ndarray
    scores: np.ndarray
    eigenvalues: np.ndarray
    variance_fractions: np.ndarray

    @property
    def k(self) -> int:
        return self.eofs.shape[0]

    @property
    def n_features(self) -> int:
        return self.eofs.shape[1]


def _as_data(matrix) -> np.ndarray:
    if isinstance(matrix, SampleMatrix):
        return matrix.data
    data = np.asarray(matrix, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("expected a 2-D sample matrix")
    return data


def _pin_signs(eofs: np.ndarray, scores: np.ndarray) -> None:
    # eigenvector sign is arbitrary; pin largest-|entry| positive so
    # repeated runs and the two routes agree exactly
    for i in range(eofs.shape[0]):
        j = int(np.argmax(np.abs(eofs[i])))
        if eofs[i, j] < 0:
            eofs[i] *= -1.0
            scores[:, i] *= -1.0


def _finish(
    mean: np.ndarray, eofs: np.ndarray, scores: np.ndarray, eigenvalues: np.ndarray, total_var: float
) -> LinearDecomposition:
    eigenvalues = np.maximum(eigenvalues, 0.0)
    _pin_signs(eofs, scores)
    if total_var > 0.0:
        fractions = eigenvalues / total_var
    else:
        fractions = np.zeros_like(eigenvalues)
    return LinearDecomposition(
        mean=mean,
        eofs=np.ascontiguousarray(eofs),
        scores=np.ascontiguousarray(scores),
        eigenvalues=eigenvalues,
        variance_fractions=fractions,
    )


def _check_k(k: int, n: int, n_features: int) -> None:
    if n < 2:
        raise ValueError("need at least 2 samples")
    if not 1 <= k <= min(n, n_features):
        raise ValueError(f"k must be in [1, {min(n, n_features)}], got {k}")


def pca_eof(matrix, k: int) -> LinearDecomposition:
    """Decompose a sample matrix onto its top ``k`` EOFs.

    Covariance route: eigendecomposition of the (n_features, n_features)
    sample covariance (ddof = 1). Deterministic; EOF signs pinned.

    Parameters
    ----------
    matrix : SampleMatrix or ndarray, shape (n_samples, n_features)
    k : int
        Number of components, 1 <= k <= min(n_samples, n_features).
    """
    data = _as_data(matrix)
    n, n_features = data.shape
    _check_k(k, n, n_features)
    mean = data.mean(axis=0)
    centered = data - mean
    cov = centered.T @ centered / (n - 1)
    total_var = float(np.trace(cov))
    # eigh returns ascending order; take the top k reversed
    eigenvalues, vectors = scipy.linalg.eigh(
        cov, subset_by_index=(n_features - k, n_features - 1)
    )
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = eigenvalues[order]
    eofs = vectors[:, order].T.copy()
    scores = centered @ eofs.T
    return _finish(mean, eofs, scores, eigenvalues, total_var)


def pca_eof_svd(matrix, k: int) -> LinearDecomposition:
    """Same decomposition via thin SVD of the centered matrix.

    Independent route used to cross-check :func:`pca_eof`; eigenvalues
    are the squared singular values over (n - 1).
    """
    data = _as_data(matrix)
    n, n_features = data.shape
    _check_k(k, n, n_features)
    mean = data.mean(axis=0)
    centered = data - mean
    u, s, vt = np.linalg.svd(centered, full_matrices=False)
    total_var = float(np.sum(s * s)) / (n - 1)
    eigenvalues = (s[:k] * s[:k]) / (n - 1)
    eofs = vt[:k].copy()
    scores = u[:, :k] * s[:k]
    return _finish(mean, eofs, scores, eigenvalues, total_var)


def reconstruct(decomp: LinearDecomposition, k_used: int) -> np.ndarray:
    """Invert the decomposition using the leading ``k_used`` components.

    Returns mean + scores[:, :k_used] @ eofs[:k_used]; with ``k_used``
    equal to the full numerical rank this reproduces the input within
    1e-8 relative Frobenius error.
    """
    if not 0 <= k_used <= decomp.k:
        raise ValueError(f"k_used must be in [0, {decomp.k}], got {k_used}")
    n = decomp.scores.shape[0]
    if k_used == 0:
        return np.tile(decomp.mean, (n, 1))
    return decomp.mean + decomp.scores[:, :k_used] @ decomp.eofs[:k_used]


def project(decomp: LinearDecomposition, new_rows: np.ndarray) -> np.ndarray:
    """Project held-out rows into the decomposition's score space."""
    rows = np.atleast_2d(np.asarray(new_rows, dtype=np.float64))
    if rows.shape[1] != decomp.n_features:
        raise ValueError(
            f"row width {rows.shape[1]} does not match n_features {decomp.n_features}"
        )
    return (rows - decomp.mean) @ decomp.eofs.T
