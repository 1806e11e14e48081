"""Laplacian Eigenmaps: neighborhood graph, graph Laplacian, spectral embedding.

Samples become nodes of a kNN graph (union-symmetrized, optionally
heat-kernel weighted); the embedding coordinates are the eigenvectors of
the graph Laplacian's smallest nonzero eigenvalues. Disconnected graphs
are repaired by recorded minimum-distance bridges so no sample is
silently dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import eigsh

from .cube import SampleMatrix, rng_from_seed
from .errors import DegenerateDataError

# dense eigendecomposition below this node count; it doubles as the
# oracle route in tests
DENSE_LIMIT = 2000


@dataclass(frozen=True)
class NeighborGraph:
    """Symmetric weighted neighborhood graph over samples.

    Attributes
    ----------
    n : int
        Node count.
    weights : scipy.sparse.csr_matrix
        Symmetric adjacency, positive finite weights, zero diagonal.
    k : int
        Neighbors requested per node.
    metric : str
        Distance metric used ("euclidean").
    kernel : str
        "binary" or "heat".
    bandwidth : float
        Heat-kernel sigma (mean kNN distance); 0.0 for binary.
    features : ndarray, shape (n, n_features)
        The rows the graph was built from; retained so component
        bridging can measure inter-component distances.
    """

    n: int
    weights: scipy.sparse.csr_matrix
    k: int
    metric: str
    kernel: str
    bandwidth: float
    features: np.ndarray


@dataclass(frozen=True)
class LeEmbedding:
    """Spectral embedding into the low nonzero Laplacian eigenvectors.

    Attributes
    ----------
    coordinates : ndarray, shape (n, d)
        Eigenvectors of the d smallest nonzero eigenvalues (trivial
        constant mode dropped), sign pinned.
    eigenvalues : ndarray, shape (d,)
        Corresponding eigenvalues, ascending, nonnegative.
    component_count : int
        Connected components found before any repair.
    repairs : tuple
        (i, j, weight) bridge edges added to connect components; empty
        when the graph was already connected.
    normalization : str
        Laplacian normalization used.
    """

    coordinates: np.ndarray
    eigenvalues: np.ndarray
    component_count: int
    repairs: tuple
    normalization: str


def _knn_search(data: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact blocked brute-force kNN (self excluded); (idx, dist) (n, k)."""
    n = data.shape[0]
    sq = np.einsum("ij,ij->i", data, data)
    idx = np.empty((n, k), dtype=np.int64)
    dist = np.empty((n, k), dtype=np.float64)
    block = max(1, int(40_000_000 // max(n, 1)))
    for start in range(0, n, block):
        stop = min(start + block, n)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (data[start:stop] @ data.T)
        np.maximum(d2, 0.0, out=d2)
        rows = np.arange(start, stop)
        d2[np.arange(stop - start), rows] = np.inf  # exclude self
        part = np.argpartition(d2, k - 1, axis=1)[:, :k]
        pd = np.take_along_axis(d2, part, axis=1)
        # canonical neighbor order: by (distance, index)
        order = np.lexsort((part, pd), axis=1)
        idx[start:stop] = np.take_along_axis(part, order, axis=1)
        dist[start:stop] = np.sqrt(np.take_along_axis(pd, order, axis=1))
    return idx, dist


def build_knn_graph(matrix, k: int, kernel: str = "heat") -> NeighborGraph:
    """Build the union-symmetrized kNN graph over sample rows.

    Each node's k Euclidean nearest neighbors give directed edges; an
    edge is kept if either endpoint selects the other. Heat-kernel
    weights are exp(-dist^2 / sigma^2) with sigma the mean kNN distance;
    binary weights are 1. Zero-distance duplicate rows get weight 1.
    """
    if kernel not in ("binary", "heat"):
        raise ValueError(f"kernel must be 'binary' or 'heat', got {kernel!r}")
    data = matrix.data if isinstance(matrix, SampleMatrix) else np.asarray(matrix, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("expected a 2-D sample matrix")
    n = data.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n = {n}, got {k}")
    idx, dist = _knn_search(data, k)
    sigma = float(dist.mean()) if kernel == "heat" else 0.0
    rows = np.repeat(np.arange(n, dtype=np.int64), k)
    cols = idx.ravel()
    if kernel == "heat":
        if sigma > 0.0:
            vals = np.exp(-(dist.ravel() ** 2) / sigma**2)
        else:
            vals = np.ones(n * k)  # all duplicates: every distance is zero
    else:
        vals = np.ones(n * k)
    directed = scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    # union symmetrization: keep an edge if either endpoint chose it;
    # elementwise max agrees on shared edges since the weight depends
    # only on the symmetric distance
    sym = directed.maximum(directed.T)
    sym.setdiag(0.0)
    sym.eliminate_zeros()
    return NeighborGraph(
        n=n,
        weights=sym.tocsr(),
        k=k,
        metric="euclidean",
        kernel=kernel,
        bandwidth=sigma,
        features=data,
    )


def laplacian(graph: NeighborGraph, normalization: str = "unnormalized") -> scipy.sparse.csr_matrix:
    """Graph Laplacian: L = D - W, or L_sym = I - D^{-1/2} W D^{-1/2}."""
    if normalization not in ("unnormalized", "symmetric"):
        raise ValueError(
            f"normalization must be 'unnormalized' or 'symmetric', got {normalization!r}"
        )
    w = graph.weights
    degrees = np.asarray(w.sum(axis=1)).ravel()
    if normalization == "unnormalized":
        return (scipy.sparse.diags(degrees) - w).tocsr()
    isolated = np.nonzero(degrees == 0.0)[0]
    if isolated.size:
        raise DegenerateDataError(
            f"symmetric normalization undefined for isolated nodes {isolated[:5].tolist()}"
        )
    inv_sqrt = 1.0 / np.sqrt(degrees)
    scaled = w.multiply(inv_sqrt[:, None]).multiply(inv_sqrt[None, :])
    return (scipy.sparse.eye(graph.n) - scaled).tocsr()


def _bridge_components(graph: NeighborGraph) -> tuple[scipy.sparse.csr_matrix, int, tuple]:
    """Connect components with recorded min-distance bridges."""
    w = graph.weights.copy()
    ncomp, labels = connected_components(w, directed=False)
    initial = ncomp
    repairs = []
    feats = graph.features
    while ncomp > 1:
        first = labels == labels[0]
        a_idx = np.nonzero(first)[0]
        b_idx = np.nonzero(~first)[0]
        # min-distance pair between the first component and the rest
        best = (np.inf, -1, -1)
        sq_b = np.einsum("ij,ij->i", feats[b_idx], feats[b_idx])
        for i in a_idx:
            d2 = sq_b - 2.0 * (feats[b_idx] @ feats[i]) + feats[i] @ feats[i]
            j = int(np.argmin(d2))
            if d2[j] < best[0]:
                best = (d2[j], int(i), int(b_idx[j]))
        d = float(np.sqrt(max(best[0], 0.0)))
        i, j = best[1], best[2]
        if graph.kernel == "heat" and graph.bandwidth > 0.0:
            weight = float(np.exp(-(d**2) / graph.bandwidth**2))
        else:
            weight = 1.0
        # a far bridge underflows the kernel; floor it at the weakest real
        # edge so the repaired graph is spectrally connected, not just
        # topologically
        floor = float(w.data.min()) if w.nnz else 1.0
        weight = max(weight, floor)
        w = w.tolil()
        w[i, j] = weight
        w[j, i] = weight
        w = w.tocsr()
        repairs.append((i, j, weight))
        ncomp, labels = connected_components(w, directed=False)
    return w, initial, tuple(repairs)


def _solve_smallest(
    lap: scipy.sparse.csr_matrix, n_pairs: int, force_sparse: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of the n_pairs smallest eigenvalues, ascending.

    ``force_sparse`` skips the dense shortcut so the two routes can be
    cross-checked on small problems.
    """
    n = lap.shape[0]
    if not force_sparse and (n <= DENSE_LIMIT or n_pairs >= n - 1):
        vals, vecs = scipy.linalg.eigh(lap.toarray(), subset_by_index=(0, n_pairs - 1))
        return vals, vecs
    # shift-invert at -0.5 keeps the factorized matrix L + 0.5 I positive
    # definite, so the smallest eigenvalues converge fast and v0 fixes
    # the iteration deterministically
    v0 = rng_from_seed(0).standard_normal(n)
    vals, vecs = eigsh(lap, k=n_pairs, sigma=-0.5, which="LM", v0=v0, tol=0)
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def le_embed(graph: NeighborGraph, d: int, normalization: str = "unnormalized") -> LeEmbedding:
    """Embed graph nodes on the d smallest nonzero Laplacian eigenvectors.

    The trivial constant eigenvector (eigenvalue 0) is dropped. A
    disconnected graph is first bridged (see :class:`LeEmbedding`
    repairs); eigenvector signs are pinned largest-magnitude-positive.
    """
    if not 1 <= d <= graph.n - 1:
        raise ValueError(f"d must satisfy 1 <= d <= n - 1 = {graph.n - 1}, got {d}")
    bridged_w, ncomp, repairs = _bridge_components(graph)
    work = graph
    if repairs:
        work = NeighborGraph(
            n=graph.n,
            weights=bridged_w,
            k=graph.k,
            metric=graph.metric,
            kernel=graph.kernel,
            bandwidth=graph.bandwidth,
            features=graph.features,
        )
    lap = laplacian(work, normalization)
    vals, vecs = _solve_smallest(lap, d + 1)
    # connected by construction: exactly one zero mode to drop
    vals = np.maximum(vals[1:], 0.0)
    coords = vecs[:, 1:].copy()
    for i in range(coords.shape[1]):
        j = int(np.argmax(np.abs(coords[:, i])))
        if coords[j, i] < 0:
            coords[:, i] *= -1.0
    return LeEmbedding(
        coordinates=np.ascontiguousarray(coords),
        eigenvalues=vals,
        component_count=ncomp,
        repairs=repairs,
        normalization=normalization,
    )
