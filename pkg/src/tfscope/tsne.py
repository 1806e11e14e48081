"""Exact t-SNE with perplexity calibration, plus PC(t-SNE) aggregation.

High-dimensional neighbor probabilities are Gaussian conditionals whose
bandwidths are bisected to a target perplexity; the low-dimensional map
minimizes the Kullback-Leibler divergence to them under a Student-t
kernel, by momentum gradient descent with early exaggeration. PC(t-SNE)
stacks several independent realizations column-z-scored and takes the
principal components of the stack, capturing cluster assignments that
recur across runs.

Dense (exact) t-SNE only; the n x n terms are evaluated in row blocks
above ``BLOCK_LIMIT`` samples to bound memory.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .cube import SampleMatrix, rng_from_seed
from .errors import DegenerateDataError
from .pca import LinearDecomposition, pca_eof

# probability floor: keeps logs finite without disturbing the unit sum
P_FLOOR = 1e-12
# row-blocked evaluation of n x n terms above this sample count
BLOCK_LIMIT = 20_000
# joint P kept in float32 above this sample count to halve the footprint
_P_F32_LIMIT = 6_000
_BISECTION_CAP = 200


@dataclass(frozen=True)
class TsneParams:
    """Knobs of one t-SNE optimization.

    learning_rate None means the standard auto rule n / 12 floored at 50
    (n is known only at run time). Momentum is 0.5 during the
    early-exaggeration phase and 0.8 after it.
    """

    perplexity: float = 30.0
    out_dims: int = 2
    max_iter: int = 1000
    early_exaggeration_factor: float = 12.0
    early_exaggeration_iters: int = 250
    learning_rate: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.perplexity < 1:
            raise ValueError("perplexity must be >= 1")
        if self.out_dims != 2:
            raise ValueError("out_dims is fixed at 2")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.early_exaggeration_factor < 1:
            raise ValueError("early_exaggeration_factor must be >= 1")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass(frozen=True)
class TsneRealization:
    """One converged t-SNE map with its divergence bookkeeping (nats)."""

    coordinates: np.ndarray
    kl_initial: float
    kl_final: float
    seed: int


@dataclass(frozen=True)
class PcTsneResult:
    """PCs of a z-scored stack of t-SNE realizations."""

    realizations: tuple
    stacked_scores: np.ndarray
    variance_fractions: np.ndarray
    decomposition: LinearDecomposition


def _entropy_bits(p: np.ndarray) -> float:
    nz = p[p > 0.0]
    return float(-np.sum(nz * np.log2(nz)))


def calibrate_conditionals(sq_dists: np.ndarray, perplexity: float) -> np.ndarray:
    """Per-row Gaussian conditionals p_{j|i} at the target perplexity.

    Each row's bandwidth (precision beta) is found by bracketed bisection
    until 2^H(P_i) matches ``perplexity`` within 1e-3 (H in bits). Rows
    sum to 1; the diagonal is zero.

    Raises
    ------
    DegenerateDataError
        If any row fails to converge in 200 bisection steps, which
        signals pathological distances for the requested perplexity.
    """
    d2 = np.asarray(sq_dists, dtype=np.float64)
    if d2.ndim != 2 or d2.shape[0] != d2.shape[1]:
        raise ValueError("sq_dists must be square")
    n = d2.shape[0]
    if np.any(np.diag(d2) != 0.0):
        raise ValueError("sq_dists diagonal must be zero")
    if not np.allclose(d2, d2.T, rtol=0.0, atol=1e-10 * max(1.0, float(d2.max()))):
        raise ValueError("sq_dists must be symmetric")
    if not 1 <= perplexity <= n - 1:
        raise ValueError(f"perplexity must be in [1, {n - 1}] for n = {n}")
    if not np.all(np.isfinite(d2)):
        raise DegenerateDataError("distances contain non-finite values")
    cond = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        row = np.delete(d2[i], i)
        row = row - row.min()  # shift for exp stability; conditionals unchanged
        beta, beta_min, beta_max = 1.0, -np.inf, np.inf
        p = None
        converged = False
        for _ in range(_BISECTION_CAP):
            p = np.exp(-row * beta)
            total = p.sum()
            p /= total
            achieved = 2.0 ** _entropy_bits(p)
            if abs(achieved - perplexity) <= 1e-3:
                converged = True
                break
            if achieved > perplexity:
                beta_min = beta  # too spread out: sharpen
                beta = beta * 2.0 if beta_max == np.inf else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = beta / 2.0 if beta_min == -np.inf else (beta + beta_min) / 2.0
        if not converged:
            raise DegenerateDataError(
                f"perplexity bisection did not converge for sample {i} "
                f"(target {perplexity}, pathological distances)"
            )
        cond[i, :i] = p[:i]
        cond[i, i + 1 :] = p[i:]
    return cond


def symmetrize_joint(conditionals: np.ndarray) -> np.ndarray:
    """Joint probabilities p_ij = (p_{j|i} + p_{i|j}) / (2n).

    Off-diagonal entries are floored at 1e-12 and the matrix is
    renormalized, so it stays symmetric, nonnegative, and sums to 1
    within 1e-12.
    """
    cond = np.asarray(conditionals, dtype=np.float64)
    n = cond.shape[0]
    joint = (cond + cond.T) / (2.0 * n)
    np.maximum(joint, P_FLOOR, out=joint)
    np.fill_diagonal(joint, 0.0)  # the floor applies off-diagonal only
    joint /= joint.sum()
    return joint


def _symmetrize_inplace(a: np.ndarray, block: int = 2048) -> None:
    """a <- (a + a.T) / 2 without a full-size temporary."""
    n = a.shape[0]
    for s in range(0, n, block):
        e = min(s + block, n)
        for s2 in range(s, n, block):
            e2 = min(s2 + block, n)
            m = (a[s:e, s2:e2] + a[s2:e2, s:e].T) * 0.5
            a[s:e, s2:e2] = m
            if s2 > s:
                a[s2:e2, s:e] = m.T


def _pairwise_sq_dists(data: np.ndarray) -> np.ndarray:
    sq = np.einsum("ij,ij->i", data, data)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (data @ data.T)
    np.maximum(d2, 0.0, out=d2)
    _symmetrize_inplace(d2)  # exact symmetry for the calibration contract
    np.fill_diagonal(d2, 0.0)
    return d2


def _joint_from_data(data: np.ndarray, perplexity: float) -> np.ndarray:
    joint = symmetrize_joint(calibrate_conditionals(_pairwise_sq_dists(data), perplexity))
    if data.shape[0] > _P_F32_LIMIT:
        return joint.astype(np.float32)
    return joint


def _kl_divergence(p: np.ndarray, y: np.ndarray) -> float:
    """KL(P || Q(y)) in nats, float64 accumulation.

    Row-blocked above ``_P_F32_LIMIT`` samples so the n x n terms never
    hold more than one block at a time.
    """
    n = y.shape[0]
    y64 = y.astype(np.float64)
    if n <= _P_F32_LIMIT:
        d2 = _pairwise_sq_dists(y64)
        num = 1.0 / (1.0 + d2)
        np.fill_diagonal(num, 0.0)
        q = num / num.sum()
        q = np.maximum(q, P_FLOOR)
        p64 = p.astype(np.float64)
        ratio = np.maximum(p64, P_FLOOR) / q
        return float(np.sum(p64 * np.log(ratio)))
    block = max(1, int(20_000_000 // n))
    buf = np.empty((min(block, n), n), dtype=np.float64)
    z = 0.0
    for s in range(0, n, block):
        e = min(s + block, n)
        num = _student_t_num(y64, slice(s, e), buf[: e - s])
        z += float(num.sum(dtype=np.float64))
    kl = 0.0
    for s in range(0, n, block):
        e = min(s + block, n)
        num = _student_t_num(y64, slice(s, e), buf[: e - s])
        num /= z
        np.maximum(num, P_FLOOR, out=num)
        p64 = p[s:e].astype(np.float64)
        ratio = np.maximum(p64, P_FLOOR) / num
        np.log(ratio, out=ratio)
        kl += float(np.sum(p64 * ratio, dtype=np.float64))
    return kl


def _canonical_order(matrix) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """Data in canonical sample order plus the inverse permutation."""
    if isinstance(matrix, SampleMatrix):
        order = np.lexsort((matrix.index_map[:, 1], matrix.index_map[:, 0]))
        if np.array_equal(order, np.arange(matrix.n_samples)):
            return matrix.data, None
        return matrix.data[order], order
    data = np.asarray(matrix, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("expected a 2-D sample matrix")
    return data, None


def _student_t_num(y: np.ndarray, rows: slice, out: np.ndarray) -> np.ndarray:
    """num_ij = 1 / (1 + |y_i - y_j|^2) for a row block, into ``out``."""
    sq = np.einsum("ij,ij->i", y, y)
    yb = y[rows]
    np.matmul(yb, y.T, out=out)
    out *= -2.0
    out += sq[rows, None]
    out += sq[None, :]
    np.maximum(out, 0.0, out=out)
    out += 1.0
    np.reciprocal(out, out=out)
    start = rows.start or 0
    out[np.arange(out.shape[0]), np.arange(start, start + out.shape[0])] = 0.0
    return out


def _gradient(
    p: np.ndarray, y: np.ndarray, work: Optional[tuple[np.ndarray, np.ndarray]] = None
) -> np.ndarray:
    """Exact t-SNE gradient, 4 * sum_j (p_ij - q_ij) num_ij (y_i - y_j)."""
    n = y.shape[0]
    if n <= BLOCK_LIMIT:
        if work is None:
            work = (np.empty((n, n), dtype=y.dtype), np.empty((n, n), dtype=y.dtype))
        buf, scratch = work
        num = _student_t_num(y, slice(0, n), buf)
        z = num.sum(dtype=np.float64)
        # w = p * num - num^2 / z, assembled in place
        np.multiply(p, num, out=scratch)
        np.multiply(num, num, out=num)
        num *= y.dtype.type(-1.0 / z)
        num += scratch
        w = num
        grad = 4.0 * (w.sum(axis=1)[:, None] * y - w @ y)
        return grad.astype(y.dtype)
    # two-pass row-blocked evaluation: Z first, then the weighted sums
    block = max(1, int(20_000_000 // n))
    z = 0.0
    buf = np.empty((min(block, n), n), dtype=y.dtype)
    for s in range(0, n, block):
        e = min(s + block, n)
        num = _student_t_num(y, slice(s, e), buf[: e - s])
        z += float(num.sum(dtype=np.float64))
    grad = np.empty_like(y)
    for s in range(0, n, block):
        e = min(s + block, n)
        num = _student_t_num(y, slice(s, e), buf[: e - s])
        w = (p[s:e] - num / z) * num
        grad[s:e] = 4.0 * (w.sum(axis=1)[:, None] * y[s:e] - w @ y)
    return grad


def tsne_run(matrix, params: TsneParams) -> TsneRealization:
    """One full t-SNE optimization, deterministic in ``params.seed``.

    Initial coordinates are a small-variance Gaussian draw (sigma 1e-2);
    early exaggeration multiplies P for the first phase; gains-adapted
    momentum gradient descent runs ``max_iter`` iterations. Sample
    identity follows canonical (row-major cell) order internally, so a
    permuted input yields identically permuted output.
    """
    data, order = _canonical_order(matrix)
    n = data.shape[0]
    if n < 4:
        raise ValueError("t-SNE needs at least 4 samples")
    if params.perplexity > (n - 1) / 3:
        raise ValueError(
            f"perplexity {params.perplexity} exceeds (n - 1) / 3 = {(n - 1) / 3:.1f}"
        )
    p = _joint_from_data(data, params.perplexity)

    lr = params.learning_rate
    if lr is None:
        lr = max(n / params.early_exaggeration_factor, 50.0)
    rng = rng_from_seed(params.seed)
    y = (rng.standard_normal((n, 2)) * 1e-2).astype(np.float32)
    kl_initial = _kl_divergence(p, y)

    exaggerated = (p * params.early_exaggeration_factor).astype(np.float32)
    p_opt = p.astype(np.float32)
    update = np.zeros_like(y)
    gains = np.ones_like(y)
    current = exaggerated
    momentum = 0.5
    work = None
    if n <= BLOCK_LIMIT:
        work = (np.empty((n, n), dtype=np.float32), np.empty((n, n), dtype=np.float32))
    for it in range(params.max_iter):
        if it == params.early_exaggeration_iters:
            current = p_opt
            momentum = 0.8
        grad = _gradient(current, y, work)
        same_sign = np.sign(grad) == np.sign(update)
        gains[same_sign] *= 0.8
        gains[~same_sign] += 0.2
        np.maximum(gains, 0.01, out=gains)
        update = momentum * update - np.float32(lr) * gains * grad
        y += update
        y -= y.mean(axis=0)

    kl_final = _kl_divergence(p, y)
    coords = y.astype(np.float64)
    if order is not None:
        out = np.empty_like(coords)
        out[order] = coords
        coords = out
    return TsneRealization(
        coordinates=coords, kl_initial=kl_initial, kl_final=kl_final, seed=params.seed
    )


def _replace_seed(params: TsneParams, seed: int) -> TsneParams:
    return TsneParams(
        perplexity=params.perplexity,
        out_dims=params.out_dims,
        max_iter=params.max_iter,
        early_exaggeration_factor=params.early_exaggeration_factor,
        early_exaggeration_iters=params.early_exaggeration_iters,
        learning_rate=params.learning_rate,
        seed=seed,
    )


def pc_tsne(
    matrix,
    params: TsneParams,
    runs: int,
    seeds: Optional[Sequence[int]] = None,
) -> PcTsneResult:
    """Principal components of ``runs`` stacked t-SNE realizations.

    Realization r uses seed ``params.seed + r`` unless ``seeds``
    overrides the sequence explicitly. Each realization's two columns
    are z-scored before stacking, so no single high-spread map dominates
    the PCs of the n x 2R stack.
    """
    if runs < 2:
        raise ValueError("pc_tsne needs at least 2 realizations")
    if seeds is not None and len(seeds) != runs:
        raise ValueError("seeds, when given, must provide one seed per run")
    realizations = []
    columns = []
    for r in range(runs):
        seed = int(seeds[r]) if seeds is not None else params.seed + r
        real = tsne_run(matrix, _replace_seed(params, seed))
        realizations.append(real)
        coords = real.coordinates
        mean = coords.mean(axis=0)
        std = coords.std(axis=0)
        std = np.where(std > 0.0, std, 1.0)  # degenerate column maps to zeros
        columns.append((coords - mean) / std)
    stack = np.hstack(columns)
    k = min(stack.shape[1], stack.shape[0])
    decomp = pca_eof(stack, k)
    return PcTsneResult(
        realizations=tuple(realizations),
        stacked_scores=decomp.scores,
        variance_fractions=decomp.variance_fractions,
        decomposition=decomp,
    )


def min_divergence_realization(result: PcTsneResult) -> TsneRealization:
    """The realization with the lowest final KL divergence (first on ties)."""
    best = 0
    for i, real in enumerate(result.realizations):
        if real.kl_final < result.realizations[best].kl_final:
            best = i
    return result.realizations[best]
