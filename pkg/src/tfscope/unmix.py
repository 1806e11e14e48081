"""Temporal endmember suggestion and mixture-model inversion.

Endmember candidates are the samples that bound the embedding cloud:
for evenly distributed signed directions, the extreme sample per
direction is recorded and candidates are ranked by how many directions
they bound. Inversion estimates per-sample weights on the endmember
series under a hard sum-to-one constraint (optional nonnegativity via
active set) and reports relative misfit in percent.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .cube import SampleMatrix
from .errors import DegenerateDataError

_KKT_TOL = 1e-9
# CSV number formatting shared with the pipeline exports
FLOAT_FORMAT = "%.9g"


@dataclass(frozen=True)
class EndmemberSet:
    """Endmember time-series signatures with provenance.

    signatures is (m, n_features); provenance holds the source sample
    index per endmember, or "external" for signatures supplied directly.
    Signatures must be mutually linearly independent (smallest singular
    value > 1e-10 x largest).
    """

    signatures: np.ndarray
    provenance: tuple
    labels: Optional[tuple] = None

    def __post_init__(self):
        sig = np.ascontiguousarray(np.asarray(self.signatures, dtype=np.float64))
        object.__setattr__(self, "signatures", sig)
        if sig.ndim != 2:
            raise ValueError("signatures must be 2-D (m, n_features)")
        if sig.shape[0] < 2:
            raise ValueError("need at least 2 endmembers")
        if len(self.provenance) != sig.shape[0]:
            raise ValueError("provenance must name one source per endmember")
        if self.labels is not None and len(self.labels) != sig.shape[0]:
            raise ValueError("labels must name each endmember")
        sv = np.linalg.svd(sig, compute_uv=False)
        if sv[-1] <= 1e-10 * sv[0]:
            raise DegenerateDataError(
                "endmember signatures are linearly dependent "
                f"(singular value ratio {sv[-1] / sv[0]:.3e})"
            )

    @property
    def m(self) -> int:
        return self.signatures.shape[0]

    @property
    def n_features(self) -> int:
        return self.signatures.shape[1]


@dataclass(frozen=True)
class FractionResult:
    """Per-sample endmember weights and relative misfit (percent)."""

    fractions: np.ndarray
    misfit: np.ndarray
    constraints: tuple

    @property
    def n_samples(self) -> int:
        return self.fractions.shape[0]

    @property
    def m(self) -> int:
        return self.fractions.shape[1]


def endmembers_from_samples(
    matrix: SampleMatrix, indices: Sequence[int], labels: Optional[Sequence[str]] = None
) -> EndmemberSet:
    """Endmembers taken from sample rows; provenance records the indices."""
    idx = [int(i) for i in indices]
    for i in idx:
        if not 0 <= i < matrix.n_samples:
            raise ValueError(f"sample index {i} out of range")
    return EndmemberSet(
        signatures=matrix.data[idx],
        provenance=tuple(idx),
        labels=tuple(labels) if labels is not None else None,
    )


def endmembers_from_signatures(
    signatures: np.ndarray, labels: Optional[Sequence[str]] = None
) -> EndmemberSet:
    """Endmembers supplied directly; provenance is marked external."""
    sig = np.asarray(signatures, dtype=np.float64)
    return EndmemberSet(
        signatures=sig,
        provenance=("external",) * sig.shape[0],
        labels=tuple(labels) if labels is not None else None,
    )


def _directions(d: int, n_directions: int) -> np.ndarray:
    """n_directions unit vectors evenly distributed in d-space."""
    if d == 2:
        # exact even coverage of the half-circle; signs supply the rest
        angles = np.pi * np.arange(n_directions) / n_directions
        return np.column_stack([np.cos(angles), np.sin(angles)])
    from .cube import rng_from_seed

    # deterministic quasi-uniform directions on the (d-1)-sphere
    vecs = rng_from_seed(0).standard_normal((n_directions, d))
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return vecs / norms


def extremity_counts(coordinates: np.ndarray, n_directions: int = 64) -> np.ndarray:
    """How many signed directions each sample bounds (ties all counted)."""
    coords = np.asarray(coordinates, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] < 2:
        raise ValueError("coordinates must be (n, d) with d >= 2")
    if n_directions < 1:
        raise ValueError("n_directions must be >= 1")
    counts = np.zeros(coords.shape[0], dtype=np.int64)
    proj = coords @ _directions(coords.shape[1], n_directions).T
    for j in range(proj.shape[1]):
        col = proj[:, j]
        counts[col == col.max()] += 1
        counts[col == col.min()] += 1
    return counts


def suggest_endmembers(
    coordinates: np.ndarray, matrix: SampleMatrix, n_directions: int = 64
) -> np.ndarray:
    """Sample indices ranked by extremity count (desc, index-stable).

    Candidates are rows of ``matrix``; only samples bounding at least
    one direction are returned.
    """
    coords = np.asarray(coordinates, dtype=np.float64)
    n = matrix.n_samples if isinstance(matrix, SampleMatrix) else np.asarray(matrix).shape[0]
    if coords.shape[0] != n:
        raise ValueError("coordinates and matrix must have the same sample count")
    counts = extremity_counts(coords, n_directions)
    candidates = np.nonzero(counts > 0)[0]
    order = np.lexsort((candidates, -counts[candidates]))
    return candidates[order]


def _solve_sum_to_one(ata: np.ndarray, atx: np.ndarray) -> np.ndarray:
    """Stationarity solve of min |Aw - x|^2 s.t. 1'w = 1, batched over rhs."""
    m = ata.shape[0]
    kkt = np.zeros((m + 1, m + 1))
    kkt[:m, :m] = 2.0 * ata
    kkt[:m, m] = 1.0
    kkt[m, :m] = 1.0
    rhs = np.vstack([2.0 * atx, np.ones((1, atx.shape[1]))])
    try:
        sol = scipy.linalg.solve(kkt, rhs)
    except scipy.linalg.LinAlgError as exc:
        raise DegenerateDataError(f"degenerate endmember matrix: {exc}") from exc
    return sol[:m]


def _active_set_nonneg(ata: np.ndarray, atx_col: np.ndarray, w0: np.ndarray) -> np.ndarray:
    """Refine one sample's weights to w >= 0 with sum-to-one, KKT-exact."""
    m = ata.shape[0]
    zero = w0 < -_KKT_TOL
    for _ in range(4 * m + 8):
        free = ~zero
        if not free.any():
            raise DegenerateDataError("active set emptied; endmembers degenerate")
        w = np.zeros(m)
        sub = _solve_sum_to_one(ata[np.ix_(free, free)], atx_col[free][:, None])
        w[free] = sub[:, 0]
        if w.min() < -_KKT_TOL:
            worst = np.argmin(np.where(free, w, np.inf))
            zero[worst] = True
            continue
        # dual check: mu_Z = g_Z + nu must be nonnegative at the KKT point
        g = 2.0 * (ata @ w - atx_col)
        nu = -g[free].mean()
        mu = g + nu
        blocked = zero & (mu < -_KKT_TOL)
        if blocked.any():
            release = np.argmin(np.where(blocked, mu, np.inf))
            zero[release] = False
            continue
        return np.maximum(w, 0.0) / np.maximum(w, 0.0).sum()
    raise DegenerateDataError("nonnegative active set failed to converge")


def unmix(matrix, ems: EndmemberSet, nonneg: bool = False) -> FractionResult:
    """Invert the mixture model for every sample row.

    Sum-to-one is a hard equality constraint solved exactly; with
    ``nonneg`` an active-set refinement additionally enforces w >= 0 to
    KKT residual below 1e-9. Misfit is 100 * |S'w - x| / |x| per sample
    (0 when both are zero).
    """
    data = matrix.data if isinstance(matrix, SampleMatrix) else np.asarray(matrix, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError("expected a 2-D sample matrix")
    if data.shape[1] != ems.n_features:
        raise ValueError(
            f"feature width {data.shape[1]} does not match endmembers {ems.n_features}"
        )
    a = ems.signatures.T  # (n_features, m)
    ata = ems.signatures @ ems.signatures.T
    atx = a.T @ data.T  # (m, n)
    w = _solve_sum_to_one(ata, atx).T  # (n, m)
    if nonneg:
        bad = np.nonzero(w.min(axis=1) < -_KKT_TOL)[0]
        for i in bad:
            w[i] = _active_set_nonneg(ata, atx[:, i], w[i])
    resid = data - w @ ems.signatures
    rnorm = np.linalg.norm(resid, axis=1)
    xnorm = np.linalg.norm(data, axis=1)
    zero_x = xnorm == 0.0
    if np.any(zero_x & (rnorm > 1e-12)):
        raise DegenerateDataError("zero-norm sample with nonzero residual; misfit undefined")
    misfit = np.zeros(data.shape[0])
    nz = ~zero_x
    misfit[nz] = 100.0 * rnorm[nz] / xnorm[nz]
    constraints = ("sum-to-one", "nonnegative") if nonneg else ("sum-to-one",)
    return FractionResult(fractions=w, misfit=misfit, constraints=constraints)


def misfit_summary(result: FractionResult, threshold_pct: float) -> dict:
    """Fraction of samples with misfit strictly below the threshold, plus stats."""
    if threshold_pct < 0:
        raise ValueError("threshold must be >= 0")
    mis = result.misfit
    return {
        "threshold_pct": float(threshold_pct),
        "fraction_below": float(np.mean(mis < threshold_pct)) if mis.size else 0.0,
        "mean": float(mis.mean()) if mis.size else 0.0,
        "median": float(np.median(mis)) if mis.size else 0.0,
        "max": float(mis.max()) if mis.size else 0.0,
    }


def save_endmembers_csv(ems: EndmemberSet, path: str) -> None:
    """One row per endmember: label, then the signature values."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for i in range(ems.m):
            label = ems.labels[i] if ems.labels is not None else f"em_{i}"
            writer.writerow([label] + [FLOAT_FORMAT % v for v in ems.signatures[i]])


def load_endmembers_csv(path: str) -> EndmemberSet:
    """Read an endmember CSV written by :func:`save_endmembers_csv`."""
    labels = []
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            labels.append(row[0])
            rows.append([float(v) for v in row[1:]])
    if not rows:
        raise ValueError(f"no endmembers in {path}")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValueError(f"inconsistent signature widths in {path}")
    return endmembers_from_signatures(np.asarray(rows), labels)


def save_fractions_csv(result: FractionResult, matrix: SampleMatrix, path: str) -> None:
    """Rows of sample_id, y, x, w_1..w_m, misfit_pct."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["sample_id", "y", "x"]
        header += [f"w_{j + 1}" for j in range(result.m)]
        header.append("misfit_pct")
        writer.writerow(header)
        for i in range(result.n_samples):
            row = [str(i), str(int(matrix.index_map[i, 0])), str(int(matrix.index_map[i, 1]))]
            row += [FLOAT_FORMAT % v for v in result.fractions[i]]
            row.append(FLOAT_FORMAT % result.misfit[i])
            writer.writerow(row)
