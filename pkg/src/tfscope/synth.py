"""Synthetic three-signal mixing cube with known ground-truth weights.

Every series in the generated cube is a convex combination of a sinusoid
and two decaying exponentials; over the left half of the grid the third
signal is gated off by projecting the weight triple onto the (s1, s2)
edge of the simplex.  All samples therefore lie on one planar triangle
in series space.  Because the generating weights are returned alongside
the cube, the generator doubles as the oracle for the
dimensionality-reduction and unmixing modules.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube import DataCube, rng_from_seed


@dataclass(frozen=True)
class SignalSet:
    """The three generating series, sampled at integer steps t = 0..nt-1.

    s1 is a period-50 cosine, s2 a fast decaying exponential, s3 a delayed
    decaying exponential of amplitude 3 that is zero before step 50.
    """

    nt: int
    s1: np.ndarray
    s2: np.ndarray
    s3: np.ndarray

    def stacked(self) -> np.ndarray:
        """(3, nt) array of the signals in order."""
        return np.stack([self.s1, self.s2, self.s3])


@dataclass(frozen=True)
class WeightField:
    """Per-cell (w1, w2, w3) mixing fractions, shape (ny, nx, 3).

    Nonnegative, each triple summing to one within 1e-12.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))
        object.__setattr__(self, "weights", w)
        if w.ndim != 3 or w.shape[2] != 3:
            raise ValueError("weights must have shape (ny, nx, 3)")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if np.max(np.abs(w.sum(axis=2) - 1.0)) > 1e-12:
            raise ValueError("weight triples must sum to one within 1e-12")

    def flat(self) -> np.ndarray:
        """(ny*nx, 3) row-major view matching flatten() sample order."""
        return self.weights.reshape(-1, 3)


def eval_signals(nt: int) -> SignalSet:
    """Evaluate the three generating signals for ``nt`` unit-spaced steps."""
    if nt < 1:
        raise ValueError("nt must be >= 1")
    t = np.arange(nt, dtype=np.float64)
    s1 = np.cos(np.pi * t / 25.0)
    s2 = np.exp(-t / 5.0)
    s3 = np.where(t < 50.0, 0.0, 3.0 * np.exp(-(t - 50.0) / 10.0))
    return SignalSet(nt=nt, s1=s1, s2=s2, s3=s3)


def sample_simplex_weights(n: int, seed: int) -> np.ndarray:
    """Draw ``n`` weight triples uniformly from the 2-simplex.

    Uses the exponential-spacings construction (three unit-exponential
    draws normalized by their sum), which is exactly uniform on the
    simplex.  Deterministic in ``seed``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = rng_from_seed(seed)
    e = rng.standard_exponential(size=(n, 3))
    w = e / e.sum(axis=1, keepdims=True)
    # tiny renormalization drift from the division is below 1e-16 but pin
    # the sum-to-one invariant exactly for downstream checks
    return w


def mix_series(weights: np.ndarray, signals: SignalSet) -> np.ndarray:
    """Series w1*s1 + w2*s2 + w3*s3 for one weight triple."""
    w = np.asarray(weights, dtype=np.float64)
    return w[0] * signals.s1 + w[1] * signals.s2 + w[2] * signals.s3


def gate_weights(weights: np.ndarray, nx: int) -> np.ndarray:
    """Apply the spatial gate: zero w3 left of the midline and renormalize.

    Columns x < nx // 2 are projected onto the (s1, s2) edge of the
    simplex, so the gated field still sums to one everywhere and remains
    the exact generating weights of the mixed cube.
    """
    w = np.array(weights, dtype=np.float64)
    gate = nx // 2
    left = w[:, :gate, :]
    left[:, :, 2] = 0.0
    denom = left[:, :, 0] + left[:, :, 1]
    # a pure-s3 triple has nothing left to renormalize; split it evenly
    safe = np.where(denom > 0.0, denom, 1.0)
    left[:, :, 0] = np.where(denom > 0.0, left[:, :, 0] / safe, 0.5)
    left[:, :, 1] = np.where(denom > 0.0, left[:, :, 1] / safe, 0.5)
    return w


def cube_from_weights(field: WeightField, nt: int) -> DataCube:
    """Deterministically mix a cube from an explicit weight field.

    Pure mixing: every series is exactly w1*s1 + w2*s2 + w3*s3 for its
    triple (then rounded to float32 storage).  Spatial gating is a
    property of the weights, not of this mixer.
    """
    sig = eval_signals(nt)
    w = field.weights
    ny, nx = w.shape[:2]
    basis = sig.stacked()  # (3, nt)
    cube64 = np.einsum("yxk,kt->yxt", w, basis)
    values = cube64.astype(np.float32)[..., np.newaxis]
    mask = np.ones((ny, nx), dtype=bool)
    return DataCube(values=values, mask=mask)


def generate_toy_cube(
    ny: int = 100, nx: int = 100, nt: int = 100, seed: int = 0
) -> tuple[DataCube, WeightField]:
    """Generate the three-signal mixing cube plus its ground-truth weights.

    Weights are drawn uniformly on the simplex in row-major cell order,
    then gated: columns left of the midline lose their s3 fraction and
    are renormalized onto the (s1, s2) edge.  Regeneration with the same
    seed is bit-identical, and the returned field holds the exact
    generating weights of every cell.
    """
    w = sample_simplex_weights(ny * nx, seed).reshape(ny, nx, 3)
    field = WeightField(weights=gate_weights(w, nx))
    return cube_from_weights(field, nt), field
