"""Spatiotemporal data cubes: file I/O, masking, flattening, subsampling.

A cube is a dense (ny, nx, nt, nvars) grid of measurements with a
per-cell validity mask.  On disk it is a two-file pair: a JSON header and
a raw little-endian float32 payload (plus an optional byte mask), which
keeps round trips bit-exact and the format trivially portable.

Flattening turns the valid cells into an (n_samples, nt * nvars) matrix,
one row per cell, features ordered time-major / variable-minor.  That
matrix is the common input of every dimensionality-reduction engine and
of the mixture-model inversion.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError, DegenerateDataError

#: Counter-based generator used for every seeded draw in the toolkit.
#: Philox is stateless-by-counter, so identical seeds reproduce identical
#: streams regardless of how the draws are batched.
def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & 0xFFFFFFFFFFFFFFFF))


_STD_MODES = ("none", "per-variable-zscore")


@dataclass(frozen=True)
class StandardizationSpec:
    """Per-variable scaling applied (or to apply) when flattening a cube.

    ``offsets`` and ``divisors`` hold one entry per variable once computed;
    divisors are strictly positive.
    """

    mode: str = "none"
    offsets: np.ndarray | None = None
    divisors: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in _STD_MODES:
            raise ValueError(f"unknown standardization mode {self.mode!r}")
        if self.divisors is not None and np.any(np.asarray(self.divisors) <= 0):
            raise ValueError("standardization divisors must be strictly positive")

    def to_dict(self) -> dict:
        out = {"mode": self.mode}
        if self.offsets is not None:
            out["offsets"] = [float(v) for v in self.offsets]
            out["divisors"] = [float(v) for v in self.divisors]
        return out


@dataclass(frozen=True)
class DataCube:
    """Masked 4-D grid of measurements, row-major (y, x, t, var).

    ``values`` has shape (ny, nx, nt, nvars) and float32 dtype so that the
    on-disk payload round-trips bit-for-bit.  ``mask`` has shape (ny, nx);
    nonzero means valid.  Values under invalid cells may hold anything and
    are never surfaced by :func:`flatten`.
    """

    values: np.ndarray
    mask: np.ndarray
    time_labels: tuple[str, ...] | None = None
    var_names: tuple[str, ...] | None = None

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 4:
            raise ValueError("values must be a 4-D (ny, nx, nt, nvars) array")
        if v.dtype != np.float32:
            v = v.astype(np.float32)
        object.__setattr__(self, "values", np.ascontiguousarray(v))
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != v.shape[:2]:
            raise ValueError("mask shape must equal (ny, nx)")
        object.__setattr__(self, "mask", m)
        ny, nx, nt, nvars = v.shape
        if min(ny, nx, nt, nvars) < 1:
            raise ValueError("all cube dimensions must be >= 1")
        if self.time_labels is not None and len(self.time_labels) != nt:
            raise ValueError("time_labels length must equal nt")
        if self.var_names is not None and len(self.var_names) != nvars:
            raise ValueError("var_names length must equal nvars")
        if not np.all(np.isfinite(v[m])):
            raise DataFormatError("non-finite value under a valid mask cell")

    @property
    def ny(self) -> int:
        return self.values.shape[0]

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def nt(self) -> int:
        return self.values.shape[2]

    @property
    def nvars(self) -> int:
        return self.values.shape[3]

    @property
    def n_valid(self) -> int:
        return int(self.mask.sum())


@dataclass(frozen=True)
class SampleMatrix:
    """Valid cells flattened to an (n_samples, nt * nvars) matrix.

    ``index_map`` holds the (y, x) grid position of each row, in row-major
    cell order unless the matrix was subsampled.  Features are ordered
    time-major, variable-minor: column t * nvars + v is variable v at
    step t.  ``standardization`` records any scaling baked into ``data``.
    """

    data: np.ndarray
    index_map: np.ndarray
    nt: int
    nvars: int
    standardization: StandardizationSpec = field(default_factory=StandardizationSpec)

    def __post_init__(self):
        d = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        object.__setattr__(self, "data", d)
        im = np.ascontiguousarray(np.asarray(self.index_map, dtype=np.int64))
        object.__setattr__(self, "index_map", im)
        if d.ndim != 2:
            raise ValueError("data must be 2-D")
        if im.shape != (d.shape[0], 2):
            raise ValueError("index_map must have shape (n_samples, 2)")
        if d.shape[1] != self.nt * self.nvars:
            raise ValueError("n_features must equal nt * nvars")

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def n_features(self) -> int:
        return self.data.shape[1]

    def linear_ids(self, nx: int) -> np.ndarray:
        """Per-sample canonical cell ids y * nx + x (stable sample identity)."""
        return self.index_map[:, 0] * int(nx) + self.index_map[:, 1]


# ---------------------------------------------------------------------------
# File format


def save_cube(cube: DataCube, header_path: str) -> None:
    """Write ``cube`` as a JSON header plus raw float32 payload.

    The payload is ny*nx*nt*nvars IEEE-754 binary32 values, little endian,
    row-major (y, x, t, var); the mask is ny*nx bytes (1 valid, 0 invalid).
    Masked cells keep their payload so the layout is fixed and the round
    trip is bit-exact.  Saving the same cube twice produces byte-identical
    files.
    """
    header_path = os.fspath(header_path)
    base = os.path.basename(header_path)
    stem = base[:-5] if base.endswith(".json") else base
    data_name = stem + ".f32"
    mask_name = stem + ".mask"
    header = {
        "ny": cube.ny,
        "nx": cube.nx,
        "nt": cube.nt,
        "nvars": cube.nvars,
        "dtype": "f32le",
        "order": "y,x,t,var",
        "data": data_name,
        "mask": mask_name,
        "time_labels": list(cube.time_labels) if cube.time_labels is not None else None,
        "var_names": list(cube.var_names) if cube.var_names is not None else None,
    }
    out_dir = os.path.dirname(header_path) or "."
    payload = cube.values.astype("<f4", copy=False).tobytes(order="C")
    maskbytes = cube.mask.astype(np.uint8).tobytes(order="C")
    with open(os.path.join(out_dir, data_name), "wb") as f:
        f.write(payload)
    with open(os.path.join(out_dir, mask_name), "wb") as f:
        f.write(maskbytes)
    with open(header_path, "w", encoding="utf-8") as f:
        json.dump(header, f, sort_keys=True, separators=(",", ":"))
        f.write("\n")


def load_cube(header_path: str) -> DataCube:
    """Read a cube written by :func:`save_cube` (or by any conforming tool).

    Raises :class:`DataFormatError` on a missing file, a size mismatch
    between the declared dimensions and the payload byte length, or a
    non-finite value under a valid mask cell.  An absent/null mask means
    all cells are valid.
    """
    header_path = os.fspath(header_path)
    if not os.path.exists(header_path):
        raise DataFormatError(f"cube header not found: {header_path}")
    with open(header_path, "r", encoding="utf-8") as f:
        try:
            header = json.load(f)
        except json.JSONDecodeError as e:
            raise DataFormatError(f"cube header is not valid JSON: {e}") from e
    try:
        ny, nx = int(header["ny"]), int(header["nx"])
        nt, nvars = int(header["nt"]), int(header["nvars"])
        data_name = header["data"]
    except (KeyError, TypeError, ValueError) as e:
        raise DataFormatError(f"cube header missing required field: {e}") from e
    if header.get("dtype", "f32le") != "f32le":
        raise DataFormatError(f"unsupported dtype {header.get('dtype')!r}")
    if header.get("order", "y,x,t,var") != "y,x,t,var":
        raise DataFormatError(f"unsupported order {header.get('order')!r}")
    if min(ny, nx, nt, nvars) < 1:
        raise DataFormatError("cube dimensions must all be >= 1")

    base_dir = os.path.dirname(header_path) or "."
    data_path = os.path.join(base_dir, data_name)
    if not os.path.exists(data_path):
        raise DataFormatError(f"cube payload not found: {data_path}")
    raw = np.fromfile(data_path, dtype="<f4")
    expected = ny * nx * nt * nvars
    if raw.size != expected:
        raise DataFormatError(
            f"payload holds {raw.size} float32 values, header declares {expected}"
        )
    values = raw.reshape(ny, nx, nt, nvars)

    mask_name = header.get("mask")
    if mask_name is None:
        mask = np.ones((ny, nx), dtype=bool)
    else:
        mask_path = os.path.join(base_dir, mask_name)
        if not os.path.exists(mask_path):
            raise DataFormatError(f"cube mask not found: {mask_path}")
        mraw = np.fromfile(mask_path, dtype=np.uint8)
        if mraw.size != ny * nx:
            raise DataFormatError(
                f"mask holds {mraw.size} bytes, header declares {ny * nx}"
            )
        mask = mraw.reshape(ny, nx).astype(bool)

    tl = header.get("time_labels")
    vn = header.get("var_names")
    return DataCube(
        values=values,
        mask=mask,
        time_labels=tuple(tl) if tl is not None else None,
        var_names=tuple(vn) if vn is not None else None,
    )


# ---------------------------------------------------------------------------
# Flatten / standardize / subsample


def flatten(cube: DataCube, std: StandardizationSpec | None = None) -> SampleMatrix:
    """One row per valid cell, features ordered (t major, var minor).

    With mode ``per-variable-zscore`` each variable is centered and scaled
    by its mean and standard deviation pooled over all valid cells and all
    time steps; the offsets/divisors actually used are recorded on the
    returned matrix.  A zero-variance variable under z-scoring raises
    :class:`DegenerateDataError`.
    """
    if std is None:
        std = StandardizationSpec()
    ys, xs = np.nonzero(cube.mask)
    n = ys.size
    if n == 0:
        raise DegenerateDataError("cube has zero valid cells")
    index_map = np.stack([ys, xs], axis=1).astype(np.int64)
    # (n, nt, nvars) -> (n, nt*nvars), time-major feature order
    series = cube.values[ys, xs].astype(np.float64)

    if std.mode == "per-variable-zscore":
        if std.offsets is not None:
            offsets = np.asarray(std.offsets, dtype=np.float64)
            divisors = np.asarray(std.divisors, dtype=np.float64)
        else:
            offsets = series.mean(axis=(0, 1))
            divisors = series.std(axis=(0, 1))
            bad = ~(divisors > 0)
            if np.any(bad):
                which = np.nonzero(bad)[0].tolist()
                raise DegenerateDataError(
                    f"zero-variance variable(s) {which} under z-score mode"
                )
        series = (series - offsets) / divisors
        applied = StandardizationSpec(std.mode, offsets, divisors)
    else:
        applied = StandardizationSpec("none")

    data = series.reshape(n, cube.nt * cube.nvars)
    return SampleMatrix(
        data=data,
        index_map=index_map,
        nt=cube.nt,
        nvars=cube.nvars,
        standardization=applied,
    )


def unflatten(matrix: SampleMatrix, sample: int) -> np.ndarray:
    """Recover one sample's (nt, nvars) series from its matrix row."""
    return matrix.data[sample].reshape(matrix.nt, matrix.nvars)


def subsample(matrix: SampleMatrix, max_n: int, seed: int) -> SampleMatrix:
    """Uniform without-replacement subsample of at most ``max_n`` rows.

    The input is returned unchanged when it already fits.  Selection is
    drawn from the Philox stream for ``seed`` and the kept rows stay in
    their original (canonical) order, index_map entries included, so the
    operation is deterministic and idempotent.
    """
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    n = matrix.n_samples
    if n <= max_n:
        return matrix
    rng = rng_from_seed(seed)
    keep = rng.choice(n, size=max_n, replace=False)
    keep.sort()
    return SampleMatrix(
        data=matrix.data[keep],
        index_map=matrix.index_map[keep],
        nt=matrix.nt,
        nvars=matrix.nvars,
        standardization=matrix.standardization,
    )
