"""Joint characterization: all three DR methods over one shared subsample.

One flatten/standardize/subsample pass feeds PCA, Laplacian Eigenmaps,
and PC(t-SNE), so every embedding indexes the same samples and the UI
can link points across panels. Also houses the class-separability
statistic and the on-disk exports (TFS CSVs with JSON metadata
sidecars, PGM/PPM map renders).
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .cube import DataCube, SampleMatrix, StandardizationSpec, flatten, subsample
from .errors import DegenerateDataError
from .laplacian import LeEmbedding, build_knn_graph, le_embed
from .pca import LinearDecomposition, pca_eof
from .tsne import PcTsneResult, TsneParams, pc_tsne
from .unmix import FLOAT_FORMAT

# per-method capacity defaults; the shared subsample respects both
LE_CAP = 25_000
TSNE_CAP = 50_000


@dataclass(frozen=True)
class CharacterizationConfig:
    """Everything one characterization run depends on."""

    standardization: str = "per-variable-zscore"
    subsample_cap: int = 5000
    subsample_seed: int = 0
    pca_k: int = 10
    le_k: int = 10
    le_normalization: str = "unnormalized"
    le_d: int = 2
    tsne: TsneParams = field(default_factory=TsneParams)
    tsne_runs: int = 10
    rgb_dims: tuple = (0, 1, 2)

    def __post_init__(self):
        if self.standardization not in ("none", "per-variable-zscore"):
            raise ValueError(f"unknown standardization {self.standardization!r}")
        if self.subsample_cap < 1:
            raise ValueError("subsample_cap must be >= 1")
        if self.subsample_cap > min(LE_CAP, TSNE_CAP):
            raise ValueError(
                f"subsample_cap {self.subsample_cap} exceeds the LE capacity default {LE_CAP}"
            )
        if self.pca_k < 1 or self.le_k < 1 or self.le_d < 1 or self.tsne_runs < 2:
            raise ValueError("pca_k, le_k, le_d must be >= 1 and tsne_runs >= 2")
        if self.le_normalization not in ("unnormalized", "symmetric"):
            raise ValueError(f"unknown le_normalization {self.le_normalization!r}")
        if len(self.rgb_dims) != 3:
            raise ValueError("rgb_dims must name exactly 3 dims")

    def to_dict(self) -> dict:
        return {
            "standardization": self.standardization,
            "subsample_cap": self.subsample_cap,
            "subsample_seed": self.subsample_seed,
            "pca_k": self.pca_k,
            "le_k": self.le_k,
            "le_normalization": self.le_normalization,
            "le_d": self.le_d,
            "tsne": {
                "perplexity": self.tsne.perplexity,
                "out_dims": self.tsne.out_dims,
                "max_iter": self.tsne.max_iter,
                "early_exaggeration_factor": self.tsne.early_exaggeration_factor,
                "early_exaggeration_iters": self.tsne.early_exaggeration_iters,
                "learning_rate": self.tsne.learning_rate,
                "seed": self.tsne.seed,
            },
            "tsne_runs": self.tsne_runs,
            "rgb_dims": list(self.rgb_dims),
        }


_TSNE_KEYS = {
    "perplexity",
    "out_dims",
    "max_iter",
    "early_exaggeration_factor",
    "early_exaggeration_iters",
    "learning_rate",
    "seed",
}
_CONFIG_KEYS = {
    "standardization",
    "subsample_cap",
    "subsample_seed",
    "pca_k",
    "le_k",
    "le_normalization",
    "le_d",
    "tsne",
    "tsne_runs",
    "rgb_dims",
}


def config_from_dict(raw: dict) -> CharacterizationConfig:
    """Strict parse: unknown keys are rejected, known keys type-checked."""
    if not isinstance(raw, dict):
        raise ValueError("config must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {k: raw[k] for k in raw if k not in ("tsne", "rgb_dims")}
    if "rgb_dims" in raw:
        kwargs["rgb_dims"] = tuple(raw["rgb_dims"])
    if "tsne" in raw:
        traw = raw["tsne"]
        if not isinstance(traw, dict):
            raise ValueError("config key 'tsne' must be an object")
        tunknown = set(traw) - _TSNE_KEYS
        if tunknown:
            raise ValueError(f"unknown tsne keys: {sorted(tunknown)}")
        kwargs["tsne"] = TsneParams(**traw)
    return CharacterizationConfig(**kwargs)


@dataclass(frozen=True)
class JointCharacterization:
    """The three embeddings over one shared subsample."""

    pca: LinearDecomposition
    le: LeEmbedding
    pctsne: PcTsneResult
    matrix: SampleMatrix
    config: CharacterizationConfig
    timings: dict


@dataclass(frozen=True)
class SeparabilityReport:
    """Pairwise Transformed Divergence between labeled classes."""

    classes: tuple
    td: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def pair(self, a, b) -> float:
        ia = self.classes.index(a)
        ib = self.classes.index(b)
        return float(self.td[ia, ib])


def characterize(cube: DataCube, config: CharacterizationConfig) -> JointCharacterization:
    """Run PCA, LE, and PC(t-SNE) on one shared subsample of the cube.

    Deterministic in the config; a failure in any one method aborts the
    run with that method named.
    """
    matrix = flatten(cube, StandardizationSpec(mode=config.standardization))
    matrix = subsample(matrix, config.subsample_cap, config.subsample_seed)
    n = matrix.n_samples
    timings = {}
    k = min(config.pca_k, n, matrix.n_features)

    stage = "pca"
    try:
        t0 = time.monotonic()
        pca_result = pca_eof(matrix, k)
        timings["pca"] = time.monotonic() - t0

        stage = "le"
        t0 = time.monotonic()
        graph = build_knn_graph(matrix, min(config.le_k, n - 1), kernel="heat")
        le_result = le_embed(graph, min(config.le_d, n - 1), config.le_normalization)
        timings["le"] = time.monotonic() - t0

        stage = "pctsne"
        t0 = time.monotonic()
        pctsne_result = pc_tsne(matrix, config.tsne, config.tsne_runs)
        timings["pctsne"] = time.monotonic() - t0
    except Exception as exc:
        raise type(exc)(f"{stage}: {exc}") from exc
    return JointCharacterization(
        pca=pca_result,
        le=le_result,
        pctsne=pctsne_result,
        matrix=matrix,
        config=config,
        timings=timings,
    )


def _class_stats(coords: np.ndarray, members: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = coords[members].mean(axis=0)
    centered = coords[members] - mean
    cov = centered.T @ centered / (members.sum() - 1)
    d = cov.shape[0]
    cov = cov + (1e-9 * np.trace(cov) / d) * np.eye(d)
    return mean, cov


def transformed_divergence(coordinates: np.ndarray, labels: np.ndarray) -> SeparabilityReport:
    """Pairwise TD = 2 (1 - exp(-D / 8)) over labeled point clouds.

    D is the symmetric Gaussian divergence from per-class means and
    (ridge-regularized) covariances. Every class needs at least d + 1
    samples.
    """
    coords = np.asarray(coordinates, dtype=np.float64)
    if coords.ndim != 2:
        raise ValueError("coordinates must be (n, d)")
    labels = np.asarray(labels)
    if labels.shape[0] != coords.shape[0]:
        raise ValueError("labels must match coordinates row count")
    classes = tuple(sorted(set(labels.tolist())))
    if len(classes) < 2:
        raise ValueError("need at least 2 classes")
    d = coords.shape[1]
    means = np.zeros((len(classes), d))
    covs = np.zeros((len(classes), d, d))
    for i, c in enumerate(classes):
        members = labels == c
        if members.sum() < d + 1:
            raise DegenerateDataError(
                f"class {c!r} has {int(members.sum())} samples; needs at least {d + 1}"
            )
        means[i], covs[i] = _class_stats(coords, members)
    td = np.zeros((len(classes), len(classes)))
    for i in range(len(classes)):
        for j in range(i + 1, len(classes)):
            c1, c2 = covs[i], covs[j]
            inv1 = np.linalg.inv(c1)
            inv2 = np.linalg.inv(c2)
            delta = (means[i] - means[j])[:, None]
            div = 0.5 * np.trace((c1 - c2) @ (inv2 - inv1)) + 0.5 * np.trace(
                (inv1 + inv2) @ (delta @ delta.T)
            )
            value = 2.0 * (1.0 - np.exp(-div / 8.0))
            td[i, j] = td[j, i] = value
    return SeparabilityReport(classes=classes, td=td, means=means, covariances=covs)


def export_tfs(
    coordinates: np.ndarray,
    index_map: np.ndarray,
    path: str,
    method: str,
    params: dict,
    seed: int,
    eigenvalues=None,
    variance_fractions=None,
) -> None:
    """Write a TFS CSV plus its JSON metadata sidecar.

    CSV header is sample_id,y,x,dim1..dimd with 9-significant-digit
    values; the sidecar lands next to it as <stem>.meta.json.
    """
    coords = np.asarray(coordinates, dtype=np.float64)
    d = coords.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "y", "x"] + [f"dim{j + 1}" for j in range(d)])
        for i in range(coords.shape[0]):
            row = [str(i), str(int(index_map[i, 0])), str(int(index_map[i, 1]))]
            row += [FLOAT_FORMAT % v for v in coords[i]]
            writer.writerow(row)
    meta = {
        "method": method,
        "params": params,
        "seed": seed,
        "eigenvalues": None if eigenvalues is None else [float(v) for v in eigenvalues],
        "variance_fractions": None
        if variance_fractions is None
        else [float(v) for v in variance_fractions],
    }
    sidecar = os.path.splitext(path)[0] + ".meta.json"
    with open(sidecar, "w") as fh:
        json.dump(meta, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def _stretch_channel(values: np.ndarray) -> np.ndarray:
    lo, hi = np.percentile(values, [2.0, 98.0])
    if hi <= lo:
        return np.full(values.shape, 128, dtype=np.uint8)  # constant field
    scaled = np.clip((values - lo) / (hi - lo), 0.0, 1.0)
    return np.round(scaled * 255.0).astype(np.uint8)


def render_map(
    values: np.ndarray, index_map: np.ndarray, ny: int, nx: int, path: str
) -> None:
    """Render per-sample values to a binary PGM (P5) or PPM (P6) map.

    1-D values give grayscale, (n, 3) values an RGB composite; each
    channel is linearly stretched to its 2nd-98th percentile. Cells
    without a sample stay black.
    """
    vals = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise ValueError("map values must be finite")
    ys = index_map[:, 0]
    xs = index_map[:, 1]
    if vals.ndim == 1:
        grid = np.zeros((ny, nx), dtype=np.uint8)
        grid[ys, xs] = _stretch_channel(vals)
        header = f"P5\n{nx} {ny}\n255\n".encode("ascii")
    elif vals.ndim == 2 and vals.shape[1] == 3:
        grid = np.zeros((ny, nx, 3), dtype=np.uint8)
        for c in range(3):
            grid[ys, xs, c] = _stretch_channel(vals[:, c])
        header = f"P6\n{nx} {ny}\n255\n".encode("ascii")
    else:
        raise ValueError("values must be (n,) for PGM or (n, 3) for PPM")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(grid.tobytes())


def declared_export_files(config: CharacterizationConfig) -> list:
    """The exact files a characterization export writes, in order."""
    files = [
        "config.json",
        "pca.csv",
        "pca.meta.json",
        "le.csv",
        "le.meta.json",
        "pctsne.csv",
        "pctsne.meta.json",
        "pca_pc1.pgm",
        "le_dim1.pgm",
        "pctsne_pc1.pgm",
    ]
    if max(config.rgb_dims) < config.pca_k:
        files.append("pca_rgb.ppm")
    if max(config.rgb_dims) < config.le_d:
        files.append("le_rgb.ppm")
    return files


def export_characterization(result: JointCharacterization, out_dir: str, ny: int, nx: int) -> list:
    """Write every declared export file for a characterization run.

    Returns the list of files written (relative to ``out_dir``). All
    content is deterministic in the config; no timestamps.
    """
    os.makedirs(out_dir, exist_ok=True)
    cfg = result.config
    im = result.matrix.index_map
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump(cfg.to_dict(), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")
    export_tfs(
        result.pca.scores,
        im,
        os.path.join(out_dir, "pca.csv"),
        method="pca",
        params={"k": int(result.pca.k)},
        seed=cfg.subsample_seed,
        eigenvalues=result.pca.eigenvalues,
        variance_fractions=result.pca.variance_fractions,
    )
    export_tfs(
        result.le.coordinates,
        im,
        os.path.join(out_dir, "le.csv"),
        method="le",
        params={
            "k_neighbors": cfg.le_k,
            "normalization": cfg.le_normalization,
            "d": cfg.le_d,
            "component_count": int(result.le.component_count),
            "repairs": [[int(i), int(j), float(w)] for i, j, w in result.le.repairs],
        },
        seed=cfg.subsample_seed,
        eigenvalues=result.le.eigenvalues,
    )
    export_tfs(
        result.pctsne.stacked_scores,
        im,
        os.path.join(out_dir, "pctsne.csv"),
        method="pctsne",
        params={
            "runs": cfg.tsne_runs,
            "perplexity": cfg.tsne.perplexity,
            "max_iter": cfg.tsne.max_iter,
            "kl_final": [float(r.kl_final) for r in result.pctsne.realizations],
        },
        seed=cfg.tsne.seed,
        variance_fractions=result.pctsne.variance_fractions,
    )
    render_map(result.pca.scores[:, 0], im, ny, nx, os.path.join(out_dir, "pca_pc1.pgm"))
    render_map(result.le.coordinates[:, 0], im, ny, nx, os.path.join(out_dir, "le_dim1.pgm"))
    render_map(
        result.pctsne.stacked_scores[:, 0], im, ny, nx, os.path.join(out_dir, "pctsne_pc1.pgm")
    )
    files = declared_export_files(cfg)
    if "pca_rgb.ppm" in files and max(cfg.rgb_dims) < result.pca.k:
        render_map(
            result.pca.scores[:, list(cfg.rgb_dims)],
            im,
            ny,
            nx,
            os.path.join(out_dir, "pca_rgb.ppm"),
        )
    if "le_rgb.ppm" in files and max(cfg.rgb_dims) < result.le.coordinates.shape[1]:
        render_map(
            result.le.coordinates[:, list(cfg.rgb_dims)],
            im,
            ny,
            nx,
            os.path.join(out_dir, "le_rgb.ppm"),
        )
    return [f for f in files if os.path.exists(os.path.join(out_dir, f))]
