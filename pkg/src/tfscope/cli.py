"""Command-line entry point.

Subcommands: gen-toy, characterize, pca, le, tsne, pctsne, suggest-ems,
unmix, render-map, serve. Exit status 0 on success, 1 on usage errors
(bad flags, malformed config), 2 on data errors (unreadable or
degenerate inputs). Errors print to stderr as a single line with an
"error:" prefix. All outputs are deterministic in the flags; no
timestamps are written.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from typing import Optional

import numpy as np

from .cube import StandardizationSpec, flatten, load_cube, save_cube, subsample
from .errors import TfscopeError
from .laplacian import build_knn_graph, le_embed
from .pca import pca_eof
from .pipeline import (
    CharacterizationConfig,
    characterize,
    config_from_dict,
    export_characterization,
    export_tfs,
    render_map,
)
from .synth import generate_toy_cube
from .tsne import TsneParams, pc_tsne, tsne_run
from .unmix import (
    FLOAT_FORMAT,
    endmembers_from_samples,
    load_endmembers_csv,
    misfit_summary,
    save_endmembers_csv,
    save_fractions_csv,
    suggest_endmembers,
    unmix,
)


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exit status 1."""

    def error(self, message):
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _load_matrix(cube_path: str, standardization: str, cap: Optional[int], seed: int):
    cube = load_cube(cube_path)
    matrix = flatten(cube, StandardizationSpec(mode=standardization))
    if cap is not None:
        matrix = subsample(matrix, cap, seed)
    return cube, matrix


def _read_tfs_csv(path: str):
    """(index_map, coordinates) from a TFS CSV export."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:3] != ["sample_id", "y", "x"]:
        raise TfscopeError(f"{path} is not a TFS CSV (bad header)")
    ids = np.array([[int(r[1]), int(r[2])] for r in rows[1:]], dtype=np.int64)
    coords = np.array([[float(v) for v in r[3:]] for r in rows[1:]], dtype=np.float64)
    return ids, coords


def _rows_for_index_map(matrix, index_map: np.ndarray) -> np.ndarray:
    """Positions of (y, x) pairs inside the matrix's own index map."""
    lookup = {(int(y), int(x)): i for i, (y, x) in enumerate(matrix.index_map)}
    out = np.empty(index_map.shape[0], dtype=np.int64)
    for i, (y, x) in enumerate(index_map):
        key = (int(y), int(x))
        if key not in lookup:
            raise TfscopeError(f"sample (y={y}, x={x}) not present in the cube's valid cells")
        out[i] = lookup[key]
    return out


def _add_sampling_flags(p: argparse.ArgumentParser, cap_default=None):
    p.add_argument(
        "--standardization",
        choices=["none", "per-variable-zscore"],
        default="per-variable-zscore",
        help="per-variable pooled z-score, or raw values",
    )
    p.add_argument("--subsample-cap", type=int, default=cap_default, help="max samples kept")
    p.add_argument("--subsample-seed", type=int, default=0, help="subsample draw seed")


def _cmd_gen_toy(args) -> int:
    cube, field = generate_toy_cube(args.ny, args.nx, args.nt, seed=args.seed)
    header = args.out if args.out.endswith(".json") else args.out + ".json"
    save_cube(cube, header)
    stem = header[: -len(".json")]
    weights_path = stem + ".weights.csv"
    with open(weights_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["y", "x", "w_1", "w_2", "w_3"])
        for y in range(field.weights.shape[0]):
            for x in range(field.weights.shape[1]):
                writer.writerow(
                    [str(y), str(x)] + [FLOAT_FORMAT % v for v in field.weights[y, x]]
                )
    for path in (header, stem + ".f32", stem + ".mask", weights_path):
        print(f"wrote {path}")
    return 0


def _config_from_args(args) -> CharacterizationConfig:
    if args.config is not None:
        with open(args.config) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"config file {args.config}: {exc}") from exc
        base = config_from_dict(raw)
    else:
        base = CharacterizationConfig()
    tsne = base.tsne
    tsne_overrides = {}
    if args.perplexity is not None:
        tsne_overrides["perplexity"] = args.perplexity
    if args.max_iter is not None:
        tsne_overrides["max_iter"] = args.max_iter
    if args.tsne_seed is not None:
        tsne_overrides["seed"] = args.tsne_seed
    if tsne_overrides:
        merged = {
            "perplexity": tsne.perplexity,
            "out_dims": tsne.out_dims,
            "max_iter": tsne.max_iter,
            "early_exaggeration_factor": tsne.early_exaggeration_factor,
            "early_exaggeration_iters": tsne.early_exaggeration_iters,
            "learning_rate": tsne.learning_rate,
            "seed": tsne.seed,
        }
        merged.update(tsne_overrides)
        tsne = TsneParams(**merged)
    return CharacterizationConfig(
        standardization=args.standardization
        if args.standardization is not None
        else base.standardization,
        subsample_cap=args.subsample_cap
        if args.subsample_cap is not None
        else base.subsample_cap,
        subsample_seed=args.subsample_seed
        if args.subsample_seed is not None
        else base.subsample_seed,
        pca_k=args.pca_k if args.pca_k is not None else base.pca_k,
        le_k=args.le_k if args.le_k is not None else base.le_k,
        le_normalization=args.le_normalization
        if args.le_normalization is not None
        else base.le_normalization,
        le_d=args.le_d if args.le_d is not None else base.le_d,
        tsne=tsne,
        tsne_runs=args.tsne_runs if args.tsne_runs is not None else base.tsne_runs,
        rgb_dims=tuple(int(v) for v in args.rgb_dims.split(","))
        if args.rgb_dims is not None
        else base.rgb_dims,
    )


def _cmd_characterize(args) -> int:
    config = _config_from_args(args)
    cube = load_cube(args.cube)
    result = characterize(cube, config)
    files = export_characterization(result, args.out, cube.ny, cube.nx)
    for name in files:
        print(f"wrote {args.out.rstrip('/')}/{name}")
    return 0


def _cmd_pca(args) -> int:
    cube, matrix = _load_matrix(args.cube, args.standardization, args.subsample_cap, args.subsample_seed)
    decomp = pca_eof(matrix, args.k)
    export_tfs(
        decomp.scores,
        matrix.index_map,
        args.out,
        method="pca",
        params={"k": args.k},
        seed=args.subsample_seed,
        eigenvalues=decomp.eigenvalues,
        variance_fractions=decomp.variance_fractions,
    )
    print(f"wrote {args.out}")
    return 0


def _cmd_le(args) -> int:
    cube, matrix = _load_matrix(args.cube, args.standardization, args.subsample_cap, args.subsample_seed)
    graph = build_knn_graph(matrix, args.k_neighbors, kernel=args.kernel)
    emb = le_embed(graph, args.d, args.normalization)
    export_tfs(
        emb.coordinates,
        matrix.index_map,
        args.out,
        method="le",
        params={
            "k_neighbors": args.k_neighbors,
            "kernel": args.kernel,
            "normalization": args.normalization,
            "d": args.d,
            "component_count": int(emb.component_count),
            "repairs": [[int(i), int(j), float(w)] for i, j, w in emb.repairs],
        },
        seed=args.subsample_seed,
        eigenvalues=emb.eigenvalues,
    )
    print(f"wrote {args.out}")
    return 0


def _cmd_tsne(args) -> int:
    cube, matrix = _load_matrix(args.cube, args.standardization, args.subsample_cap, args.subsample_seed)
    params = TsneParams(perplexity=args.perplexity, max_iter=args.max_iter, seed=args.seed)
    real = tsne_run(matrix, params)
    export_tfs(
        real.coordinates,
        matrix.index_map,
        args.out,
        method="tsne",
        params={
            "perplexity": args.perplexity,
            "max_iter": args.max_iter,
            "kl_initial": float(real.kl_initial),
            "kl_final": float(real.kl_final),
        },
        seed=args.seed,
    )
    print(f"wrote {args.out}")
    return 0


def _cmd_pctsne(args) -> int:
    cube, matrix = _load_matrix(args.cube, args.standardization, args.subsample_cap, args.subsample_seed)
    params = TsneParams(perplexity=args.perplexity, max_iter=args.max_iter, seed=args.seed)
    result = pc_tsne(matrix, params, args.runs)
    export_tfs(
        result.stacked_scores,
        matrix.index_map,
        args.out,
        method="pctsne",
        params={
            "runs": args.runs,
            "perplexity": args.perplexity,
            "max_iter": args.max_iter,
            "kl_final": [float(r.kl_final) for r in result.realizations],
        },
        seed=args.seed,
        variance_fractions=result.variance_fractions,
    )
    print(f"wrote {args.out}")
    return 0


def _cmd_suggest_ems(args) -> int:
    index_map, coords = _read_tfs_csv(args.tfs)
    cube, matrix = _load_matrix(args.cube, args.standardization, None, 0)
    rows = _rows_for_index_map(matrix, index_map)
    ranked = suggest_endmembers(coords[:, : args.dims], matrix.data[rows], args.n_directions)
    picked = [int(rows[i]) for i in ranked[: args.top]]
    ems = endmembers_from_samples(matrix, picked, labels=[f"sample_{g}" for g in picked])
    save_endmembers_csv(ems, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_unmix(args) -> int:
    cube, matrix = _load_matrix(args.cube, args.standardization, args.subsample_cap, args.subsample_seed)
    ems = load_endmembers_csv(args.ems)
    result = unmix(matrix, ems, nonneg=args.nonneg)
    save_fractions_csv(result, matrix, args.out)
    summary = misfit_summary(result, args.threshold)
    print(f"wrote {args.out}")
    print(
        f"misfit: {summary['fraction_below'] * 100:.1f}% of samples below "
        f"{args.threshold:g}% (mean {summary['mean']:.3g}%, median "
        f"{summary['median']:.3g}%, max {summary['max']:.3g}%)"
    )
    return 0


def _cmd_render_map(args) -> int:
    index_map, coords = _read_tfs_csv(args.tfs)
    cube = load_cube(args.cube)
    if args.rgb is not None:
        dims = [int(v) - 1 for v in args.rgb.split(",")]
        if len(dims) != 3:
            raise ValueError("--rgb needs exactly 3 comma-separated dims")
        values = coords[:, dims]
    else:
        values = coords[:, args.dim - 1]
    render_map(values, index_map, cube.ny, cube.nx, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    serve(port=args.port, data_dir=args.data_dir, workers=args.threads, ui_dir=args.ui_dir)
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="tfscope",
        description="Joint characterization of spatiotemporal data manifolds",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("gen-toy", help="generate the synthetic mixing cube", formatter_class=fmt)
    p.add_argument("--out", required=True, help="output stem or header path (.json)")
    p.add_argument("--seed", type=int, default=0, help="weight-field seed")
    p.add_argument("--ny", type=int, default=100, help="grid rows")
    p.add_argument("--nx", type=int, default=100, help="grid columns")
    p.add_argument("--nt", type=int, default=100, help="time steps")
    p.set_defaults(func=_cmd_gen_toy)

    p = sub.add_parser(
        "characterize", help="run PCA + LE + PC(t-SNE) on a shared subsample", formatter_class=fmt
    )
    p.add_argument("--cube", required=True, help="cube header path")
    p.add_argument("--config", default=None, help="JSON config file (flags override it)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--standardization", choices=["none", "per-variable-zscore"], default=None,
                   help="standardization mode (default per-variable-zscore)")
    p.add_argument("--subsample-cap", type=int, default=None, help="shared cap (default 5000)")
    p.add_argument("--subsample-seed", type=int, default=None, help="subsample seed (default 0)")
    p.add_argument("--pca-k", type=int, default=None, help="PCA components (default 10)")
    p.add_argument("--le-k", type=int, default=None, help="LE neighbors (default 10)")
    p.add_argument("--le-normalization", choices=["unnormalized", "symmetric"], default=None,
                   help="Laplacian normalization (default unnormalized)")
    p.add_argument("--le-d", type=int, default=None, help="LE dims (default 2)")
    p.add_argument("--perplexity", type=float, default=None, help="t-SNE perplexity (default 30)")
    p.add_argument("--max-iter", type=int, default=None, help="t-SNE iterations (default 1000)")
    p.add_argument("--tsne-seed", type=int, default=None, help="t-SNE base seed (default 0)")
    p.add_argument("--tsne-runs", type=int, default=None, help="PC(t-SNE) realizations (default 10)")
    p.add_argument("--rgb-dims", default=None, help="RGB channel dims, e.g. 0,1,2")
    p.set_defaults(func=_cmd_characterize)

    p = sub.add_parser("pca", help="PC/EOF decomposition to a TFS CSV", formatter_class=fmt)
    p.add_argument("--cube", required=True, help="cube header path")
    p.add_argument("--k", type=int, default=10, help="components")
    p.add_argument("--out", required=True, help="output CSV")
    _add_sampling_flags(p)
    p.set_defaults(func=_cmd_pca)

    p = sub.add_parser("le", help="Laplacian Eigenmaps embedding to a TFS CSV", formatter_class=fmt)
    p.add_argument("--cube", required=True, help="cube header path")
    p.add_argument("--k-neighbors", type=int, default=10, help="kNN graph degree")
    p.add_argument("--kernel", choices=["heat", "binary"], default="heat", help="edge weights")
    p.add_argument(
        "--normalization", choices=["unnormalized", "symmetric"], default="unnormalized",
        help="Laplacian normalization",
    )
    p.add_argument("--d", type=int, default=2, help="embedding dims")
    p.add_argument("--out", required=True, help="output CSV")
    _add_sampling_flags(p, cap_default=5000)
    p.set_defaults(func=_cmd_le)

    p = sub.add_parser("tsne", help="single t-SNE realization to a TFS CSV", formatter_class=fmt)
    p.add_argument("--cube", required=True, help="cube header path")
    p.add_argument("--perplexity", type=float, default=30.0, help="target perplexity")
    p.add_argument("--max-iter", type=int, default=1000, help="iterations")
    p.add_argument("--seed", type=int, default=0, help="init seed")
    p.add_argument("--out", required=True, help="output CSV")
    _add_sampling_flags(p, cap_default=5000)
    p.set_defaults(func=_cmd_tsne)

    p = sub.add_parser("pctsne", help="PC(t-SNE) stack to a TFS CSV", formatter_class=fmt)
    p.add_argument("--cube", required=True, help="cube header path")
    p.add_argument("--runs", type=int, default=10, help="realizations stacked")
    p.add_argument("--perplexity", type=float, default=30.0, help="target perplexity")
    p.add_argument("--max-iter", type=int, default=1000, help="iterations per run")
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--out", required=True, help="output CSV")
    _add_sampling_flags(p, cap_default=5000)
    p.set_defaults(func=_cmd_pctsne)

    p = sub.add_parser(
        "suggest-ems", help="rank endmember candidates from a TFS CSV", formatter_class=fmt
    )
    p.add_argument("--tfs", required=True, help="embedding CSV (from pca/le/tsne/pctsne)")
    p.add_argument("--cube", required=True, help="cube header path")
    p.add_argument("--dims", type=int, default=2, help="leading dims to scan")
    p.add_argument("--n-directions", type=int, default=64, help="signed directions")
    p.add_argument("--top", type=int, default=3, help="candidates to keep")
    p.add_argument("--standardization", choices=["none", "per-variable-zscore"],
                   default="per-variable-zscore", help="standardization for signatures")
    p.add_argument("--out", required=True, help="endmember CSV to write")
    p.set_defaults(func=_cmd_suggest_ems)

    p = sub.add_parser("unmix", help="invert the temporal mixture model", formatter_class=fmt)
    p.add_argument("--cube", required=True, help="cube header path")
    p.add_argument("--ems", required=True, help="endmember CSV")
    p.add_argument("--out", required=True, help="fractions CSV to write")
    p.add_argument("--nonneg", action="store_true", help="enforce nonnegative weights")
    p.add_argument("--threshold", type=float, default=10.0, help="misfit summary threshold (%%)")
    _add_sampling_flags(p)
    p.set_defaults(func=_cmd_unmix)

    p = sub.add_parser("render-map", help="render a TFS dim to a PGM/PPM map", formatter_class=fmt)
    p.add_argument("--tfs", required=True, help="embedding CSV")
    p.add_argument("--cube", required=True, help="cube header path (for grid dims)")
    p.add_argument("--dim", type=int, default=1, help="1-based dim for grayscale")
    p.add_argument("--rgb", default=None, help="three 1-based dims for RGB, e.g. 1,2,3")
    p.add_argument("--out", required=True, help="output .pgm/.ppm path")
    p.set_defaults(func=_cmd_render_map)

    p = sub.add_parser("serve", help="start the local HTTP service", formatter_class=fmt)
    p.add_argument("--port", type=int, default=8641, help="listen port")
    p.add_argument("--data-dir", default=None, help="data directory (or TFSCOPE_DATA_DIR)")
    p.add_argument("--threads", type=int, default=1, help="job worker pool size")
    p.add_argument(
        "--ui-dir", default=None, help="static UI assets (or TFSCOPE_UI_DIR, or frontend/dist)"
    )
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except TfscopeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
