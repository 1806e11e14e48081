"""Release criteria, one test per criterion, at their stated tolerances.

Each test prints one summary line (visible with ``pytest -s`` or on
failure) and asserts the criterion's thresholds. Runtime budgets are
stated for a 4-core workstation and scaled by 4 / available_cores.
"""

import json
import os
import resource
import subprocess
import sys
import time

import numpy as np
import pytest
import scipy.linalg
import scipy.spatial.distance

from tfscope.cube import StandardizationSpec, flatten, rng_from_seed, subsample
from tfscope.laplacian import NeighborGraph, build_knn_graph, laplacian, le_embed
from tfscope.pipeline import export_tfs, transformed_divergence
from tfscope.synth import eval_signals, generate_toy_cube
from tfscope.tsne import TsneParams, calibrate_conditionals, pc_tsne, symmetrize_joint, tsne_run
from tfscope.unmix import endmembers_from_signatures, misfit_summary, unmix

_SCALE = max(1.0, 4.0 / len(os.sched_getaffinity(0)))


def _report(criterion: int, ok: bool, detail: str) -> None:
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} ({detail})", flush=True)


def _budget(seconds: float) -> float:
    return seconds * _SCALE


@pytest.fixture(scope="module")
def toy():
    cube, field = generate_toy_cube(100, 100, 100, seed=42)
    return cube, field


@pytest.fixture(scope="module")
def sub5000(toy):
    cube, _ = toy
    mat = flatten(cube, StandardizationSpec(mode="per-variable-zscore"))
    return subsample(mat, 5000, 0)


def test_criterion_01_toy_pca_variance_partition(toy):
    from tfscope.pca import pca_eof

    cube, _ = toy
    t0 = time.monotonic()
    mat = flatten(cube)
    decomp = pca_eof(mat, min(mat.n_samples, mat.data.shape[1]))
    elapsed = time.monotonic() - t0
    vf01 = float(decomp.variance_fractions[0] + decomp.variance_fractions[1])
    tail = float(decomp.variance_fractions[2:].max())
    ok = vf01 > 0.99 and tail < 1e-9 and elapsed < _budget(10.0)
    _report(1, ok, f"vf0+vf1={vf01:.15f}, max tail fraction={tail:.3e}, {elapsed:.1f}s")
    assert vf01 > 0.99
    assert tail < 1e-9
    assert elapsed < _budget(10.0)


@pytest.mark.slow
def test_criterion_02_pctsne_variance_partition(sub5000):
    t0 = time.monotonic()
    result = pc_tsne(sub5000, TsneParams(perplexity=30.0, seed=0), runs=10)
    elapsed = time.monotonic() - t0
    vf01 = float(result.variance_fractions[0] + result.variance_fractions[1])
    in_soft = 0.78 <= vf01 <= 0.98
    ok = vf01 >= 0.60 and elapsed < _budget(900.0)
    _report(
        2,
        ok,
        f"vf0+vf1={vf01:.4f}, soft range [0.78, 0.98] {'met' if in_soft else 'NOT met'}, "
        f"hard floor 0.60, {elapsed:.0f}s",
    )
    assert vf01 >= 0.60, f"stacked variance fraction {vf01:.4f} below the 0.60 floor"
    assert elapsed < _budget(900.0)


def test_criterion_03_mixture_weight_recovery(toy):
    cube, field = toy
    t0 = time.monotonic()
    mat = flatten(cube, StandardizationSpec(mode="none"))
    ems = endmembers_from_signatures(eval_signals(cube.nt).stacked(), labels=("s1", "s2", "s3"))
    result = unmix(mat, ems)
    elapsed = time.monotonic() - t0
    err = float(np.abs(result.fractions - field.flat()).max())
    below = misfit_summary(result, 10.0)["fraction_below"]
    ok = err < 1e-6 and below == 1.0 and elapsed < _budget(30.0)
    _report(3, ok, f"max weight error={err:.3e}, misfit<10% fraction={below:.4f}, {elapsed:.1f}s")
    assert err < 1e-6
    assert below == 1.0
    assert elapsed < _budget(30.0)


def _graph_from_weights(weights, features, kernel="binary"):
    import scipy.sparse

    w = scipy.sparse.csr_matrix(np.asarray(weights, dtype=np.float64))
    return NeighborGraph(
        n=w.shape[0], weights=w, k=1, metric="euclidean",
        kernel=kernel, bandwidth=0.0, features=np.asarray(features, dtype=np.float64),
    )


def _union_find_components(weights) -> int:
    n = weights.shape[0]
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    coo = weights.tocoo()
    for i, j in zip(coo.row, coo.col):
        ri, rj = find(int(i)), find(int(j))
        if ri != rj:
            parent[ri] = rj
    return len({find(i) for i in range(n)})


def test_criterion_04_le_oracle_suite():
    t0 = time.monotonic()
    p3 = _graph_from_weights([[0, 1, 0], [1, 0, 1], [0, 1, 0]], np.zeros((3, 1)))
    np.testing.assert_allclose(
        np.linalg.eigvalsh(laplacian(p3).toarray()), [0.0, 1.0, 3.0], atol=1e-12
    )
    k3 = _graph_from_weights(np.ones((3, 3)) - np.eye(3), np.zeros((3, 1)))
    np.testing.assert_allclose(
        np.linalg.eigvalsh(laplacian(k3).toarray()), [0.0, 3.0, 3.0], atol=1e-12
    )
    c4 = _graph_from_weights(
        [[0, 1, 0, 1], [1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0]],
        np.arange(4, dtype=np.float64)[:, None],
    )
    emb = le_embed(c4, 2)
    np.testing.assert_allclose(emb.eigenvalues, [2.0, 2.0], atol=1e-10)

    max_resid = 0.0
    rng = rng_from_seed(4)
    for _ in range(50):
        n = int(rng.integers(8, 41))
        f = int(rng.integers(2, 6))
        k = int(rng.integers(1, 5))
        data = rng.standard_normal((n, f))
        graph = build_knn_graph(data, k, kernel="binary")
        vals = np.linalg.eigvalsh(laplacian(graph).toarray())
        zero_mult = int((vals < 1e-8).sum())
        assert zero_mult == _union_find_components(graph.weights)
        emb = le_embed(graph, 2)
        # residuals are checked on the repaired (connected) graph
        work = graph
        if emb.repairs:
            w = graph.weights.tolil()
            for i, j, weight in emb.repairs:
                w[i, j] = weight
                w[j, i] = weight
            work = _graph_from_weights(w.toarray(), graph.features)
        lap = laplacian(work).toarray()
        resid = np.abs(
            lap @ emb.coordinates - emb.coordinates * emb.eigenvalues[None, :]
        ).max()
        max_resid = max(max_resid, float(resid))
    elapsed = time.monotonic() - t0
    ok = max_resid <= 1e-6 and elapsed < _budget(5.0)
    _report(4, ok, f"named spectra exact, max eigen-residual={max_resid:.3e}, {elapsed:.1f}s")
    assert max_resid <= 1e-6
    assert elapsed < _budget(5.0)


def test_criterion_05_le_apex_recovery(toy, sub5000):
    _, field = toy
    t0 = time.monotonic()
    graph = build_knn_graph(sub5000, 10, kernel="heat")
    emb = le_embed(graph, 2)
    elapsed = time.monotonic() - t0
    weights = field.flat()[sub5000.index_map[:, 0] * 100 + sub5000.index_map[:, 1]]
    n = sub5000.n_samples
    cutoff = int(np.ceil(0.01 * n))
    ranks = []
    for j in range(weights.shape[1]):
        apex = int(np.argmax(weights[:, j]))
        best = min(
            int((sign * emb.coordinates[:, a] > sign * emb.coordinates[apex, a]).sum())
            for a in range(2)
            for sign in (1.0, -1.0)
        )
        ranks.append(best)
    ok = max(ranks) < cutoff and elapsed < _budget(300.0)
    _report(5, ok, f"apex ranks={ranks} (top-1% cutoff {cutoff}), {elapsed:.1f}s")
    assert max(ranks) < cutoff
    assert elapsed < _budget(300.0)


def test_criterion_06_tsne_internals():
    t0 = time.monotonic()
    rng = rng_from_seed(6)
    worst = 0.0
    worst_sum = 0.0
    for _ in range(100):
        n = int(rng.integers(10, 81))
        f = int(rng.integers(2, 7))
        x = rng.standard_normal((n, f))
        perp = float(rng.uniform(1.5, min(20.0, (n - 1) / 3.0)))
        d2 = scipy.spatial.distance.cdist(x, x, "sqeuclidean")
        d2 = (d2 + d2.T) * 0.5
        np.fill_diagonal(d2, 0.0)
        cond = calibrate_conditionals(d2, perp)
        for row in cond:
            nz = row[row > 0.0]
            achieved = 2.0 ** float(-np.sum(nz * np.log2(nz)))
            worst = max(worst, abs(achieved - perp))
        joint = symmetrize_joint(cond)
        worst_sum = max(worst_sum, abs(float(joint.sum()) - 1.0))
    assert worst <= 1e-3
    assert worst_sum <= 1e-12

    decreased = []
    for seed in range(10):
        m = rng_from_seed(100 + seed).standard_normal((120, 4))
        real = tsne_run(m, TsneParams(seed=seed))
        decreased.append(real.kl_final < real.kl_initial)
    assert all(decreased)

    blob = np.vstack(
        [
            rng_from_seed(7).standard_normal((50, 5)),
            rng_from_seed(8).standard_normal((50, 5)) + 8.0,
        ]
    )
    real = tsne_run(blob, TsneParams(perplexity=10.0, seed=0))
    proj = real.coordinates @ (
        real.coordinates[50:].mean(axis=0) - real.coordinates[:50].mean(axis=0)
    )
    separable = float(proj[:50].max()) < float(proj[50:].min())
    elapsed = time.monotonic() - t0
    ok = separable and elapsed < _budget(120.0)
    _report(
        6,
        ok,
        f"max perplexity error={worst:.2e}, max |sum P - 1|={worst_sum:.2e}, "
        f"kl decreased 10/10, blobs separable={separable}, {elapsed:.0f}s",
    )
    assert separable
    assert elapsed < _budget(120.0)


def test_criterion_07_pca_route_equivalence():
    from tfscope.pca import pca_eof, pca_eof_svd

    t0 = time.monotonic()
    rng = rng_from_seed(9)
    worst_eig = 0.0
    worst_angle = 0.0
    for _ in range(50):
        n = int(rng.integers(40, 501))
        p = int(rng.integers(5, 51))
        x = rng.standard_normal((n, p)) * rng.uniform(0.5, 3.0, size=p)
        k = min(5, p)
        a = pca_eof(x, k)
        b = pca_eof_svd(x, k)
        rel = float(np.abs(a.eigenvalues - b.eigenvalues).max() / a.eigenvalues[0])
        worst_eig = max(worst_eig, rel)
        angles = scipy.linalg.subspace_angles(a.eofs[:3].T, b.eofs[:3].T)
        worst_angle = max(worst_angle, float(angles.max()))
    elapsed = time.monotonic() - t0
    ok = worst_eig <= 1e-8 and worst_angle < 1e-6 and elapsed < _budget(60.0)
    _report(
        7, ok, f"max eigenvalue rel diff={worst_eig:.2e}, max angle={worst_angle:.2e} rad, {elapsed:.0f}s"
    )
    assert worst_eig <= 1e-8
    assert worst_angle < 1e-6
    assert elapsed < _budget(60.0)


def test_criterion_08_separability_metric():
    t0 = time.monotonic()
    rng = rng_from_seed(10)
    same = rng.standard_normal((1000, 5))
    labels = np.repeat([0, 1], 500)
    td_same = transformed_divergence(same, labels).pair(0, 1)
    far = rng.standard_normal((1000, 5))
    far[500:, 0] += 50.0
    td_far = transformed_divergence(far, labels).pair(0, 1)
    elapsed = time.monotonic() - t0
    ok = td_same < 0.2 and td_far > 1.99 and elapsed < _budget(10.0)
    _report(8, ok, f"identical TD={td_same:.4f}, 50-sigma TD={td_far:.6f}, {elapsed:.1f}s")
    assert td_same < 0.2
    assert td_far > 1.99
    assert elapsed < _budget(10.0)


@pytest.mark.slow
def test_criterion_09_capacity_and_determinism(tmp_path):
    cube, _ = generate_toy_cube(160, 160, 100, seed=42)
    mat = flatten(cube, StandardizationSpec(mode="per-variable-zscore"))

    def le_once(path):
        sub = subsample(mat, 25000, 0)
        t0 = time.monotonic()
        graph = build_knn_graph(sub, 10, kernel="heat")
        emb = le_embed(graph, 2)
        elapsed = time.monotonic() - t0
        export_tfs(
            emb.coordinates, sub.index_map, path, "le",
            {"k": 10, "kernel": "heat", "normalization": emb.normalization}, 0,
            eigenvalues=emb.eigenvalues,
        )
        return elapsed, open(path, "rb").read()

    le_elapsed, first = le_once(str(tmp_path / "le_a.csv"))
    le_elapsed_2, second = le_once(str(tmp_path / "le_b.csv"))
    assert first == second, "LE export is not byte-identical across reruns"
    assert le_elapsed < _budget(1800.0)

    sub10k = subsample(mat, 10000, 0)
    params = TsneParams(perplexity=30.0, seed=0)
    t0 = time.monotonic()
    result = pc_tsne(sub10k, params, runs=5)
    tsne_elapsed = time.monotonic() - t0
    assert tsne_elapsed < _budget(3600.0)
    export_tfs(
        result.stacked_scores[:, :4], sub10k.index_map, str(tmp_path / "pctsne.csv"),
        "pctsne", {"runs": 5, "perplexity": 30.0}, 0,
        variance_fractions=result.variance_fractions[:4],
    )
    # seeded reproducibility at capacity scale: realization 0 regenerated
    redo = tsne_run(sub10k, params)
    assert np.array_equal(redo.coordinates, result.realizations[0].coordinates)
    assert redo.kl_final == result.realizations[0].kl_final

    peak_gb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024 / 2**30
    ok = peak_gb < 32.0
    _report(
        9,
        ok,
        f"LE 25k x2 ({le_elapsed:.0f}s, {le_elapsed_2:.0f}s) byte-identical, "
        f"pc_tsne 10k R=5 ({tsne_elapsed:.0f}s) realization-0 bit-identical, "
        f"peak RSS {peak_gb:.2f} GB",
    )
    assert peak_gb < 32.0


@pytest.mark.slow
def test_criterion_10_cli_end_to_end(tmp_path):
    def chain(root):
        os.makedirs(root)
        env = dict(os.environ)

        def run(*args):
            proc = subprocess.run(
                [sys.executable, "-m", "tfscope", *args],
                capture_output=True, text=True, cwd=root, env=env,
            )
            assert proc.returncode == 0, f"{args[0]} failed: {proc.stderr}"
            return proc.stdout

        t0 = time.monotonic()
        run("gen-toy", "--out", os.path.join(root, "toy"), "--ny", "100",
            "--nx", "100", "--nt", "100", "--seed", "42")
        run("characterize", "--cube", os.path.join(root, "toy.json"),
            "--out", os.path.join(root, "char"), "--subsample-cap", "5000")
        run("suggest-ems", "--tfs", os.path.join(root, "char", "le.csv"),
            "--cube", os.path.join(root, "toy.json"), "--top", "3",
            "--out", os.path.join(root, "ems.csv"))
        run("unmix", "--cube", os.path.join(root, "toy.json"),
            "--ems", os.path.join(root, "ems.csv"),
            "--out", os.path.join(root, "fractions.csv"))
        elapsed = time.monotonic() - t0
        files = {}
        for dirpath, _, names in os.walk(root):
            for name in names:
                full = os.path.join(dirpath, name)
                files[os.path.relpath(full, root)] = open(full, "rb").read()
        return elapsed, files

    elapsed_a, files_a = chain(str(tmp_path / "a"))
    elapsed_b, files_b = chain(str(tmp_path / "b"))

    from tfscope.pipeline import config_from_dict, declared_export_files

    declared = declared_export_files(config_from_dict({"subsample_cap": 5000}))
    expected = {"toy.json", "toy.f32", "toy.mask", "toy.weights.csv", "ems.csv",
                "fractions.csv"} | {os.path.join("char", name) for name in declared}
    assert set(files_a) == expected
    assert set(files_a) == set(files_b)
    diffs = [name for name in files_a if files_a[name] != files_b[name]]
    assert diffs == [], f"rerun differs for {diffs}"
    ok = elapsed_a < _budget(1200.0) and elapsed_b < _budget(1200.0)
    _report(
        10,
        ok,
        f"all {len(expected)} files produced, rerun byte-identical, "
        f"{elapsed_a:.0f}s / {elapsed_b:.0f}s",
    )
    assert elapsed_a < _budget(1200.0)
    assert elapsed_b < _budget(1200.0)
