"""Local HTTP service exposing the pipeline to the web UI.

Single-process, local-first: one registry guards all shared state, job
execution runs on a bounded FIFO worker pool, and every result file is
written to a temporary name and renamed into place so concurrent reads
never observe partial output. Job results reuse the pipeline code paths
and are byte-identical to CLI runs with the same config.

Endpoints (JSON bodies unless noted):

  POST /cubes                           register or upload a cube -> 201 {"id"}
  GET  /cubes                           list registered cubes
  POST /jobs                            submit a job -> 202 {"id"}
  GET  /jobs                            list jobs
  GET  /jobs/{id}                       job state, config echo, result locator
  GET  /embeddings/{job}/{method}/points[?dims=1,2]   TFS CSV (text/csv)
  GET  /series?cube={id}&samples=1,2    raw time series for cells
  POST /unmix                           submit an unmix job -> 202 {"id"}
  GET  /fractions/{job}                 fractions CSV (text/csv)
  GET  /maps/{job}/{name}               binary PGM/PPM map
  GET  /ui/...                          static web client, when configured

Cube-scoped sample ids (in /series and /unmix requests) are linear cell
ids y * nx + x; embedding CSV rows carry y and x so clients can form
them. The data directory (``TFSCOPE_DATA_DIR`` or ``--data-dir``) is the
only persistence; the registry is rebuilt from it on startup and jobs
interrupted by a restart are marked failed.
"""

from __future__ import annotations

import base64
import json
import os
import queue
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import numpy as np

from .cube import DataCube, StandardizationSpec, flatten, load_cube, save_cube
from .errors import TfscopeError
from .pipeline import (
    characterize,
    config_from_dict,
    export_characterization,
    render_map,
)
from .unmix import (
    endmembers_from_samples,
    endmembers_from_signatures,
    misfit_summary,
    save_endmembers_csv,
    save_fractions_csv,
    unmix,
)

DEFAULT_PORT = 8641

_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_-]*$")
_MAP_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.-]*\.(pgm|ppm)$")
_UI_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
}


class ServiceError(Exception):
    """Request failure carrying the HTTP status to report."""

    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def _atomic_write_bytes(path: str, data: bytes) -> None:
    # write-then-rename so readers never see a partial file
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _atomic_write_json(path: str, obj) -> None:
    _atomic_write_bytes(
        path, (json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n").encode()
    )


def _json_body(obj, status: int = 200):
    return status, "application/json", (json.dumps(obj, sort_keys=True) + "\n").encode()


class CubeStore:
    """Cubes held under data_dir/cubes/<id>/cube.json in canonical layout."""

    def __init__(self, root: str):
        self.root = root
        os.makedirs(root, exist_ok=True)
        self._lock = threading.Lock()
        self._cache: dict = {}
        self._counter = 0
        for name in os.listdir(root):
            m = re.fullmatch(r"cube-(\d+)", name)
            if m and os.path.exists(os.path.join(root, name, "cube.json")):
                self._counter = max(self._counter, int(m.group(1)))

    def _new_id(self) -> str:
        with self._lock:
            self._counter += 1
            return f"cube-{self._counter}"

    def ids(self) -> list:
        out = []
        for name in sorted(os.listdir(self.root)):
            if re.fullmatch(r"cube-\d+", name) and os.path.exists(
                os.path.join(self.root, name, "cube.json")
            ):
                out.append(name)
        out.sort(key=lambda s: int(s.split("-")[1]))
        return out

    def add(self, cube: DataCube) -> str:
        cube_id = self._new_id()
        cube_dir = os.path.join(self.root, cube_id)
        os.makedirs(cube_dir + ".tmp", exist_ok=True)
        save_cube(cube, os.path.join(cube_dir + ".tmp", "cube.json"))
        os.replace(cube_dir + ".tmp", cube_dir)
        with self._lock:
            self._cache[cube_id] = cube
        return cube_id

    def load(self, cube_id: str) -> DataCube:
        if not _ID_RE.fullmatch(cube_id or ""):
            raise ServiceError(404, f"unknown cube {cube_id!r}")
        with self._lock:
            if cube_id in self._cache:
                return self._cache[cube_id]
        header = os.path.join(self.root, cube_id, "cube.json")
        if not os.path.exists(header):
            raise ServiceError(404, f"unknown cube {cube_id!r}")
        cube = load_cube(header)
        with self._lock:
            if len(self._cache) >= 4:  # a desk tool juggles few cubes at once
                self._cache.pop(next(iter(self._cache)))
            self._cache[cube_id] = cube
        return cube


class JobRegistry:
    """All job records, each mirrored to data_dir/jobs/<id>/job.json."""

    def __init__(self, root: str):
        self.root = root
        os.makedirs(root, exist_ok=True)
        self._lock = threading.Lock()
        self._jobs: dict = {}
        self._counter = 0
        for name in sorted(os.listdir(root)):
            m = re.fullmatch(r"job-(\d+)", name)
            record_path = os.path.join(root, name, "job.json")
            if not m or not os.path.exists(record_path):
                continue
            with open(record_path) as fh:
                record = json.load(fh)
            if record.get("state") in ("queued", "running"):
                record["state"] = "failed"
                record["error"] = "interrupted by service restart"
                _atomic_write_json(record_path, record)
            self._jobs[name] = record
            self._counter = max(self._counter, int(m.group(1)))

    def job_dir(self, job_id: str) -> str:
        return os.path.join(self.root, job_id)

    def create(self, kind: str, cube_id: str, config: dict) -> dict:
        with self._lock:
            self._counter += 1
            job_id = f"job-{self._counter}"
            record = {
                "id": job_id,
                "kind": kind,
                "state": "queued",
                "cube": cube_id,
                "config": config,
                "result": None,
                "error": None,
            }
            self._jobs[job_id] = record
            os.makedirs(self.job_dir(job_id), exist_ok=True)
            _atomic_write_json(os.path.join(self.job_dir(job_id), "job.json"), record)
            return json.loads(json.dumps(record))

    def update(self, job_id: str, **fields) -> None:
        with self._lock:
            record = self._jobs[job_id]
            if "state" in fields:
                old, new = record["state"], fields["state"]
                allowed = {"queued": {"running", "failed"}, "running": {"done", "failed"}}
                if new not in allowed.get(old, set()):
                    raise RuntimeError(f"illegal job transition {old} -> {new}")
            record.update(fields)
            _atomic_write_json(os.path.join(self.job_dir(job_id), "job.json"), record)

    def get(self, job_id: str) -> dict:
        if not _ID_RE.fullmatch(job_id or ""):
            raise ServiceError(404, f"unknown job {job_id!r}")
        with self._lock:
            if job_id not in self._jobs:
                raise ServiceError(404, f"unknown job {job_id!r}")
            return json.loads(json.dumps(self._jobs[job_id]))

    def list(self) -> list:
        with self._lock:
            ids = sorted(self._jobs, key=lambda s: int(s.split("-")[1]))
            return [json.loads(json.dumps(self._jobs[j])) for j in ids]


class Service:
    """Route handling plus the worker pool; one instance per process."""

    def __init__(self, data_dir: str, workers: int = 1, ui_dir=None):
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.data_dir = os.path.abspath(data_dir)
        os.makedirs(self.data_dir, exist_ok=True)
        self.cubes = CubeStore(os.path.join(self.data_dir, "cubes"))
        self.registry = JobRegistry(os.path.join(self.data_dir, "jobs"))
        self.ui_dir = os.path.abspath(ui_dir) if ui_dir else None
        self._queue: queue.Queue = queue.Queue()
        self._workers = [
            threading.Thread(target=self._worker, daemon=True, name=f"job-worker-{i}")
            for i in range(workers)
        ]
        self._started = False

    # -- worker pool ----------------------------------------------------

    def start(self) -> None:
        if not self._started:
            self._started = True
            for w in self._workers:
                w.start()

    def stop(self) -> None:
        """Fail queued jobs, let in-flight jobs finish, stop the workers."""
        while True:
            try:
                job_id = self._queue.get_nowait()
            except queue.Empty:
                break
            if job_id is not None:
                self.registry.update(
                    job_id, state="failed", error="service stopped before the job started"
                )
        for _ in self._workers:
            self._queue.put(None)
        for w in self._workers:
            if w.is_alive():
                w.join()

    def _worker(self) -> None:
        while True:
            job_id = self._queue.get()
            if job_id is None:
                return
            self.registry.update(job_id, state="running")
            record = self.registry.get(job_id)
            try:
                if record["kind"] == "characterize":
                    result = self._run_characterize(record)
                else:
                    result = self._run_unmix(record)
                self.registry.update(job_id, state="done", result=result)
            except Exception as exc:  # job failure is a result, not a crash
                self.registry.update(job_id, state="failed", error=str(exc))

    def _submit(self, kind: str, cube_id: str, config: dict) -> dict:
        record = self.registry.create(kind, cube_id, config)
        self._queue.put(record["id"])
        return record

    # -- job execution --------------------------------------------------

    def _run_characterize(self, record: dict) -> dict:
        cube = self.cubes.load(record["cube"])
        config = config_from_dict(record["config"])
        job_dir = self.registry.job_dir(record["id"])
        stage_dir = os.path.join(job_dir, "stage.tmp")
        os.makedirs(stage_dir, exist_ok=True)
        result = characterize(cube, config)
        files = export_characterization(result, stage_dir, cube.ny, cube.nx)
        for name in files:
            os.replace(os.path.join(stage_dir, name), os.path.join(job_dir, name))
        os.rmdir(stage_dir)
        return {"files": files, "n_samples": int(result.matrix.n_samples)}

    def _resolve_unmix_inputs(self, record: dict):
        spec = record["config"]
        cube = self.cubes.load(record["cube"])
        standardization = spec.get("standardization", "per-variable-zscore")
        matrix = flatten(cube, StandardizationSpec(mode=standardization))
        if spec.get("signatures") is not None:
            ems = endmembers_from_signatures(
                np.asarray(spec["signatures"], dtype=np.float64), labels=spec.get("labels")
            )
            return cube, matrix, ems
        sample_ids = spec["sample_ids"]
        lids = matrix.linear_ids(cube.nx)
        order = np.argsort(lids)
        rows = []
        for sid in sample_ids:
            pos = np.searchsorted(lids[order], int(sid))
            if pos >= lids.size or lids[order[pos]] != int(sid):
                raise ValueError(f"sample id {sid} is not a valid cell of cube {record['cube']}")
            rows.append(int(order[pos]))
        ems = endmembers_from_samples(matrix, rows, labels=[f"sample_{int(s)}" for s in sample_ids])
        return cube, matrix, ems

    def _run_unmix(self, record: dict) -> dict:
        spec = record["config"]
        source_job = spec.get("job")
        if source_job is not None:
            source = self.registry.get(source_job)
            if source["state"] != "done":
                raise RuntimeError(f"source job {source_job} is {source['state']}, not done")
        cube, matrix, ems = self._resolve_unmix_inputs(record)
        result = unmix(matrix, ems, nonneg=bool(spec.get("nonneg", False)))
        job_dir = self.registry.job_dir(record["id"])
        stage_dir = os.path.join(job_dir, "stage.tmp")
        os.makedirs(stage_dir, exist_ok=True)
        save_fractions_csv(result, matrix, os.path.join(stage_dir, "fractions.csv"))
        save_endmembers_csv(ems, os.path.join(stage_dir, "endmembers.csv"))
        files = ["fractions.csv", "endmembers.csv"]
        im = matrix.index_map
        render_map(result.misfit, im, cube.ny, cube.nx, os.path.join(stage_dir, "misfit.pgm"))
        files.append("misfit.pgm")
        for j in range(ems.m):
            name = f"frac_{j + 1}.pgm"
            render_map(
                result.fractions[:, j], im, cube.ny, cube.nx, os.path.join(stage_dir, name)
            )
            files.append(name)
        for name in files:
            os.replace(os.path.join(stage_dir, name), os.path.join(job_dir, name))
        os.rmdir(stage_dir)
        summary = misfit_summary(result, 10.0)
        return {"files": files, "summary": summary, "m": int(ems.m)}

    # -- request handling ------------------------------------------------

    def handle(self, method: str, path: str, body: bytes):
        """(status, content_type, payload) for one request."""
        url = urlparse(path)
        parts = [p for p in url.path.split("/") if p]
        query = {k: v[-1] for k, v in parse_qs(url.query).items()}

        if method == "POST":
            payload = self._parse_json(body)
            if parts == ["cubes"]:
                return self._post_cubes(payload)
            if parts == ["jobs"]:
                return self._post_jobs(payload)
            if parts == ["unmix"]:
                return self._post_unmix(payload)
            raise ServiceError(404, f"no such endpoint: POST {url.path}")

        if method == "GET":
            if parts == []:
                return _json_body({"service": "tfscope", "data_dir": self.data_dir})
            if parts == ["cubes"]:
                return self._get_cubes()
            if parts == ["jobs"]:
                return _json_body({"jobs": self.registry.list()})
            if len(parts) == 2 and parts[0] == "jobs":
                return _json_body(self.registry.get(parts[1]))
            if len(parts) == 4 and parts[0] == "embeddings" and parts[3] == "points":
                return self._get_points(parts[1], parts[2], query.get("dims"))
            if parts == ["series"]:
                return self._get_series(query)
            if len(parts) == 2 and parts[0] == "fractions":
                return self._get_fractions(parts[1])
            if len(parts) == 3 and parts[0] == "maps":
                return self._get_map(parts[1], parts[2])
            if parts[:1] == ["ui"]:
                return self._get_ui(parts[1:])
            raise ServiceError(404, f"no such endpoint: GET {url.path}")

        raise ServiceError(405, f"method {method} not allowed")

    @staticmethod
    def _parse_json(body: bytes) -> dict:
        try:
            payload = json.loads(body.decode("utf-8")) if body else {}
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ServiceError(400, f"request body is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ServiceError(400, "request body must be a JSON object")
        return payload

    def _post_cubes(self, payload: dict):
        if "path" in payload:
            try:
                cube = load_cube(payload["path"])
            except TfscopeError as exc:
                raise ServiceError(400, str(exc)) from exc
        elif "header" in payload:
            cube = self._cube_from_upload(payload)
        else:
            raise ServiceError(400, "cube body needs 'path' or 'header' + 'data_b64'")
        cube_id = self.cubes.add(cube)
        return _json_body(
            {
                "id": cube_id,
                "ny": cube.ny,
                "nx": cube.nx,
                "nt": cube.nt,
                "nvars": cube.nvars,
                "n_valid": int(cube.mask.sum()),
            },
            status=201,
        )

    @staticmethod
    def _cube_from_upload(payload: dict) -> DataCube:
        header = payload["header"]
        try:
            ny, nx = int(header["ny"]), int(header["nx"])
            nt, nvars = int(header["nt"]), int(header["nvars"])
            raw = base64.b64decode(payload["data_b64"], validate=True)
        except (KeyError, TypeError, ValueError) as exc:
            raise ServiceError(400, f"bad cube upload: {exc}") from exc
        expected = ny * nx * nt * nvars * 4
        if len(raw) != expected:
            raise ServiceError(
                400, f"payload holds {len(raw)} bytes, header declares {expected}"
            )
        values = np.frombuffer(raw, dtype="<f4").reshape(ny, nx, nt, nvars)
        if payload.get("mask_b64"):
            mask_raw = base64.b64decode(payload["mask_b64"], validate=True)
            if len(mask_raw) != ny * nx:
                raise ServiceError(400, "mask length does not match ny * nx")
            mask = np.frombuffer(mask_raw, dtype=np.uint8).reshape(ny, nx).astype(bool)
        else:
            mask = np.ones((ny, nx), dtype=bool)
        try:
            return DataCube(
                values=values.copy(),
                mask=mask,
                time_labels=tuple(header["time_labels"]) if header.get("time_labels") else None,
                var_names=tuple(header["var_names"]) if header.get("var_names") else None,
            )
        except ValueError as exc:
            raise ServiceError(400, f"bad cube upload: {exc}") from exc

    def _get_cubes(self):
        cubes = []
        for cube_id in self.cubes.ids():
            cube = self.cubes.load(cube_id)
            cubes.append(
                {
                    "id": cube_id,
                    "ny": cube.ny,
                    "nx": cube.nx,
                    "nt": cube.nt,
                    "nvars": cube.nvars,
                    "n_valid": int(cube.mask.sum()),
                }
            )
        return _json_body({"cubes": cubes})

    def _post_jobs(self, payload: dict):
        kind = payload.get("kind")
        if kind == "characterize":
            cube_id = payload.get("cube")
            if cube_id is None:
                raise ServiceError(400, "characterize job needs a 'cube' id")
            self.cubes.load(cube_id)
            try:
                config = config_from_dict(payload.get("config") or {})
            except (ValueError, TypeError) as exc:
                raise ServiceError(400, f"bad config: {exc}") from exc
            record = self._submit("characterize", cube_id, config.to_dict())
            return _json_body(record, status=202)
        if kind == "unmix":
            return self._post_unmix({k: v for k, v in payload.items() if k != "kind"})
        raise ServiceError(400, "job kind must be 'characterize' or 'unmix'")

    def _post_unmix(self, payload: dict):
        source_job = payload.get("job")
        if source_job is not None:
            source = self.registry.get(source_job)
            if source["kind"] != "characterize":
                raise ServiceError(400, f"job {source_job} is not a characterization")
            cube_id = source["cube"]
            standardization = source["config"]["standardization"]
        else:
            cube_id = payload.get("cube")
            if cube_id is None:
                raise ServiceError(400, "unmix body needs 'job' or 'cube'")
            self.cubes.load(cube_id)
            standardization = payload.get("standardization", "per-variable-zscore")
        has_ids = payload.get("sample_ids") is not None
        has_sigs = payload.get("signatures") is not None
        if has_ids == has_sigs:
            raise ServiceError(400, "unmix body needs exactly one of 'sample_ids', 'signatures'")
        if has_ids and len(payload["sample_ids"]) < 2:
            raise ServiceError(400, "unmix needs at least 2 endmember sample ids")
        config = {
            "job": source_job,
            "standardization": standardization,
            "sample_ids": [int(s) for s in payload["sample_ids"]] if has_ids else None,
            "signatures": payload.get("signatures"),
            "labels": payload.get("labels"),
            "nonneg": bool(payload.get("nonneg", False)),
        }
        record = self._submit("unmix", cube_id, config)
        return _json_body(record, status=202)

    def _done_job(self, job_id: str, kind: str) -> dict:
        record = self.registry.get(job_id)
        if record["kind"] != kind:
            raise ServiceError(409, f"job {job_id} is a {record['kind']} job, not {kind}")
        if record["state"] != "done":
            raise ServiceError(409, f"job {job_id} is {record['state']}, not done")
        return record

    def _get_points(self, job_id: str, method: str, dims):
        record = self._done_job(job_id, "characterize")
        if method not in ("pca", "le", "pctsne"):
            raise ServiceError(404, f"unknown embedding method {method!r}")
        path = os.path.join(self.registry.job_dir(record["id"]), f"{method}.csv")
        with open(path, "rb") as fh:
            raw = fh.read()
        if dims is None:
            return 200, "text/csv; charset=utf-8", raw
        try:
            wanted = [int(v) for v in dims.split(",") if v]
        except ValueError as exc:
            raise ServiceError(400, f"bad dims {dims!r}") from exc
        if not wanted:
            raise ServiceError(400, "dims must name at least one dimension")
        lines = raw.decode("ascii").split("\r\n")
        header = lines[0].split(",")
        d = len(header) - 3
        for dim in wanted:
            if not 1 <= dim <= d:
                raise ServiceError(400, f"dim {dim} out of range 1..{d}")
        cols = [0, 1, 2] + [2 + dim for dim in wanted]
        out = []
        for line in lines:
            if not line:
                continue
            fields = line.split(",")
            out.append(",".join(fields[c] for c in cols))
        body = ("\r\n".join(out) + "\r\n").encode("ascii")
        return 200, "text/csv; charset=utf-8", body

    def _get_series(self, query: dict):
        cube_id = query.get("cube")
        if not cube_id:
            raise ServiceError(400, "series needs cube=<id>")
        cube = self.cubes.load(cube_id)
        try:
            sample_ids = [int(v) for v in (query.get("samples") or "").split(",") if v]
        except ValueError as exc:
            raise ServiceError(400, "samples must be comma-separated integers") from exc
        if not sample_ids:
            raise ServiceError(400, "series needs samples=<id,id,...>")
        series = []
        for sid in sample_ids:
            y, x = divmod(sid, cube.nx)
            if not (0 <= y < cube.ny and 0 <= x < cube.nx) or not cube.mask[y, x]:
                raise ServiceError(404, f"sample id {sid} is not a valid cell")
            series.append(
                {
                    "sample_id": sid,
                    "y": int(y),
                    "x": int(x),
                    "values": [[float(v) for v in step] for step in cube.values[y, x]],
                }
            )
        return _json_body(
            {"cube": cube_id, "nt": cube.nt, "nvars": cube.nvars, "series": series}
        )

    def _get_fractions(self, job_id: str):
        record = self._done_job(job_id, "unmix")
        path = os.path.join(self.registry.job_dir(record["id"]), "fractions.csv")
        with open(path, "rb") as fh:
            return 200, "text/csv; charset=utf-8", fh.read()

    def _get_map(self, job_id: str, name: str):
        record = self.registry.get(job_id)
        if record["state"] != "done":
            raise ServiceError(409, f"job {job_id} is {record['state']}, not done")
        if not _MAP_NAME_RE.fullmatch(name):
            raise ServiceError(404, f"unknown map {name!r}")
        path = os.path.join(self.registry.job_dir(job_id), name)
        if not os.path.exists(path):
            raise ServiceError(404, f"job {job_id} has no map {name!r}")
        ctype = "image/x-portable-graymap" if name.endswith(".pgm") else "image/x-portable-pixmap"
        with open(path, "rb") as fh:
            return 200, ctype, fh.read()

    def _get_ui(self, rest: list):
        if self.ui_dir is None or not os.path.isdir(self.ui_dir):
            raise ServiceError(404, "no UI assets configured")
        rel = "/".join(rest) or "index.html"
        path = os.path.normpath(os.path.join(self.ui_dir, rel))
        if not (path == self.ui_dir or path.startswith(self.ui_dir + os.sep)):
            raise ServiceError(404, "not found")
        if os.path.isdir(path):
            path = os.path.join(path, "index.html")
        if not os.path.exists(path):
            raise ServiceError(404, f"no UI asset {rel!r}")
        ctype = _UI_TYPES.get(os.path.splitext(path)[1], "application/octet-stream")
        with open(path, "rb") as fh:
            return 200, ctype, fh.read()


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, format, *args):  # keep stdout/stderr deterministic
        pass

    def _respond(self, status: int, ctype: str, body: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _dispatch(self, method: str) -> None:
        svc = self.server.svc
        if method == "POST":
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length) if length else b""
        else:
            body = b""
        try:
            status, ctype, payload = svc.handle(method, self.path, body)
        except ServiceError as exc:
            status, ctype, payload = _json_body({"error": exc.message}, exc.status)
        except TfscopeError as exc:
            status, ctype, payload = _json_body({"error": str(exc)}, 400)
        except Exception as exc:  # surface the failure, keep serving
            status, ctype, payload = _json_body({"error": f"internal error: {exc}"}, 500)
        self._respond(status, ctype, payload)

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")


def make_server(service: Service, port: int, host: str = "127.0.0.1") -> ThreadingHTTPServer:
    """Bound, ready-to-run HTTP server; caller controls its lifecycle."""
    server = ThreadingHTTPServer((host, port), _Handler)
    server.daemon_threads = True
    server.svc = service
    service.start()
    return server


def default_ui_dir():
    """frontend/dist relative to the working directory, if present."""
    candidate = os.path.join(os.getcwd(), "frontend", "dist")
    return candidate if os.path.isdir(candidate) else None


def serve(port: int = DEFAULT_PORT, data_dir=None, workers: int = 1, ui_dir=None) -> None:
    """Run the service until interrupted; queued jobs fail on shutdown."""
    if data_dir is None:
        data_dir = os.environ.get("TFSCOPE_DATA_DIR") or "tfscope-data"
    if ui_dir is None:
        ui_dir = os.environ.get("TFSCOPE_UI_DIR") or default_ui_dir()
    service = Service(data_dir, workers=workers, ui_dir=ui_dir)
    server = make_server(service, port)
    print(f"tfscope service on http://127.0.0.1:{port} (data: {service.data_dir})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        service.stop()
