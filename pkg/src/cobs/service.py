"""HTTP service for interactive sessions: dataset upload, asynchronous
ensemble generation (cached by dataset + grid), and the query/answer/result
protocol consumed by the browser oracle UI.

Everything is persisted as plain files in a content-addressed store
directory, so any session can be reloaded and replayed from its answer log.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .constraints import Kind
from .data import Dataset, DatasetError, normalize, parse_dataset
from .engines import ClusteringEnsemble, HyperGrid, generate_ensemble
from .evaluation import evaluate_selected
from .selection import (
    ActiveConfig,
    ActiveSession,
    BudgetExhaustedError,
    PoolExhaustedError,
)

logger = logging.getLogger(__name__)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def pca_2d(X: np.ndarray) -> np.ndarray:
    """First two principal-component scores of the normalized matrix, with
    deterministic component signs."""
    centered = X - X.mean(axis=0)
    U, S, Vt = np.linalg.svd(centered, full_matrices=False)
    for k in range(Vt.shape[0]):
        pivot = np.argmax(np.abs(Vt[k]))
        if Vt[k, pivot] < 0:
            Vt[k] *= -1
            U[:, k] *= -1
    coords = U[:, :2] * S[:2]
    if coords.shape[1] < 2:
        coords = np.column_stack([coords, np.zeros(len(X))])
    return coords


@dataclass
class DatasetRecord:
    id: str
    name: str
    raw: Dataset
    normalized: Dataset
    projection: np.ndarray


@dataclass
class SessionRecord:
    id: str
    dataset_id: str
    ensemble_id: str
    config: ActiveConfig
    status: str = "generating"  # generating | idle | awaiting_answer | done
    session: Optional[ActiveSession] = None
    error: str = ""
    created: float = field(default_factory=time.time)
    updated: float = field(default_factory=time.time)
    lock: threading.RLock = field(default_factory=threading.RLock)


class Store:
    """File-backed store for datasets, ensembles and session records."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        for sub in ("datasets", "ensembles", "sessions"):
            (self.root / sub).mkdir(parents=True, exist_ok=True)
        self._dataset_cache: dict[str, DatasetRecord] = {}

    # datasets ------------------------------------------------------------

    def save_dataset(self, csv_text: str, label_column, name: str) -> DatasetRecord:
        dataset_id = hashlib.sha256(
            csv_text.encode() + repr(label_column).encode()
        ).hexdigest()[:16]
        existing = self.load_dataset(dataset_id)
        if existing is not None:
            return existing
        raw = parse_dataset(csv_text, label_column, name=name)
        norm = normalize(raw)
        projection = pca_2d(norm.instances)
        base = self.root / "datasets" / dataset_id
        base.with_suffix(".csv").write_text(csv_text)
        np.savez(
            base.with_suffix(".npz"),
            raw=raw.instances,
            normalized=norm.instances,
            projection=projection,
            labels=(raw.labels if raw.labels is not None else np.empty(0, dtype=str)),
        )
        base.with_suffix(".json").write_text(json.dumps({
            "id": dataset_id,
            "name": name,
            "feature_names": list(raw.feature_names),
            "labeled": raw.labels is not None,
        }))
        rec = DatasetRecord(dataset_id, name, raw, norm, projection)
        self._dataset_cache[dataset_id] = rec
        return rec

    def load_dataset(self, dataset_id: str) -> DatasetRecord | None:
        cached = self._dataset_cache.get(dataset_id)
        if cached is not None:
            return cached
        base = self.root / "datasets" / dataset_id
        if not base.with_suffix(".json").exists():
            return None
        meta = json.loads(base.with_suffix(".json").read_text())
        arrays = np.load(base.with_suffix(".npz"), allow_pickle=False)
        labels = arrays["labels"] if meta["labeled"] else None
        names = tuple(meta["feature_names"])
        raw = Dataset(arrays["raw"], labels, meta["name"], names)
        norm = Dataset(arrays["normalized"], labels, meta["name"], names)
        rec = DatasetRecord(meta["id"], meta["name"], raw, norm,
                            arrays["projection"])
        self._dataset_cache[dataset_id] = rec
        return rec

    # ensembles -----------------------------------------------------------

    def ensemble_path(self, ensemble_id: str) -> Path:
        return self.root / "ensembles" / f"{ensemble_id}.json"

    def load_ensemble(self, ensemble_id: str) -> ClusteringEnsemble | None:
        path = self.ensemble_path(ensemble_id)
        if not path.exists():
            return None
        return ClusteringEnsemble.load(path)

    def save_ensemble(self, ensemble_id: str, ensemble: ClusteringEnsemble) -> None:
        ensemble.save(self.ensemble_path(ensemble_id))

    # sessions ------------------------------------------------------------

    def session_path(self, session_id: str) -> Path:
        return self.root / "sessions" / f"{session_id}.json"

    def save_session(self, rec: SessionRecord) -> None:
        log = []
        if rec.session is not None:
            log = [[int(p[0]), int(p[1]), kind.value] for p, kind in rec.session.log]
        self.session_path(rec.id).write_text(json.dumps({
            "id": rec.id,
            "dataset_id": rec.dataset_id,
            "ensemble_id": rec.ensemble_id,
            "config": {
                "budget": rec.config.budget,
                "m": rec.config.m,
                "sample_size": rec.config.sample_size,
                "seed": rec.config.seed,
            },
            "status": rec.status,
            "log": log,
            "created": rec.created,
            "updated": rec.updated,
        }))

    def load_session_dict(self, session_id: str) -> dict | None:
        path = self.session_path(session_id)
        if not path.exists():
            return None
        return json.loads(path.read_text())


class SessionRegistry:
    """Live session objects plus the in-flight ensemble-generation set."""

    def __init__(self, store: Store):
        self.store = store
        self.lock = threading.Lock()
        self.sessions: dict[str, SessionRecord] = {}
        self.ensembles: dict[str, ClusteringEnsemble] = {}
        self.generating: set[str] = set()

    def get_ensemble(self, ensemble_id: str) -> ClusteringEnsemble | None:
        with self.lock:
            cached = self.ensembles.get(ensemble_id)
        if cached is not None:
            return cached
        loaded = self.store.load_ensemble(ensemble_id)
        if loaded is not None:
            with self.lock:
                self.ensembles[ensemble_id] = loaded
        return loaded

    def restore_session(self, session_id: str) -> SessionRecord | None:
        """Rebuild a persisted session by replaying its answer log."""
        data = self.store.load_session_dict(session_id)
        if data is None:
            return None
        ensemble = self.get_ensemble(data["ensemble_id"])
        if ensemble is None:
            return None
        config = ActiveConfig(**data["config"])
        session = ActiveSession(ensemble, config)
        session.replay_log([((i, j), Kind(kind)) for i, j, kind in data["log"]])
        rec = SessionRecord(
            id=data["id"], dataset_id=data["dataset_id"],
            ensemble_id=data["ensemble_id"], config=config,
            status=data["status"], session=session,
            created=data["created"], updated=data["updated"],
        )
        if rec.status == "awaiting_answer":
            # the pending pair is recomputed deterministically
            session.next_query()
        with self.lock:
            self.sessions[session_id] = rec
        return rec

    def get_session(self, session_id: str) -> SessionRecord:
        with self.lock:
            rec = self.sessions.get(session_id)
        if rec is None:
            rec = self.restore_session(session_id)
        if rec is None:
            raise ApiError(404, "unknown_session", f"no session {session_id!r}")
        return rec


class SessionRequest(BaseModel):
    dataset_id: str
    budget: int
    m: float = 2.0
    pool_size: int = 1000
    seed: int = 0
    grid: dict | None = None


class AnswerRequest(BaseModel):
    kind: str


def create_app(store_dir: str | Path, ui_dir: str | Path | None = None) -> FastAPI:
    store = Store(store_dir)
    registry = SessionRegistry(store)
    app = FastAPI(title="cobs session service")

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse({"code": exc.code, "message": exc.message},
                            status_code=exc.status)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_req: Request, exc: RequestValidationError):
        return JSONResponse({"code": "invalid_request", "message": str(exc)},
                            status_code=400)

    @app.get("/healthz")
    def healthz():
        return {"ok": True}

    # -- datasets ---------------------------------------------------------

    @app.post("/datasets")
    async def create_dataset(request: Request,
                             label_col: str | None = Query(default=None),
                             name: str = Query(default="dataset")):
        body = await request.body()
        if not body.strip():
            raise ApiError(400, "empty_upload", "request body is empty")
        label: str | int | None = label_col
        if isinstance(label, str) and label.lstrip("-").isdigit():
            label = int(label)
        try:
            rec = store.save_dataset(body.decode("utf-8"), label, name)
        except UnicodeDecodeError as exc:
            raise ApiError(400, "bad_encoding", f"upload is not UTF-8: {exc}")
        except DatasetError as exc:
            raise ApiError(400, "bad_dataset", str(exc))
        return {
            "id": rec.id,
            "name": rec.name,
            "n": rec.raw.n,
            "f": rec.raw.n_features,
            "classes": rec.raw.n_classes,
            "labeled": rec.raw.labels is not None,
        }

    @app.get("/datasets/{dataset_id}")
    def get_dataset(dataset_id: str):
        rec = store.load_dataset(dataset_id)
        if rec is None:
            raise ApiError(404, "unknown_dataset", f"no dataset {dataset_id!r}")
        return {
            "id": rec.id,
            "name": rec.name,
            "n": rec.raw.n,
            "f": rec.raw.n_features,
            "classes": rec.raw.n_classes,
            "labeled": rec.raw.labels is not None,
            "feature_names": list(rec.raw.feature_names),
            "projection": [[float(x), float(y)] for x, y in rec.projection],
        }

    # -- sessions ---------------------------------------------------------

    def _build_session(rec: SessionRecord, ensemble: ClusteringEnsemble) -> None:
        session = ActiveSession(ensemble, rec.config)
        with rec.lock:
            rec.session = session
            rec.status = "done" if rec.config.budget == 0 else "idle"
            rec.updated = time.time()
        store.save_session(rec)

    def _generate(rec: SessionRecord, dataset: DatasetRecord, grid: HyperGrid):
        try:
            ensemble = generate_ensemble(dataset.normalized, grid)
            store.save_ensemble(rec.ensemble_id, ensemble)
            with registry.lock:
                registry.ensembles[rec.ensemble_id] = ensemble
            _build_session(rec, ensemble)
        except Exception as exc:  # surfaced via session status
            logger.exception("ensemble generation failed")
            with rec.lock:
                rec.status = "failed"
                rec.error = str(exc)
        finally:
            with registry.lock:
                registry.generating.discard(rec.ensemble_id)

    @app.post("/sessions")
    def start_session(req: SessionRequest):
        dataset = store.load_dataset(req.dataset_id)
        if dataset is None:
            raise ApiError(404, "unknown_dataset", f"no dataset {req.dataset_id!r}")
        grid = HyperGrid.from_dict(req.grid) if req.grid else HyperGrid()
        ensemble_id = f"{req.dataset_id}-{grid.grid_hash()}"
        try:
            config = ActiveConfig(budget=req.budget, m=req.m,
                                  sample_size=req.pool_size, seed=req.seed)
        except ValueError as exc:
            raise ApiError(400, "bad_config", str(exc))
        rec = SessionRecord(
            id=uuid.uuid4().hex[:12],
            dataset_id=req.dataset_id,
            ensemble_id=ensemble_id,
            config=config,
        )
        ensemble = registry.get_ensemble(ensemble_id)
        if ensemble is not None:
            _build_session(rec, ensemble)
        else:
            with registry.lock:
                if ensemble_id in registry.generating:
                    raise ApiError(
                        409, "generation_in_progress",
                        f"ensemble {ensemble_id} is already being generated")
                registry.generating.add(ensemble_id)
            threading.Thread(target=_generate, args=(rec, dataset, grid),
                             daemon=True).start()
        with registry.lock:
            registry.sessions[rec.id] = rec
        return _session_summary(rec)

    def _session_summary(rec: SessionRecord) -> dict:
        with rec.lock:
            out = {
                "id": rec.id,
                "dataset_id": rec.dataset_id,
                "ensemble_id": rec.ensemble_id,
                "status": rec.status,
                "budget": rec.config.budget,
                "m": rec.config.m,
                "pool_size": rec.config.sample_size,
                "seed": rec.config.seed,
                "u": rec.session.u if rec.session else 0,
                "created": rec.created,
                "updated": rec.updated,
            }
            if rec.session is not None:
                out["clusterings"] = len(rec.session.ensemble)
                out["skipped"] = len(rec.session.ensemble.skipped)
            if rec.error:
                out["error"] = rec.error
        return out

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _session_summary(registry.get_session(session_id))

    def _require_ready(rec: SessionRecord) -> ActiveSession:
        if rec.status == "generating":
            raise ApiError(409, "generating",
                           "ensemble generation still in progress")
        if rec.status == "failed":
            raise ApiError(500, "generation_failed", rec.error)
        assert rec.session is not None
        return rec.session

    @app.get("/sessions/{session_id}/query")
    def next_query(session_id: str):
        rec = registry.get_session(session_id)
        with rec.lock:
            session = _require_ready(rec)
            if rec.status == "awaiting_answer":
                raise ApiError(409, "query_pending",
                               f"pair {session.pending} awaits an answer")
            try:
                pair = session.next_query()
            except BudgetExhaustedError:
                raise ApiError(410, "budget_exhausted",
                               "budget exhausted; fetch the result")
            except PoolExhaustedError:
                raise ApiError(410, "pool_exhausted",
                               "candidate pool exhausted; fetch the result")
            rec.status = "awaiting_answer"
            rec.updated = time.time()
            dataset = store.load_dataset(rec.dataset_id)
            payload = {
                "pair": [pair[0], pair[1]],
                "instances": [
                    {
                        "index": int(i),
                        "features": {
                            name: float(v) for name, v in
                            zip(dataset.raw.feature_names, dataset.raw.instances[i])
                        },
                        "projection": [float(dataset.projection[i, 0]),
                                       float(dataset.projection[i, 1])],
                    }
                    for i in pair
                ],
                "progress": {"u": session.u, "budget": session.budget},
            }
        store.save_session(rec)
        return payload

    @app.post("/sessions/{session_id}/answer")
    def answer(session_id: str, req: AnswerRequest):
        try:
            kind = Kind(req.kind)
        except ValueError:
            raise ApiError(400, "bad_kind",
                           f"kind must be one of {[k.value for k in Kind]}")
        rec = registry.get_session(session_id)
        with rec.lock:
            session = _require_ready(rec)
            if rec.status != "awaiting_answer" or session.pending is None:
                raise ApiError(409, "no_pending_query",
                               "no query is awaiting an answer")
            session.answer(session.pending, kind)
            rec.status = "done" if session.u >= session.budget else "idle"
            rec.updated = time.time()
            top = [
                {**clustering.provenance.as_dict(), "weight": share}
                for clustering, share in session.top_weighted(5)
            ]
            payload = {
                "progress": {"u": session.u, "budget": session.budget},
                "status": rec.status,
                "top": top,
            }
        store.save_session(rec)
        return payload

    @app.get("/sessions/{session_id}/result")
    def result(session_id: str):
        rec = registry.get_session(session_id)
        with rec.lock:
            session = _require_ready(rec)
            selected = session.result()
            assignment = selected.assignment
            ids, counts = np.unique(assignment, return_counts=True)
            dataset = store.load_dataset(rec.dataset_id)
            ari = None
            if dataset.raw.labels is not None:
                try:
                    ari = evaluate_selected(selected, dataset.normalized,
                                            session.queried)
                except ValueError:
                    ari = None
            return {
                "assignment": assignment.tolist(),
                "provenance": selected.provenance.as_dict(),
                "cluster_sizes": [
                    {"label": int(i), "size": int(c)}
                    for i, c in zip(ids, counts)
                ],
                "ari": ari,
                "progress": {"u": session.u, "budget": session.budget},
                "no_constraints_yet": session.u == 0,
            }

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
