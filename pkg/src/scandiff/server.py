"""HTTP/JSON API over one analysis session.

Read endpoints serve the session summary, per-iteration fields in the
standard export schema, and decimated cloud samples with removed-point
flags. Mutations (run an iteration, mark a region) are serialized by a
lock, honoring the single-writer rule, and optionally persist the session
back to disk after each success. Errors are JSON {code, message} bodies.
"""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .field import field_to_dict
from .mitigate import Mitigation
from .session import (
    Session,
    mark_region,
    mitigated_clouds,
    region_stats,
    run_iteration,
    save_session,
)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _iteration_index(session: Session, iteration: int) -> int:
    if not 0 <= iteration < len(session.iterations):
        raise ApiError(404, "not_found", f"iteration {iteration} does not exist")
    return iteration


def _session_summary(session: Session) -> dict:
    return {
        "iteration_count": len(session.iterations),
        "grid": session.grid.to_dict(),
        "registration": session.registration.to_dict(),
        "origin1": [float(v) for v in session.origin1],
        "origin2": [float(v) for v in session.origin2],
        "cloud1_points": len(session.cloud1_raw),
        "cloud2_points": len(session.cloud2_raw),
        "stats_history": [rec.field.stats.to_dict() for rec in session.iterations],
        "mitigations": [m.to_dict() for m in session.current_mitigations()],
        "region_count": len(session.regions),
    }


def _cloud_payload(session: Session, iteration: int, decimate: int) -> dict:
    record = session.iterations[iteration]
    out = {"iteration": iteration, "decimate": decimate, "mitigations": [m.to_dict() for m in record.mitigations]}
    for slot, cloud in (("cloud1", session.cloud1_raw), ("cloud2", session.cloud2_raw)):
        removed_by = np.full(len(cloud), -1, dtype=np.int64)
        for rep_idx, rep in enumerate(record.reports):
            indices = rep.removed_indices1 if slot == "cloud1" else rep.removed_indices2
            removed_by[indices] = rep_idx
        pts = cloud.points[::decimate]
        out[slot] = {
            "points": [[float(x), float(y), float(z)] for x, y, z in pts],
            "removed_by": [int(v) for v in removed_by[::decimate]],
        }
    return out


def create_app(
    session: Session,
    session_path: Optional[str] = None,
    autosave: bool = True,
) -> FastAPI:
    """Wrap a session in the analyst API.

    When session_path is given and autosave is on, every successful
    mutation rewrites the file, so a served session survives restarts.
    """
    app = FastAPI(title="discrepancy-field workbench", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    lock = threading.Lock()

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"code": exc.code, "message": exc.message})

    def _persist():
        if autosave and session_path is not None:
            save_session(session, Path(session_path))

    @app.get("/api/session")
    def get_session():
        return _session_summary(session)

    @app.get("/api/field/{iteration}")
    def get_field(iteration: int):
        idx = _iteration_index(session, iteration)
        return field_to_dict(session.iterations[idx].field)

    @app.get("/api/clouds/{iteration}")
    def get_clouds(iteration: int, decimate: int = 1):
        idx = _iteration_index(session, iteration)
        if decimate < 1:
            raise ApiError(422, "bad_request", "decimate must be >= 1")
        return _cloud_payload(session, idx, decimate)

    @app.post("/api/iterations", status_code=201)
    def post_iteration(body: dict):
        raw = body.get("mitigation")
        note = str(body.get("note", ""))
        mitigation = None
        if raw is not None:
            try:
                mitigation = Mitigation.from_dict(raw)
            except (KeyError, TypeError, ValueError) as exc:
                raise ApiError(422, "bad_mitigation", str(exc)) from exc
        with lock:
            record = run_iteration(session, mitigation, note=note)
            _persist()
            index = len(session.iterations) - 1
        return {"iteration": index, "record": record.to_dict()}

    @app.post("/api/regions", status_code=201)
    def post_region(body: dict):
        label = str(body.get("label", ""))
        keys = body.get("voxel_keys")
        if not label:
            raise ApiError(422, "bad_region", "label is required")
        if not isinstance(keys, list) or not keys:
            raise ApiError(422, "bad_region", "voxel_keys must be a non-empty list")
        with lock:
            try:
                region = mark_region(session, label, keys)
            except (TypeError, ValueError, IndexError) as exc:
                raise ApiError(422, "bad_region", str(exc)) from exc
            _persist()
            index = len(session.regions) - 1
        return {"region": index, **region.to_dict()}

    @app.get("/api/regions")
    def get_regions():
        out = []
        for region in session.regions:
            history = [
                region_stats(session, region, i) for i in range(len(session.iterations))
            ]
            out.append({**region.to_dict(), "history": history})
        return {"regions": out}

    return app


def serve(session: Session, host: str = "127.0.0.1", port: int = 8000, session_path=None):
    """Blocking uvicorn run of the session API."""
    import uvicorn

    app = create_app(session, session_path=session_path)
    uvicorn.run(app, host=host, port=port, log_level="warning")
