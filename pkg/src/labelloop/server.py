"""HTTP control API for runs and the human annotation queue.

The annotation UI (and anything else) drives the system exclusively through
this surface: create and validate runs, poll status and learning curves,
claim and submit queue tasks, download the annotation log. Validation
errors use the same dotted field identifiers as the config schema so
clients can attach them to form fields.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from pathlib import Path
from typing import Any

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .config import flatten, resolve_config, validate_config
from .errors import (
    AnnotationError,
    AuthorizationError,
    ConfigError,
    LabelLoopError,
    QueueError,
)
from .orchestrator import ActiveLearningRun
from .strategies import strategy_names

SCHEMA_VERSION = 1


class RunManager:
    """Owns background run threads and hands out status snapshots."""

    def __init__(self, work_dir: str | Path = "runs"):
        self.work_dir = Path(work_dir)
        self._runs: dict[str, dict[str, Any]] = {}
        self._lock = threading.Lock()

    def create(self, doc: dict[str, Any], name: str | None = None) -> str:
        config = resolve_config(doc)  # raises ConfigError with field errors
        run_id = name or f"run-{uuid.uuid4().hex[:8]}"
        with self._lock:
            if run_id in self._runs:
                raise ConfigError(
                    [{"field": "run.name", "message": f"run {run_id!r} exists"}]
                )
            run_dir = self.work_dir / run_id
            run = ActiveLearningRun(config, run_dir)
            entry = {
                "run": run,
                "error": None,
                "created_at": time.time(),
                "run_dir": run_dir,
            }
            self._runs[run_id] = entry

        def execute() -> None:
            try:
                run.execute()
            except Exception as exc:  # surfaced through the status endpoint
                entry["error"] = f"{type(exc).__name__}: {exc}"

        thread = threading.Thread(target=execute, daemon=True, name=run_id)
        entry["thread"] = thread
        thread.start()
        return run_id

    def get(self, run_id: str) -> dict[str, Any]:
        with self._lock:
            entry = self._runs.get(run_id)
        if entry is None:
            raise KeyError(run_id)
        return entry

    def list_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._runs)


def _error_response(status: int, errors: list[dict[str, str]]) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"schema_version": SCHEMA_VERSION, "errors": errors},
    )


def _message_response(status: int, message: str) -> JSONResponse:
    return _error_response(status, [{"field": "", "message": message}])


def create_app(
    work_dir: str | Path = "runs",
    ui_dir: str | Path | None = None,
    data_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="labelloop", version=str(SCHEMA_VERSION))
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    manager = RunManager(work_dir)
    app.state.manager = manager
    data_dir = Path(data_dir) if data_dir is not None else Path(work_dir) / "datasets"

    @app.exception_handler(ConfigError)
    async def config_error(request: Request, exc: ConfigError) -> JSONResponse:
        errors = exc.field_errors or [{"field": "", "message": str(exc)}]
        return _error_response(422, errors)

    @app.exception_handler(LabelLoopError)
    async def domain_error(request: Request, exc: LabelLoopError) -> JSONResponse:
        if isinstance(exc, AuthorizationError):
            return _message_response(403, str(exc))
        if isinstance(exc, AnnotationError):
            return _message_response(409, str(exc))
        if isinstance(exc, QueueError):
            return _message_response(404, str(exc))
        return _message_response(500, str(exc))

    @app.get("/api/health")
    def health() -> dict[str, Any]:
        return {"schema_version": SCHEMA_VERSION, "status": "ok"}

    @app.get("/api/strategies")
    def strategies() -> dict[str, Any]:
        return {"schema_version": SCHEMA_VERSION, "strategies": strategy_names()}

    @app.post("/api/config/validate")
    def validate(body: dict[str, Any]) -> dict[str, Any]:
        doc = flatten(body.get("config") or {})
        errors = validate_config(doc)
        return {
            "schema_version": SCHEMA_VERSION,
            "valid": not errors,
            "errors": errors,
        }

    @app.post("/api/datasets")
    def upload_dataset(body: dict[str, Any]):
        name = str(body.get("name") or "")
        content = body.get("content")
        if not name or Path(name).name != name:
            return _error_response(
                422, [{"field": "name", "message": "a plain file name is required"}]
            )
        if Path(name).suffix.lower() not in (".csv", ".json", ".jsonl"):
            return _error_response(
                422, [{"field": "name", "message": "use a .csv, .json or .jsonl name"}]
            )
        if not isinstance(content, str) or not content.strip():
            return _error_response(
                422, [{"field": "content", "message": "file content is required"}]
            )
        data_dir.mkdir(parents=True, exist_ok=True)
        path = data_dir / name
        path.write_text(content, encoding="utf-8")
        return {"schema_version": SCHEMA_VERSION, "path": str(path)}

    @app.post("/api/runs")
    def create_run(body: dict[str, Any]) -> dict[str, Any]:
        doc = flatten(body.get("config") or {})
        run_id = manager.create(doc, name=body.get("run_name"))
        return {"schema_version": SCHEMA_VERSION, "run_id": run_id}

    @app.get("/api/runs")
    def list_runs() -> dict[str, Any]:
        out = []
        for run_id in manager.list_ids():
            entry = manager.get(run_id)
            status = entry["run"].status()
            status["run_id"] = run_id
            status["error"] = entry["error"]
            out.append(status)
        return {"schema_version": SCHEMA_VERSION, "runs": out}

    def _entry_or_404(run_id: str):
        try:
            return manager.get(run_id)
        except KeyError:
            return None

    @app.get("/api/runs/{run_id}")
    def run_status(run_id: str):
        entry = _entry_or_404(run_id)
        if entry is None:
            return _message_response(404, f"unknown run {run_id!r}")
        status = entry["run"].status()
        status["schema_version"] = SCHEMA_VERSION
        status["run_id"] = run_id
        status["error"] = entry["error"]
        return status

    @app.get("/api/runs/{run_id}/curve")
    def run_curve(run_id: str):
        entry = _entry_or_404(run_id)
        if entry is None:
            return _message_response(404, f"unknown run {run_id!r}")
        return {
            "schema_version": SCHEMA_VERSION,
            "run_id": run_id,
            "points": list(entry["run"].curve_points),
        }

    @app.get("/api/runs/{run_id}/config")
    def run_config(run_id: str):
        entry = _entry_or_404(run_id)
        if entry is None:
            return _message_response(404, f"unknown run {run_id!r}")
        return {
            "schema_version": SCHEMA_VERSION,
            "run_id": run_id,
            "config": entry["run"].config.to_document(),
        }

    @app.get("/api/runs/{run_id}/annotations")
    def run_annotations(run_id: str):
        entry = _entry_or_404(run_id)
        if entry is None:
            return _message_response(404, f"unknown run {run_id!r}")
        log = entry["run"].log
        records = [r.to_dict() for r in log.records()] if log is not None else []
        return {
            "schema_version": SCHEMA_VERSION,
            "run_id": run_id,
            "records": records,
        }

    def _queue_or_error(run_id: str):
        entry = _entry_or_404(run_id)
        if entry is None:
            return None, _message_response(404, f"unknown run {run_id!r}")
        queue = entry["run"].queue
        if queue is None:
            return None, _message_response(
                409, f"run {run_id!r} has no human annotation queue"
            )
        return queue, None

    @app.get("/api/runs/{run_id}/tasks")
    def list_tasks(run_id: str):
        queue, error = _queue_or_error(run_id)
        if error is not None:
            return error
        return {
            "schema_version": SCHEMA_VERSION,
            "run_id": run_id,
            "counts": queue.counts(),
            "total": queue.total(),
            "tasks": [t.to_dict() for t in queue.tasks()],
        }

    @app.post("/api/runs/{run_id}/tasks/claim")
    def claim_task(run_id: str, body: dict[str, Any]):
        queue, error = _queue_or_error(run_id)
        if error is not None:
            return error
        annotator = str(body.get("annotator_id") or "")
        task = queue.claim(annotator)
        return {
            "schema_version": SCHEMA_VERSION,
            "task": task.to_dict() if task is not None else None,
        }

    @app.post("/api/runs/{run_id}/tasks/{task_id}/submit")
    def submit_task(run_id: str, task_id: str, body: dict[str, Any]):
        queue, error = _queue_or_error(run_id)
        if error is not None:
            return error
        ack = queue.submit(
            task_id,
            str(body.get("annotator_id") or ""),
            body.get("text"),
            skip=bool(body.get("skip", False)),
            idempotency_key=body.get("idempotency_key"),
        )
        return {
            "schema_version": SCHEMA_VERSION,
            "task_id": ack.task_id,
            "status": ack.status,
            "duplicate": ack.duplicate,
        }

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def main(argv: list[str] | None = None) -> None:
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description="labelloop control API server")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument("--work-dir", default="runs")
    parser.add_argument("--ui-dir", default=None)
    args = parser.parse_args(argv)
    app = create_app(work_dir=args.work_dir, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
