"""HTTP/JSON triage service: browse scored series, view frames, record labels.

The dataset and score tables are read-only; the only write path is an
append-only JSON-lines label log. Replaying the log reconstructs the active
label view (latest record per target and annotator wins).
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field, asdict
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse, Response
from fastapi.staticfiles import StaticFiles

from .imagery import DatasetManifest, load_manifest
from .scoring import ChangeResult, ScoreSeries

LABEL_SOURCES = ("human", "simulator")


@dataclass(frozen=True)
class LabelRecord:
    target_id: str
    label: int
    annotator: str
    timestamp: str  # ISO-8601
    source: str = "human"

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if self.source not in LABEL_SOURCES:
            raise ValueError(f"unknown label source {self.source!r}")

    def to_json(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_json(d: dict) -> "LabelRecord":
        return LabelRecord(
            target_id=d["target_id"],
            label=int(d["label"]),
            annotator=d["annotator"],
            timestamp=d["timestamp"],
            source=d.get("source", "human"),
        )


class LabelStore:
    """Append-only JSONL log; the active view keeps the latest record per key."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._active: dict[tuple[str, str], LabelRecord] = {}
        if self.path.exists():
            with open(self.path) as f:
                for line in f:
                    line = line.strip()
                    if line:
                        record = LabelRecord.from_json(json.loads(line))
                        self._active[(record.target_id, record.annotator)] = record

    def append(self, record: LabelRecord) -> None:
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a") as f:
                f.write(json.dumps(record.to_json()) + "\n")
            self._active[(record.target_id, record.annotator)] = record

    def active(self) -> list[LabelRecord]:
        with self._lock:
            return sorted(
                self._active.values(), key=lambda r: (r.target_id, r.annotator)
            )

    def for_target(self, target_id: str) -> list[LabelRecord]:
        with self._lock:
            return [r for (tid, _), r in sorted(self._active.items()) if tid == target_id]


@dataclass
class ServeState:
    dataset_dir: Path
    manifest: DatasetManifest
    changes: dict[str, ChangeResult]
    score_series: dict[str, ScoreSeries] = field(default_factory=dict)
    store: LabelStore | None = None

    @staticmethod
    def load(
        dataset_dir: Path,
        changes: list[ChangeResult],
        score_series: dict[str, ScoreSeries] | None = None,
        label_path: Path | None = None,
    ) -> "ServeState":
        dataset_dir = Path(dataset_dir)
        manifest = load_manifest(dataset_dir)
        return ServeState(
            dataset_dir=dataset_dir,
            manifest=manifest,
            changes={r.series_id: r for r in changes},
            score_series=score_series or {},
            store=LabelStore(label_path) if label_path is not None else None,
        )


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app(state: ServeState, ui_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="changedet triage service")
    entries = state.manifest.by_id()

    @app.middleware("http")
    async def allow_local_ui(request: Request, call_next):
        response = await call_next(request)
        response.headers["Access-Control-Allow-Origin"] = "*"
        return response

    def labeled_ids() -> set[str]:
        if state.store is None:
            return set()
        return {r.target_id for r in state.store.active()}

    def summary(series_id: str, labeled: set[str]) -> dict:
        entry = entries[series_id]
        change = state.changes.get(series_id)
        return {
            "id": series_id,
            "n": entry.n,
            "change_score": None if change is None else change.score,
            "pivot_month": None if change is None else change.pivot_month,
            "labeled": series_id in labeled,
        }

    @app.get("/api/series")
    def list_series(
        sort: str = "score", order: str = "desc", offset: int = 0, limit: int = 50
    ):
        if sort not in ("score", "id") or order not in ("asc", "desc"):
            return _error(400, f"unsupported sort {sort!r}/{order!r}")
        if offset < 0 or limit < 0:
            return _error(400, "offset and limit must be non-negative")
        labeled = labeled_ids()
        items = [summary(e.id, labeled) for e in state.manifest.entries]
        if sort == "score":
            items.sort(
                key=lambda it: (
                    it["change_score"] if it["change_score"] is not None else float("-inf"),
                    it["id"],
                )
            )
        else:
            items.sort(key=lambda it: it["id"])
        if order == "desc":
            items.reverse()
        return {"items": items[offset : offset + limit], "total": len(items)}

    @app.get("/api/series/{series_id}")
    def series_detail(series_id: str):
        entry = entries.get(series_id)
        if entry is None:
            return _error(404, f"unknown series {series_id!r}")
        change = state.changes.get(series_id)
        scores = state.score_series.get(series_id)
        labels = [] if state.store is None else state.store.for_target(series_id)
        return {
            "id": series_id,
            "n": entry.n,
            "timestamps": entry.timestamps,
            "image_format": "ppm",
            "change_score": None if change is None else change.score,
            "measure": None if change is None else change.measure,
            "pivot_index": None if change is None else change.pivot_index,
            "pivot_month": None if change is None else change.pivot_month,
            "scores": []
            if scores is None
            else [
                {"query_index": int(i), "timestamp_month": int(m), "score": float(v)}
                for i, m, v in zip(scores.query_indices, scores.query_months, scores.values)
            ],
            "labeled": bool(labels),
            "labels": [r.to_json() for r in labels],
        }

    @app.get("/api/series/{series_id}/image/{index}")
    def series_image(series_id: str, index: int):
        entry = entries.get(series_id)
        if entry is None:
            return _error(404, f"unknown series {series_id!r}")
        if not 0 <= index < entry.n:
            return _error(404, f"series {series_id!r} has no image {index}")
        path = state.dataset_dir / entry.directory / f"{index:04d}.ppm"
        if not path.exists():
            return _error(404, f"missing image file {path.name}")
        return Response(content=path.read_bytes(), media_type="image/x-portable-pixmap")

    @app.post("/api/series/{series_id}/label")
    async def post_label(series_id: str, request: Request):
        if series_id not in entries:
            return _error(404, f"unknown series {series_id!r}")
        if state.store is None:
            return _error(400, "service started without a label store")
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return _error(400, "body must be JSON")
        if not isinstance(body, dict) or body.get("label") not in (0, 1):
            return _error(400, "label must be 0 or 1")
        annotator = body.get("annotator", "anonymous")
        if not isinstance(annotator, str) or not annotator:
            return _error(400, "annotator must be a non-empty string")
        record = LabelRecord(
            target_id=series_id,
            label=int(body["label"]),
            annotator=annotator,
            timestamp=_utc_now(),
            source="human",
        )
        state.store.append(record)
        return record.to_json()

    @app.get("/api/labels/export")
    def export_labels():
        if state.store is None:
            return PlainTextResponse("", media_type="application/x-ndjson")
        lines = "".join(json.dumps(r.to_json()) + "\n" for r in state.store.active())
        return PlainTextResponse(lines, media_type="application/x-ndjson")

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
