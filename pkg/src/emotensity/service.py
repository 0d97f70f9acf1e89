"""HTTP annotation service.

Serves 4-tuples to annotators (least-judged tuple first, ties by lowest
tuple id), accepts best/worst judgments, and exposes aggregation and
reliability over the live judgment store. Judgments are persisted to an
append-only JSONL log, fsynced before the request is acknowledged, so a
crash never loses an acknowledged judgment; replaying the log after a
restart reconstructs the store exactly. The log uses the same record
schema as the offline judgment files, so the CLI can score it directly.

Campaigns are directories under one root:

    <root>/<campaign_id>/items.tsv        id, text, emotion (3-field TSV)
    <root>/<campaign_id>/tuples.jsonl     generated 4-tuples
    <root>/<campaign_id>/judgments.jsonl  append log (created on demand)
    <root>/<campaign_id>/campaign.json    optional {"language": "..."}

Error bodies are always {"code", "message"}.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from emotensity import bws
from emotensity.bws import Judgment, ReliabilitySummary, ScoreTable, Tuple4
from emotensity.data_model import Emotion, Item, load_annotation_items
from emotensity.errors import DataFormatError, ValidationError

__all__ = [
    "Assignment",
    "JudgmentStore",
    "Campaign",
    "ServiceError",
    "load_campaign",
    "create_app",
]


class ServiceError(Exception):
    """Request-level failure carried to the HTTP layer as {code, message}."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass(frozen=True)
class Assignment:
    """A tuple handed to an annotator, with resolved item texts."""

    annotator_id: str
    tuple: Tuple4
    items: tuple[Item, ...]
    served_at: float

    def to_json_dict(self) -> dict:
        return {
            "annotator_id": self.annotator_id,
            "tuple": {
                "tuple_id": self.tuple.tuple_id,
                "emotion": self.tuple.emotion.value,
                "item_ids": list(self.tuple.item_ids),
            },
            "items": [{"id": item.id, "text": item.text} for item in self.items],
            "served_at": self.served_at,
        }


class JudgmentStore:
    """Append-only judgment log with a (tuple_id, annotator_id) uniqueness index.

    Appends write one complete JSONL record, flush, and fsync before
    returning. A record and its trailing newline go out in a single write,
    so a log that does not end in a newline was interrupted mid-write;
    that unacknowledged tail is dropped and truncated away on replay so
    later appends start on a clean line. Corruption on any complete line
    is rejected.
    """

    def __init__(self, path: str | Path):
        self._path = Path(path)
        self._judgments: list[Judgment] = []
        self._index: set[tuple[str, str]] = set()
        self._lock = threading.Lock()
        self._replay()
        self._handle = open(self._path, "a", encoding="utf-8")

    def _replay(self) -> None:
        if not self._path.exists():
            self._path.touch()
            return
        data = self._path.read_bytes()
        if data and not data.endswith(b"\n"):
            # Torn final record from an interrupted, unacknowledged write.
            keep = data.rfind(b"\n") + 1
            os.truncate(self._path, keep)
            data = data[:keep]
        for line_no, line in enumerate(data.decode("utf-8").splitlines(), start=1):
            try:
                judgment = bws.judgment_from_json(line)
            except (DataFormatError, ValidationError) as exc:
                raise DataFormatError(f"{self._path.name} line {line_no}: {exc}") from None
            key = (judgment.tuple_id, judgment.annotator_id)
            if key in self._index:
                raise DataFormatError(
                    f"{self._path.name} line {line_no}: duplicate judgment for {key}"
                )
            self._judgments.append(judgment)
            self._index.add(key)

    def __len__(self) -> int:
        with self._lock:
            return len(self._judgments)

    def __contains__(self, key: tuple[str, str]) -> bool:
        with self._lock:
            return key in self._index

    def snapshot(self) -> list[Judgment]:
        with self._lock:
            return list(self._judgments)

    def append(self, judgment: Judgment) -> None:
        """Durably persist, then index; raises on duplicate (tuple, annotator)."""
        key = (judgment.tuple_id, judgment.annotator_id)
        with self._lock:
            if key in self._index:
                raise ServiceError(
                    409, "conflict", f"{judgment.annotator_id!r} already judged {judgment.tuple_id!r}"
                )
            self._handle.write(bws.judgment_to_json(judgment) + "\n")
            self._handle.flush()
            os.fsync(self._handle.fileno())
            self._judgments.append(judgment)
            self._index.add(key)

    def close(self) -> None:
        self._handle.close()


class Campaign:
    """One annotation campaign: items, tuples, and the live judgment store."""

    def __init__(self, campaign_id: str, items: tuple[Item, ...], tuples: list[Tuple4], log_path: Path):
        self.campaign_id = campaign_id
        self.items_by_id = {item.id: item for item in items}
        for t in tuples:
            for item_id in t.item_ids:
                if item_id not in self.items_by_id:
                    raise DataFormatError(
                        f"campaign {campaign_id!r}: tuple {t.tuple_id!r} references unknown item {item_id!r}"
                    )
        seen: set[str] = set()
        for t in tuples:
            if t.tuple_id in seen:
                raise DataFormatError(f"campaign {campaign_id!r}: duplicate tuple id {t.tuple_id!r}")
            seen.add(t.tuple_id)
        self.tuples = sorted(tuples, key=lambda t: t.tuple_id)
        self.tuples_by_id = {t.tuple_id: t for t in self.tuples}
        self.store = JudgmentStore(log_path)

    def _tuples_for(self, emotion: Emotion) -> list[Tuple4]:
        selected = [t for t in self.tuples if t.emotion == emotion]
        if not selected:
            raise ServiceError(
                400, "validation_error", f"campaign has no tuples for emotion {emotion.value!r}"
            )
        return selected

    def next_tuple(self, annotator_id: str, emotion: Emotion) -> Optional[Assignment]:
        """Least-judged unjudged tuple for this annotator; None when done."""
        if not annotator_id:
            raise ServiceError(400, "validation_error", "annotator must be non-empty")
        candidates = self._tuples_for(emotion)
        judgments = self.store.snapshot()
        counts: dict[str, int] = {t.tuple_id: 0 for t in candidates}
        judged_by_annotator: set[str] = set()
        for judgment in judgments:
            if judgment.tuple_id in counts:
                counts[judgment.tuple_id] += 1
            if judgment.annotator_id == annotator_id:
                judged_by_annotator.add(judgment.tuple_id)
        open_tuples = [t for t in candidates if t.tuple_id not in judged_by_annotator]
        if not open_tuples:
            return None
        chosen = min(open_tuples, key=lambda t: (counts[t.tuple_id], t.tuple_id))
        return Assignment(
            annotator_id=annotator_id,
            tuple=chosen,
            items=tuple(self.items_by_id[i] for i in chosen.item_ids),
            served_at=time.time(),
        )

    def submit(self, judgment: Judgment) -> dict:
        """Validate, durably append, and return this annotator's progress."""
        tup = self.tuples_by_id.get(judgment.tuple_id)
        if tup is None:
            raise ServiceError(404, "not_found", f"unknown tuple {judgment.tuple_id!r}")
        for role, item_id in (("best", judgment.best), ("worst", judgment.worst)):
            if item_id not in tup.item_ids:
                raise ServiceError(
                    400, "validation_error", f"{role} item {item_id!r} is not in tuple {tup.tuple_id!r}"
                )
        self.store.append(judgment)
        return self.progress(judgment.annotator_id)

    def progress(self, annotator_id: str) -> dict:
        if not annotator_id:
            raise ServiceError(400, "validation_error", "annotator must be non-empty")
        judged = sum(1 for j in self.store.snapshot() if j.annotator_id == annotator_id)
        return {"annotator_id": annotator_id, "judged": judged, "total": len(self.tuples)}

    def scores(self, emotion: Emotion) -> ScoreTable:
        tuples = self._tuples_for(emotion)
        tuple_ids = {t.tuple_id for t in tuples}
        judgments = [j for j in self.store.snapshot() if j.tuple_id in tuple_ids]
        if not judgments:
            raise ServiceError(400, "validation_error", f"no judgments yet for {emotion.value!r}")
        return bws.aggregate_scores(tuples, judgments)

    def reliability(self, emotion: Emotion, iterations: int, seed: int) -> ReliabilitySummary:
        tuples = self._tuples_for(emotion)
        tuple_ids = {t.tuple_id for t in tuples}
        judgments = [j for j in self.store.snapshot() if j.tuple_id in tuple_ids]
        return bws.split_half_reliability(tuples, judgments, iterations=iterations, seed=seed)


def load_campaign(campaign_dir: str | Path) -> Campaign:
    campaign_dir = Path(campaign_dir)
    items_path = campaign_dir / "items.tsv"
    tuples_path = campaign_dir / "tuples.jsonl"
    if not items_path.exists() or not tuples_path.exists():
        raise DataFormatError(f"campaign directory {campaign_dir} needs items.tsv and tuples.jsonl")
    language = "en"
    meta_path = campaign_dir / "campaign.json"
    if meta_path.exists():
        language = json.loads(meta_path.read_text(encoding="utf-8")).get("language", "en")
    return Campaign(
        campaign_id=campaign_dir.name,
        items=load_annotation_items(items_path, language=language),
        tuples=bws.load_tuples_jsonl(tuples_path),
        log_path=campaign_dir / "judgments.jsonl",
    )


def _parse_emotion(raw: str) -> Emotion:
    try:
        return Emotion.parse(raw)
    except ValidationError as exc:
        raise ServiceError(400, "validation_error", str(exc)) from None


def create_app(campaigns_root: str | Path):
    """Build the FastAPI app serving every campaign directory under the root."""
    from fastapi import Body, FastAPI, Request
    from fastapi.exceptions import RequestValidationError
    from fastapi.responses import JSONResponse

    campaigns_root = Path(campaigns_root)
    campaigns: dict[str, Campaign] = {}
    for entry in sorted(campaigns_root.iterdir()) if campaigns_root.exists() else []:
        if entry.is_dir() and (entry / "items.tsv").exists():
            campaigns[entry.name] = load_campaign(entry)

    app = FastAPI(title="bws-annotation-service")
    app.state.campaigns = campaigns

    def _campaign(campaign_id: str) -> Campaign:
        campaign = campaigns.get(campaign_id)
        if campaign is None:
            raise ServiceError(404, "not_found", f"unknown campaign {campaign_id!r}")
        return campaign

    @app.exception_handler(ServiceError)
    async def _service_error(_request: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status, content={"code": exc.code, "message": exc.message})

    @app.exception_handler(RequestValidationError)
    async def _request_error(_request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"code": "validation_error", "message": str(exc)})

    @app.exception_handler(ValidationError)
    async def _domain_error(_request: Request, exc: ValidationError):
        return JSONResponse(status_code=400, content={"code": "validation_error", "message": str(exc)})

    @app.get("/campaigns/{campaign_id}/next")
    def next_tuple(campaign_id: str, annotator: str = "", emotion: str = ""):
        assignment = _campaign(campaign_id).next_tuple(annotator, _parse_emotion(emotion))
        if assignment is None:
            return {"done": True}
        return {"done": False, "assignment": assignment.to_json_dict()}

    @app.post("/campaigns/{campaign_id}/judgments")
    def submit_judgment(campaign_id: str, payload: dict = Body(...)):
        campaign = _campaign(campaign_id)
        for key in ("tuple_id", "annotator_id", "best", "worst"):
            if not isinstance(payload.get(key), str) or not payload[key]:
                raise ServiceError(400, "validation_error", f"field {key!r} must be a non-empty string")
        try:
            judgment = Judgment(
                tuple_id=payload["tuple_id"],
                annotator_id=payload["annotator_id"],
                best=payload["best"],
                worst=payload["worst"],
                timestamp=int(payload.get("timestamp", time.time())),
            )
        except ValidationError as exc:
            raise ServiceError(400, "validation_error", str(exc)) from None
        progress = campaign.submit(judgment)
        return {"acknowledged": True, "progress": progress}

    @app.get("/campaigns/{campaign_id}/scores")
    def scores(campaign_id: str, emotion: str = ""):
        table = _campaign(campaign_id).scores(_parse_emotion(emotion))
        return {
            "emotion": table.emotion.value if table.emotion is not None else None,
            "scores": dict(table.scores),
            "raw": dict(table.raw),
            "appearances": dict(table.appearances),
        }

    @app.get("/campaigns/{campaign_id}/reliability")
    def reliability(campaign_id: str, emotion: str = "", iterations: int = 100, seed: int = 0):
        if iterations < 1:
            raise ServiceError(400, "validation_error", "iterations must be >= 1")
        summary = _campaign(campaign_id).reliability(_parse_emotion(emotion), iterations, seed)
        return {
            "pearson_mean": summary.pearson_mean,
            "pearson_std": summary.pearson_std,
            "spearman_mean": summary.spearman_mean,
            "spearman_std": summary.spearman_std,
            "iterations": summary.iterations,
        }

    @app.get("/campaigns/{campaign_id}/progress")
    def progress(campaign_id: str, annotator: str = ""):
        return _campaign(campaign_id).progress(annotator)

    return app
