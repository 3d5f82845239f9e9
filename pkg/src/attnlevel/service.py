"""Labeling service: append-only vote log plus the HTTP API for the UI.

Every labeling action is one JSONL event; undo is itself an event, so the
log is a full audit trail.  Compaction reduces the log to the per-annotator
CSV files the aggregation pipeline consumes.  The single append lock is the
only serialization point, which keeps concurrent labelers safe.

Checker blindness: in checker mode the task queue serves exactly the frames
the four-way majority left unresolved, and no response body ever carries
vote counts or agreement numbers.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import asdict, dataclass, replace
from typing import Optional, Sequence

from pydantic import BaseModel

from .annotation import (
    LABELS,
    VoteSheet,
    compute_agreement,
    majority_vote,
    resolve_with_checker,
    write_label_csv,
)


class LabelBody(BaseModel):
    annotator: str
    set_id: str
    frame_index: int
    label: int


class UndoBody(BaseModel):
    annotator: str


DEFAULT_ANNOTATORS = ("a1", "a2", "a3", "a4")
DEFAULT_CHECKER_ID = "checker"

_FRAME_FILE = re.compile(r"^(?P<set_id>.+)_(?P<frame>\d+)\.(?P<ext>png|jpg|jpeg)$")


class StoreError(ValueError):
    pass


@dataclass
class LabelEvent:
    ts: float
    annotator: str
    role: str  # "labeler" | "checker"
    set_id: str
    frame_index: int
    label: Optional[int]
    action: str  # "set" | "undo"


class LabelStore:
    """Append-only JSONL event log with in-memory replay state."""

    def __init__(self, path: str):
        self.path = path
        self._lock = threading.Lock()
        self._events: list[LabelEvent] = []
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        self._events.append(LabelEvent(**json.loads(line)))
                    except (json.JSONDecodeError, TypeError) as exc:
                        raise StoreError(f"{path} line {lineno}: {exc}") from exc

    def _append(self, event: LabelEvent) -> None:
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(asdict(event)) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            self._events.append(event)

    def record_label(self, annotator: str, role: str, set_id: str, frame_index: int, label: int) -> None:
        if label not in LABELS:
            raise StoreError(f"label {label!r} outside {LABELS}")
        self._append(
            LabelEvent(
                ts=time.time(),
                annotator=annotator,
                role=role,
                set_id=set_id,
                frame_index=frame_index,
                label=label,
                action="set",
            )
        )

    def undo(self, annotator: str, role: str) -> LabelEvent:
        """Append an undo for the annotator's most recent surviving set event."""
        surviving = self.surviving_sets(annotator)
        if not surviving:
            raise StoreError(f"annotator {annotator!r} has nothing to undo")
        last = surviving[-1]
        self._append(
            LabelEvent(
                ts=time.time(),
                annotator=annotator,
                role=role,
                set_id=last.set_id,
                frame_index=last.frame_index,
                label=None,
                action="undo",
            )
        )
        return last

    def surviving_sets(self, annotator: str) -> list[LabelEvent]:
        """The annotator's set events in order, with undone ones removed."""
        stack: list[LabelEvent] = []
        for ev in self._events:
            if ev.annotator != annotator:
                continue
            if ev.action == "set":
                stack.append(ev)
            elif ev.action == "undo" and stack:
                stack.pop()
        return stack

    def current_labels(self, annotator: str) -> dict[tuple[str, int], int]:
        """Last surviving label per frame for one annotator."""
        labels: dict[tuple[str, int], int] = {}
        for ev in self.surviving_sets(annotator):
            labels[(ev.set_id, ev.frame_index)] = ev.label  # last write wins
        return labels

    def annotators_seen(self) -> dict[str, str]:
        roles: dict[str, str] = {}
        for ev in self._events:
            roles[ev.annotator] = ev.role
        return roles

    def compact(self, out_dir: str) -> list[str]:
        """Write per-annotator CSVs in the aggregation input schema."""
        os.makedirs(out_dir, exist_ok=True)
        written = []
        for annotator, role in sorted(self.annotators_seen().items()):
            labels = self.current_labels(annotator)
            name = "labels_checker.csv" if role == "checker" else f"labels_{annotator}.csv"
            path = os.path.join(out_dir, name)
            write_label_csv(labels, path)
            written.append(path)
        return written


def scan_frames(frames_dir: str) -> tuple[list[tuple[str, int]], dict[tuple[str, int], str]]:
    """All frames under the directory, ordered by (set_id, frame_index)."""
    frames = []
    paths = {}
    for name in os.listdir(frames_dir):
        m = _FRAME_FILE.match(name)
        if not m:
            continue
        key = (m.group("set_id"), int(m.group("frame")))
        frames.append(key)
        paths[key] = os.path.join(frames_dir, name)
    frames.sort()
    return frames, paths


def stage1_unresolved(
    store: LabelStore, annotators: Sequence[str], frames: Sequence[tuple[str, int]]
) -> list[tuple[str, int]]:
    """Frames fully voted by the four labelers that the majority cannot settle."""
    votes = {a: store.current_labels(a) for a in annotators}
    out = []
    for key in frames:
        four = [votes[a][key] for a in annotators if key in votes[a]]
        if len(four) == len(annotators) and majority_vote(four, quorum=3) is None:
            out.append(key)
    return out


def build_agreement_sheets(
    store: LabelStore, annotators: Sequence[str], checker_id: str
) -> list[VoteSheet]:
    """Resolved stage-1/2 sheets for every frame all four labelers voted on."""
    votes = {a: store.current_labels(a) for a in annotators}
    checker = store.current_labels(checker_id)
    complete = set.intersection(*[set(v) for v in votes.values()]) if votes else set()
    sheets = []
    for key in sorted(complete):
        sheet = VoteSheet(
            set_id=key[0],
            frame_index=key[1],
            annotator_votes={a: votes[a][key] for a in annotators},
        )
        resolved = resolve_with_checker(sheet)
        if resolved.final is None and key in checker:
            resolved = resolve_with_checker(replace(sheet, checker_vote=checker[key]))
        sheets.append(resolved)
    return sheets


def create_app(
    frames_dir: str,
    store: LabelStore | str,
    annotators: Sequence[str] = DEFAULT_ANNOTATORS,
    checker_id: str = DEFAULT_CHECKER_ID,
    checker_mode: bool = False,
    ui_dir: str | None = None,
):
    """Build the FastAPI app serving labeling tasks and persisting votes."""
    from fastapi import FastAPI, HTTPException, Response
    from fastapi.responses import FileResponse

    if isinstance(store, str):
        store = LabelStore(store)
    frames, frame_paths = scan_frames(frames_dir)
    if not frames:
        raise StoreError(f"no frames matching <set_id>_<frame>.png|jpg under {frames_dir}")
    annotators = tuple(annotators)
    known = set(annotators) | {checker_id}

    app = FastAPI(title="attention labeling service")

    def require_known(annotator: str) -> str:
        if annotator not in known:
            raise HTTPException(status_code=404, detail=f"unknown annotator {annotator!r}")
        return "checker" if annotator == checker_id else "labeler"

    def task_queue(annotator: str) -> list[tuple[str, int]]:
        if annotator == checker_id:
            done = store.current_labels(checker_id)
            return [k for k in stage1_unresolved(store, annotators, frames) if k not in done]
        done = store.current_labels(annotator)
        return [k for k in frames if k not in done]

    @app.get("/api/task")
    def get_task(annotator: str):
        role = require_known(annotator)
        if checker_mode and role != "checker":
            raise HTTPException(status_code=403, detail="server is in checker mode")
        if not checker_mode and role == "checker":
            raise HTTPException(status_code=403, detail="checker tasks need --checker-mode")
        queue = task_queue(annotator)
        if not queue:
            return Response(status_code=204)
        set_id, frame_index = queue[0]
        return {
            "set_id": set_id,
            "frame_index": frame_index,
            "image_url": f"/api/frame/{set_id}/{frame_index}",
        }

    @app.get("/api/frame/{set_id}/{frame_index}")
    def get_frame(set_id: str, frame_index: int):
        path = frame_paths.get((set_id, frame_index))
        if path is None:
            raise HTTPException(status_code=404, detail="unknown frame")
        return FileResponse(path)

    @app.post("/api/label")
    def post_label(body: LabelBody):
        role = require_known(body.annotator)
        if body.label not in LABELS:
            raise HTTPException(status_code=400, detail=f"label must be one of {list(LABELS)}")
        if (body.set_id, body.frame_index) not in frame_paths:
            raise HTTPException(status_code=400, detail="unknown frame")
        store.record_label(body.annotator, role, body.set_id, body.frame_index, body.label)
        return {"ok": True}

    @app.post("/api/undo")
    def post_undo(body: UndoBody):
        role = require_known(body.annotator)
        try:
            undone = store.undo(body.annotator, role)
        except StoreError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {"ok": True, "set_id": undone.set_id, "frame_index": undone.frame_index}

    @app.get("/api/progress")
    def get_progress(annotator: str):
        role = require_known(annotator)
        if role == "checker":
            done = len(store.current_labels(checker_id))
            return {"done": done, "total": done + len(task_queue(checker_id))}
        return {"done": len(store.current_labels(annotator)), "total": len(frames)}

    @app.get("/api/agreement")
    def get_agreement():
        if checker_mode:
            # blindness: agreement statistics reveal vote counts
            raise HTTPException(status_code=403, detail="agreement is hidden in checker mode")
        sheets = build_agreement_sheets(store, annotators, checker_id)
        votes_logged = sum(len(store.current_labels(a)) for a in known)
        report = compute_agreement(sheets) if sheets else None
        return {
            "votes_logged": votes_logged,
            "frames_total": len(frames),
            "report": report.to_dict() if report else None,
        }

    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
