"""Multi-labeler vote storage, resolution and agreement statistics.

Every frame receives exactly four labels (0 low, 1 mid, 2 high).  Resolution
runs in three stages:

1. strict majority over the four votes (a label needs 3+ of 4);
2. for frames stage 1 leaves open, a fifth "checker" vote joins and a strict
   majority over all five is tried (3+ of 5);
3. any frame still open takes the lower median of its nearest resolved
   neighbors' labels along the frame timeline.

The checker labels blind: nothing here ever exposes the original four votes
to checker-facing code paths.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

LABELS = (0, 1, 2)
LABEL_NAMES = {0: "low", 1: "mid", 2: "high"}
N_ANNOTATORS = 4


class Resolution(Enum):
    MAJORITY_OF_FOUR = "majority_of_four"
    MAJORITY_WITH_CHECKER = "majority_with_checker"
    MEDIAN_FILTER = "median_filter"


class VoteError(ValueError):
    pass


class InvariantViolation(RuntimeError):
    """A vote sheet broke the checker-only-after-stage-1-failure rule."""


class CoverageError(ValueError):
    """Annotator files do not cover identical frame domains."""


@dataclass
class VoteSheet:
    """All votes for one frame plus the resolved outcome, once known."""

    set_id: str
    frame_index: int
    annotator_votes: dict[str, int]
    checker_vote: Optional[int] = None
    resolution: Optional[Resolution] = None
    final: Optional[int] = None

    def __post_init__(self) -> None:
        if len(self.annotator_votes) != N_ANNOTATORS:
            raise VoteError(
                f"expected {N_ANNOTATORS} annotator votes, got {len(self.annotator_votes)}"
            )
        for who, vote in self.annotator_votes.items():
            if vote not in LABELS:
                raise VoteError(f"annotator {who!r} voted {vote!r}, outside {LABELS}")
        if self.checker_vote is not None and self.checker_vote not in LABELS:
            raise VoteError(f"checker vote {self.checker_vote!r} outside {LABELS}")


@dataclass
class SetAgreement:
    set_id: str
    frames: int
    pct_settled_annotators: float
    pct_settled_with_checker: float


@dataclass
class AgreementReport:
    """Per-set settled percentages and their summary statistics.

    ``mean_*``/``std_*`` aggregate the per-set percentages (std is the
    sample standard deviation); ``global_*`` are the frame-weighted
    percentages over all sets pooled together.
    """

    per_set: list[SetAgreement]
    mean_settled_annotators: float
    std_settled_annotators: float
    mean_settled_with_checker: float
    std_settled_with_checker: float
    global_settled_annotators: float
    global_settled_with_checker: float
    class_distribution: dict[int, float]  # label -> percent of final labels
    total_frames: int

    def to_dict(self) -> dict:
        return {
            "per_set": [
                {
                    "set_id": s.set_id,
                    "frames": s.frames,
                    "pct_settled_annotators": s.pct_settled_annotators,
                    "pct_settled_with_checker": s.pct_settled_with_checker,
                }
                for s in self.per_set
            ],
            "mean_settled_annotators": self.mean_settled_annotators,
            "std_settled_annotators": self.std_settled_annotators,
            "mean_settled_with_checker": self.mean_settled_with_checker,
            "std_settled_with_checker": self.std_settled_with_checker,
            "global_settled_annotators": self.global_settled_annotators,
            "global_settled_with_checker": self.global_settled_with_checker,
            "class_distribution": {LABEL_NAMES[k]: v for k, v in self.class_distribution.items()},
            "total_frames": self.total_frames,
        }

    def save_json(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def majority_vote(votes: Sequence[int], quorum: int | None = None) -> Optional[int]:
    """Label holding a strict majority (more than half the votes), else None.

    ``quorum`` defaults to floor(n/2) + 1.
    """
    if not votes:
        raise VoteError("majority_vote needs at least one vote")
    if quorum is None:
        quorum = len(votes) // 2 + 1
    label, count = Counter(votes).most_common(1)[0]
    return label if count >= quorum else None


def resolve_with_checker(sheet: VoteSheet) -> VoteSheet:
    """Run resolution stages 1 and 2 on one sheet.

    Stage 1 is the four-way majority.  If it fails and a checker vote is
    present, stage 2 takes the majority over all five votes.  A sheet whose
    checker vote is set even though stage 1 succeeds violates the
    checker-escalation invariant and raises.
    """
    votes4 = list(sheet.annotator_votes.values())
    stage1 = majority_vote(votes4, quorum=3)
    if stage1 is not None:
        if sheet.checker_vote is not None:
            raise InvariantViolation(
                f"{sheet.set_id}/{sheet.frame_index}: checker vote present "
                "although the four-way majority already settled the frame"
            )
        return replace(sheet, resolution=Resolution.MAJORITY_OF_FOUR, final=stage1)
    if sheet.checker_vote is None:
        return replace(sheet, resolution=None, final=None)
    stage2 = majority_vote(votes4 + [sheet.checker_vote], quorum=3)
    if stage2 is not None:
        return replace(sheet, resolution=Resolution.MAJORITY_WITH_CHECKER, final=stage2)
    return replace(sheet, resolution=None, final=None)


def median_filter_resolve(timeline: Sequence[Optional[int]], window: int = 5) -> list[int]:
    """Fill unresolved slots with the lower median of nearby resolved labels.

    For each None entry, the ``window`` nearest resolved labels by temporal
    distance are collected (ties broken toward the earlier frame), sorted as
    ordinals, and the lower median taken.  Fewer than ``window`` resolved
    frames in the whole timeline means all of them are consulted.
    """
    if window < 1 or window % 2 == 0:
        raise VoteError("median filter window must be a positive odd integer")
    resolved = [(i, v) for i, v in enumerate(timeline) if v is not None]
    if not resolved:
        raise VoteError("median filter needs at least one resolved frame in the timeline")
    out = list(timeline)
    for i, v in enumerate(timeline):
        if v is not None:
            continue
        nearest = sorted(resolved, key=lambda item: (abs(item[0] - i), item[0]))[:window]
        labels = sorted(lab for _, lab in nearest)
        out[i] = labels[(len(labels) - 1) // 2]  # lower median
    return out  # type: ignore[return-value]


@dataclass
class FinalLabel:
    set_id: str
    frame_index: int
    label: int
    resolution: Resolution


def read_label_csv(path: str) -> dict[tuple[str, int], int]:
    """Read one annotator's `set_id,frame_index,label` CSV."""
    votes: dict[tuple[str, int], int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["set_id", "frame_index", "label"]:
            raise VoteError(f"{path}: expected header set_id,frame_index,label")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise VoteError(f"{path} line {lineno}: expected 3 columns")
            try:
                key = (row[0], int(row[1]))
                label = int(row[2])
            except ValueError as exc:
                raise VoteError(f"{path} line {lineno}: {exc}") from exc
            if label not in LABELS:
                raise VoteError(f"{path} line {lineno}: label {label} outside {LABELS}")
            votes[key] = label
    return votes


def write_label_csv(votes: Mapping[tuple[str, int], int], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["set_id", "frame_index", "label"])
        for (set_id, frame_index), label in sorted(votes.items()):
            writer.writerow([set_id, frame_index, label])


def write_final_labels_csv(finals: Iterable[FinalLabel], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["set_id", "frame_index", "label", "resolution"])
        for f in sorted(finals, key=lambda f: (f.set_id, f.frame_index)):
            writer.writerow([f.set_id, f.frame_index, f.label, f.resolution.value])


def read_final_labels_csv(path: str) -> dict[tuple[str, int], int]:
    labels: dict[tuple[str, int], int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:3] != ["set_id", "frame_index", "label"]:
            raise VoteError(f"{path}: expected header set_id,frame_index,label[,resolution]")
        for row in reader:
            if row:
                labels[(row[0], int(row[1]))] = int(row[2])
    return labels


def _settled_stats(
    sheets_by_set: Mapping[str, list[VoteSheet]],
) -> tuple[list[SetAgreement], float, float]:
    per_set = []
    settled_frames = 0
    total_frames = 0
    for set_id in sorted(sheets_by_set):
        sheets = sheets_by_set[set_id]
        stage1 = sum(1 for s in sheets if s.resolution is Resolution.MAJORITY_OF_FOUR)
        both = sum(
            1
            for s in sheets
            if s.resolution in (Resolution.MAJORITY_OF_FOUR, Resolution.MAJORITY_WITH_CHECKER)
        )
        n = len(sheets)
        per_set.append(
            SetAgreement(
                set_id=set_id,
                frames=n,
                pct_settled_annotators=100.0 * stage1 / n if n else 0.0,
                pct_settled_with_checker=100.0 * both / n if n else 0.0,
            )
        )
        settled_frames += stage1
        total_frames += n
    global_stage1 = 100.0 * settled_frames / total_frames if total_frames else 0.0
    return per_set, global_stage1, float(total_frames)


def compute_agreement(sheets: Sequence[VoteSheet]) -> AgreementReport:
    """Agreement statistics over resolved sheets (stages already applied)."""
    sheets_by_set: dict[str, list[VoteSheet]] = {}
    for s in sheets:
        sheets_by_set.setdefault(s.set_id, []).append(s)
    per_set, global_stage1, total = _settled_stats(sheets_by_set)

    both_frames = sum(
        1
        for s in sheets
        if s.resolution in (Resolution.MAJORITY_OF_FOUR, Resolution.MAJORITY_WITH_CHECKER)
    )
    global_both = 100.0 * both_frames / len(sheets) if sheets else 0.0

    p1 = np.array([s.pct_settled_annotators for s in per_set])
    p2 = np.array([s.pct_settled_with_checker for s in per_set])
    # sample std (ddof=1) when more than one set, else 0
    std1 = float(p1.std(ddof=1)) if len(p1) > 1 else 0.0
    std2 = float(p2.std(ddof=1)) if len(p2) > 1 else 0.0

    finals = [s.final for s in sheets if s.final is not None]
    counts = Counter(finals)
    dist = {lab: 100.0 * counts.get(lab, 0) / len(finals) if finals else 0.0 for lab in LABELS}

    return AgreementReport(
        per_set=per_set,
        mean_settled_annotators=float(p1.mean()) if len(p1) else 0.0,
        std_settled_annotators=std1,
        mean_settled_with_checker=float(p2.mean()) if len(p2) else 0.0,
        std_settled_with_checker=std2,
        global_settled_annotators=global_stage1,
        global_settled_with_checker=global_both,
        class_distribution=dist,
        total_frames=int(total),
    )


def aggregate_votes(
    annotator_votes: Mapping[str, Mapping[tuple[str, int], int]],
    checker_votes: Mapping[tuple[str, int], int] | None = None,
    window: int = 5,
) -> tuple[list[FinalLabel], AgreementReport]:
    """Run the full three-stage resolution over in-memory vote maps.

    All annotators must cover identical (set_id, frame_index) domains.
    Checker votes are consulted only for frames the four-way majority leaves
    open; surplus checker rows are ignored.
    """
    if len(annotator_votes) != N_ANNOTATORS:
        raise VoteError(f"expected {N_ANNOTATORS} annotator vote maps, got {len(annotator_votes)}")
    checker_votes = checker_votes or {}

    annotators = sorted(annotator_votes)
    domains = {a: set(annotator_votes[a]) for a in annotators}
    reference = domains[annotators[0]]
    for a in annotators[1:]:
        if domains[a] != reference:
            missing = sorted(reference ^ domains[a])[:10]
            raise CoverageError(
                f"annotator {a!r} and {annotators[0]!r} disagree on frame coverage; "
                f"first differences: {missing}"
            )

    sheets: list[VoteSheet] = []
    for key in sorted(reference):
        set_id, frame_index = key
        sheet = VoteSheet(
            set_id=set_id,
            frame_index=frame_index,
            annotator_votes={a: annotator_votes[a][key] for a in annotators},
        )
        resolved = resolve_with_checker(sheet)
        if resolved.final is None and key in checker_votes:
            resolved = resolve_with_checker(replace(sheet, checker_vote=checker_votes[key]))
        sheets.append(resolved)

    # stage 3: median filter per set over the frame timeline
    by_set: dict[str, list[VoteSheet]] = {}
    for s in sheets:
        by_set.setdefault(s.set_id, []).append(s)
    finals: list[FinalLabel] = []
    resolved_sheets: list[VoteSheet] = []
    for set_id in sorted(by_set):
        ordered = sorted(by_set[set_id], key=lambda s: s.frame_index)
        timeline = [s.final for s in ordered]
        filled = median_filter_resolve(timeline, window=window)
        for s, label in zip(ordered, filled):
            if s.final is None:
                s = replace(s, final=label, resolution=Resolution.MEDIAN_FILTER)
            resolved_sheets.append(s)
            finals.append(
                FinalLabel(
                    set_id=s.set_id,
                    frame_index=s.frame_index,
                    label=s.final,  # type: ignore[arg-type]
                    resolution=s.resolution,  # type: ignore[arg-type]
                )
            )
    return finals, compute_agreement(resolved_sheets)


def aggregate_dataset(
    label_files: Sequence[str],
    checker_file: str | None = None,
    window: int = 5,
) -> tuple[list[FinalLabel], AgreementReport]:
    """File-based wrapper around :func:`aggregate_votes`."""
    votes = {f"annotator_{i}:{path}": read_label_csv(path) for i, path in enumerate(label_files)}
    checker = read_label_csv(checker_file) if checker_file else None
    return aggregate_votes(votes, checker, window=window)


def render_agreement_table(report: AgreementReport) -> str:
    """Human-readable agreement table: one column per set plus mean/std."""
    header = ["set"] + [s.set_id for s in report.per_set] + ["mean", "std"]
    frames = ["frames"] + [str(s.frames) for s in report.per_set] + ["-", "-"]
    row1 = (
        ["% settled (annotators)"]
        + [f"{s.pct_settled_annotators:.2f}" for s in report.per_set]
        + [f"{report.mean_settled_annotators:.2f}", f"{report.std_settled_annotators:.4f}"]
    )
    row2 = (
        ["% settled (with checker)"]
        + [f"{s.pct_settled_with_checker:.2f}" for s in report.per_set]
        + [f"{report.mean_settled_with_checker:.2f}", f"{report.std_settled_with_checker:.4f}"]
    )
    rows = [header, frames, row1, row2]
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in rows]
    dist = "  ".join(
        f"{LABEL_NAMES[lab]}={report.class_distribution[lab]:.1f}%" for lab in LABELS
    )
    lines.append(f"final label distribution: {dist}")
    lines.append(
        "global (frame-weighted): "
        f"{report.global_settled_annotators:.2f}% settled by annotators, "
        f"{report.global_settled_with_checker:.2f}% with checker"
    )
    return "\n".join(lines)
