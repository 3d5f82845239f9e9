"""Parse, repair and normalize raw pose-estimator output.

The pose estimator emits one JSON document per frame with zero or more
person entries, each holding flat (x, y, confidence) triples.  This module
turns those documents into complete per-frame keypoint sets:

    parse_pose_frame      JSON document -> RawDetection per person
    merge_split_detections  reunite one subject broken into two detections
    interpolate_track     fill per-keypoint gaps over a frame sequence
    to_nose_origin        translate coordinates so the nose is (0, 0)

The 18 tracked keypoints and their canonical order are frozen in
:class:`KeypointId`; every downstream feature vector depends on that order.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np


class KeypointId(IntEnum):
    """The 18 tracked keypoints in canonical order.

    The integer value is the keypoint's position in every vector layout
    (keypoint CSV columns, the 36-dim KP feature vector, depth vector).
    Face set: NOSE, LEFT_EYE_CENTER, RIGHT_EYE_CENTER.
    Body set: NECK, LEFT_SHOULDER, RIGHT_SHOULDER.
    Eye contours: six points per eye.
    """

    NOSE = 0
    LEFT_EYE_CENTER = 1
    RIGHT_EYE_CENTER = 2
    NECK = 3
    LEFT_SHOULDER = 4
    RIGHT_SHOULDER = 5
    LEFT_EYE_1 = 6
    LEFT_EYE_2 = 7
    LEFT_EYE_3 = 8
    LEFT_EYE_4 = 9
    LEFT_EYE_5 = 10
    LEFT_EYE_6 = 11
    RIGHT_EYE_1 = 12
    RIGHT_EYE_2 = 13
    RIGHT_EYE_3 = 14
    RIGHT_EYE_4 = 15
    RIGHT_EYE_5 = 16
    RIGHT_EYE_6 = 17

    @property
    def short_name(self) -> str:
        return self.name.lower()


N_KEYPOINTS = 18

FACE_KEYPOINTS = (KeypointId.NOSE, KeypointId.LEFT_EYE_CENTER, KeypointId.RIGHT_EYE_CENTER)
BODY_KEYPOINTS = (KeypointId.NECK, KeypointId.LEFT_SHOULDER, KeypointId.RIGHT_SHOULDER)
LEFT_EYE_CONTOUR = tuple(KeypointId(i) for i in range(6, 12))
RIGHT_EYE_CONTOUR = tuple(KeypointId(i) for i in range(12, 18))


class FrameSpace(Enum):
    PIXEL = "pixel"
    NOSE_ORIGIN = "nose_origin"


class PoseParseError(ValueError):
    """Malformed pose JSON; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class ConfigError(ValueError):
    """Index map refers to a missing array or an out-of-range index."""


class TrackError(ValueError):
    """A keypoint was never observed anywhere in a track."""


class Keypoint(NamedTuple):
    x: float
    y: float
    confidence: float


@dataclass
class RawDetection:
    """One person candidate in one frame; keypoints may be missing."""

    frame_index: int
    points: dict[KeypointId, Keypoint] = field(default_factory=dict)

    def total_confidence(self) -> float:
        return sum(p.confidence for p in self.points.values())

    def present(self) -> frozenset[KeypointId]:
        return frozenset(self.points)


@dataclass
class KeypointFrame:
    """A complete frame: all 18 keypoints, row k = coordinates of KeypointId(k)."""

    frame_index: int
    coords: np.ndarray  # (18, 2) float64
    space: FrameSpace = FrameSpace.PIXEL

    def __post_init__(self) -> None:
        self.coords = np.asarray(self.coords, dtype=np.float64)
        if self.coords.shape != (N_KEYPOINTS, 2):
            raise ValueError(f"expected (18, 2) coordinates, got {self.coords.shape}")
        if self.space is FrameSpace.NOSE_ORIGIN:
            nose = self.coords[KeypointId.NOSE]
            if nose[0] != 0.0 or nose[1] != 0.0:
                raise ValueError("nose-origin frame must have nose at exactly (0, 0)")

    def coord(self, k: KeypointId) -> np.ndarray:
        return self.coords[int(k)]


# Default adapter for the common estimator layout: 25-point body array plus
# 70-point face array (eye contours at face indices 36-41 / 42-47, pupils at
# 68/69).  Each entry is (source array name, point index within that array).
DEFAULT_INDEX_MAP: dict[KeypointId, tuple[str, int]] = {
    KeypointId.NOSE: ("pose_keypoints_2d", 0),
    KeypointId.NECK: ("pose_keypoints_2d", 1),
    KeypointId.RIGHT_SHOULDER: ("pose_keypoints_2d", 2),
    KeypointId.LEFT_SHOULDER: ("pose_keypoints_2d", 5),
    KeypointId.RIGHT_EYE_CENTER: ("face_keypoints_2d", 68),
    KeypointId.LEFT_EYE_CENTER: ("face_keypoints_2d", 69),
    **{KeypointId(12 + i): ("face_keypoints_2d", 36 + i) for i in range(6)},  # right contour
    **{KeypointId(6 + i): ("face_keypoints_2d", 42 + i) for i in range(6)},  # left contour
}


def load_index_map(path: str) -> dict[KeypointId, tuple[str, int]]:
    """Read an adapter config mapping keypoint names to (array, index) pairs.

    JSON or TOML, e.g. ``{"nose": ["pose_keypoints_2d", 0], ...}``.  Names are
    the lowercased :class:`KeypointId` member names.
    """
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError as exc:  # tomllib is 3.11+
            raise ConfigError("TOML index maps need Python >= 3.11; use JSON") from exc
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    else:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    out: dict[KeypointId, tuple[str, int]] = {}
    for name, entry in raw.items():
        try:
            kp = KeypointId[name.upper()]
        except KeyError as exc:
            raise ConfigError(f"unknown keypoint name {name!r} in index map") from exc
        if not (isinstance(entry, (list, tuple)) and len(entry) == 2):
            raise ConfigError(f"index map entry for {name!r} must be [array, index]")
        out[kp] = (str(entry[0]), int(entry[1]))
    missing = [k.short_name for k in KeypointId if k not in out]
    if missing:
        raise ConfigError(f"index map missing keypoints: {', '.join(missing)}")
    return out


def parse_pose_frame(
    blob: str | bytes,
    index_map: Mapping[KeypointId, tuple[str, int]] | None = None,
    frame_index: int = 0,
    tau: float = 0.1,
) -> list[RawDetection]:
    """Parse one frame's pose JSON into per-person detections.

    A keypoint is treated as missing when its confidence is below ``tau``
    or its (x, y, c) triple is all zero.
    """
    if index_map is None:
        index_map = DEFAULT_INDEX_MAP
    try:
        doc = json.loads(blob)
    except json.JSONDecodeError as exc:
        raise PoseParseError(f"malformed pose JSON at byte offset {exc.pos}: {exc.msg}", exc.pos) from exc

    people = doc.get("people", []) if isinstance(doc, dict) else []
    detections = []
    for person in people:
        points: dict[KeypointId, Keypoint] = {}
        for kp, (array_name, idx) in index_map.items():
            triples = person.get(array_name)
            if triples is None:
                raise ConfigError(f"index map names array {array_name!r} absent from person entry")
            base = 3 * idx
            if base + 3 > len(triples):
                raise ConfigError(
                    f"index map points {kp.short_name} at {array_name}[{idx}] "
                    f"but the array holds only {len(triples) // 3} points"
                )
            x, y, c = triples[base], triples[base + 1], triples[base + 2]
            if c < tau or (x == 0 and y == 0 and c == 0):
                continue
            points[kp] = Keypoint(float(x), float(y), float(c))
        detections.append(RawDetection(frame_index=frame_index, points=points))
    return detections


def _pick_higher(a: Keypoint, b: Keypoint) -> Keypoint:
    # Symmetric tie-break keeps the two-input merge commutative.
    return max(a, b, key=lambda p: (p.confidence, p.x, p.y))


def _mergeable(a: RawDetection, b: RawDetection, theta_overlap: float, delta_px: float) -> bool:
    pa, pb = a.present(), b.present()
    if not pa or not pb:
        return True  # an empty candidate unions trivially
    shared = pa & pb
    union = pa | pb
    jaccard = len(shared) / len(union)
    if jaccard > theta_overlap:
        return False
    if shared:
        dists = [
            float(np.hypot(a.points[k].x - b.points[k].x, a.points[k].y - b.points[k].y))
            for k in shared
        ]
        if float(np.mean(dists)) > delta_px:
            return False
    return True


def _union(a: RawDetection, b: RawDetection) -> RawDetection:
    points = dict(a.points)
    for k, p in b.points.items():
        points[k] = _pick_higher(points[k], p) if k in points else p
    return RawDetection(frame_index=a.frame_index, points=points)


def merge_split_detections(
    detections: Sequence[RawDetection],
    theta_overlap: float = 0.0,
    delta_px: float = 10.0,
    frame_index: int | None = None,
) -> RawDetection:
    """Collapse one frame's detections to a single subject.

    Two detections merge when their present-keypoint sets barely overlap
    (Jaccard <= ``theta_overlap``) and any shared keypoints sit within
    ``delta_px`` mean pixel distance; the merge unions the point maps, with
    shared keypoints taken from the higher-confidence source.  Detections
    that cannot be merged are resolved by keeping the candidate with the
    highest summed confidence.  An empty input yields an all-absent marker
    detection rather than an error.
    """
    if not detections:
        return RawDetection(frame_index=frame_index if frame_index is not None else 0)
    if len({d.frame_index for d in detections}) > 1:
        raise ValueError("detections to merge must share a frame index")

    pool = list(detections)
    merged = True
    while merged and len(pool) > 1:
        merged = False
        for i in range(len(pool)):
            for j in range(i + 1, len(pool)):
                if _mergeable(pool[i], pool[j], theta_overlap, delta_px):
                    combined = _union(pool[i], pool[j])
                    pool = [d for k, d in enumerate(pool) if k not in (i, j)]
                    pool.append(combined)
                    merged = True
                    break
            if merged:
                break
    return max(pool, key=lambda d: d.total_confidence())


def interpolate_track(track: Sequence[RawDetection]) -> list[KeypointFrame]:
    """Fill per-keypoint gaps over a contiguous frame sequence.

    Interior gaps are bridged by per-coordinate linear interpolation between
    the surrounding observations; leading/trailing gaps hold the first/last
    observed value.  Observed frames pass through untouched.
    """
    if not track:
        return []
    indices = [d.frame_index for d in track]
    if indices != list(range(indices[0], indices[0] + len(track))):
        raise ValueError("track must cover contiguous frame indices")

    n = len(track)
    coords = np.zeros((n, N_KEYPOINTS, 2), dtype=np.float64)
    positions = np.arange(n, dtype=np.float64)
    for kp in KeypointId:
        obs = [(t, d.points[kp]) for t, d in enumerate(track) if kp in d.points]
        if not obs:
            raise TrackError(f"keypoint {kp.short_name} never observed in track")
        xp = np.array([t for t, _ in obs], dtype=np.float64)
        coords[:, int(kp), 0] = np.interp(positions, xp, np.array([p.x for _, p in obs]))
        coords[:, int(kp), 1] = np.interp(positions, xp, np.array([p.y for _, p in obs]))

    return [
        KeypointFrame(frame_index=indices[t], coords=coords[t], space=FrameSpace.PIXEL)
        for t in range(n)
    ]


def to_nose_origin(frame: KeypointFrame) -> KeypointFrame:
    """Translate all keypoints so the nose sits at exactly (0, 0)."""
    shifted = frame.coords - frame.coords[KeypointId.NOSE]
    shifted[KeypointId.NOSE] = 0.0
    return KeypointFrame(frame_index=frame.frame_index, coords=shifted, space=FrameSpace.NOSE_ORIGIN)


KEYPOINT_CSV_HEADER = ["set_id", "frame_index"] + [
    f"{k.short_name}_{axis}" for k in KeypointId for axis in ("x", "y")
]


def write_keypoints_csv(rows: Iterable[tuple[str, KeypointFrame]], path: str) -> None:
    """Write canonical keypoint CSV: set_id, frame_index, then x/y per keypoint."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(KEYPOINT_CSV_HEADER)
        for set_id, frame in rows:
            flat = [f"{v:.9g}" for v in frame.coords.reshape(-1)]
            writer.writerow([set_id, frame.frame_index, *flat])
