"""Geometric features from a nose-origin keypoint frame.

Four distance sets plus two angles, concatenated into a fixed 26-dim layout:

    face distances        3   pairwise over {nose, left eye, right eye}
    body-face distances   9   {neck, shoulders} x {nose, eyes}
    left eye contour      6   contour point to left eye center
    right eye contour     6   contour point to right eye center
    angles                2   nose direction vs. each shoulder direction,
                              all three vectors anchored at the neck

Distance entries follow canonical keypoint order (see layout table in
GF_FEATURE_NAMES); models rely on this order never changing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pose_ingest import (
    BODY_KEYPOINTS,
    FACE_KEYPOINTS,
    LEFT_EYE_CONTOUR,
    RIGHT_EYE_CONTOUR,
    FrameSpace,
    KeypointFrame,
    KeypointId,
)

GF_DIM = 26


class DegenerateGeometryError(ValueError):
    """Two keypoints that must span a direction vector coincide."""

    def __init__(self, pair: str):
        super().__init__(f"zero-length vector between {pair}")
        self.pair = pair


@dataclass
class UnitVectors:
    """Neck-anchored unit directions: to nose (v1), to each shoulder (v2, v3)."""

    v1: np.ndarray
    v2: np.ndarray
    v3: np.ndarray


@dataclass
class GeometricFeatures:
    d_f: np.ndarray  # (3,)
    d_bf: np.ndarray  # (9,)
    d_le: np.ndarray  # (6,)
    d_re: np.ndarray  # (6,)
    a: np.ndarray  # (2,) radians

    def vector(self) -> np.ndarray:
        """Fixed 26-dim layout: D_F, D_BF, D_LE, D_RE, A."""
        return np.concatenate([self.d_f, self.d_bf, self.d_le, self.d_re, self.a])


def face_distances(frame: KeypointFrame) -> np.ndarray:
    """Distances between the three face keypoints, pairs in canonical order."""
    out = np.empty(3)
    pairs = [(0, 1), (0, 2), (1, 2)]
    for n, (i, j) in enumerate(pairs):
        out[n] = np.linalg.norm(frame.coord(FACE_KEYPOINTS[j]) - frame.coord(FACE_KEYPOINTS[i]))
    return out


def body_face_distances(frame: KeypointFrame) -> np.ndarray:
    """Distances from each body keypoint to each face keypoint (body outer)."""
    out = np.empty(9)
    n = 0
    for b in BODY_KEYPOINTS:
        for f in FACE_KEYPOINTS:
            out[n] = np.linalg.norm(frame.coord(f) - frame.coord(b))
            n += 1
    return out


def eye_contour_distances(frame: KeypointFrame, eye: str) -> np.ndarray:
    """Distances from each of an eye's six contour points to its center."""
    if eye == "left":
        center, contour = KeypointId.LEFT_EYE_CENTER, LEFT_EYE_CONTOUR
    elif eye == "right":
        center, contour = KeypointId.RIGHT_EYE_CENTER, RIGHT_EYE_CONTOUR
    else:
        raise ValueError(f"eye must be 'left' or 'right', got {eye!r}")
    c = frame.coord(center)
    return np.array([np.linalg.norm(frame.coord(k) - c) for k in contour])


def _unit(a: np.ndarray, b: np.ndarray, pair: str) -> np.ndarray:
    # scalar IEEE arithmetic: arccos amplifies last-ulp differences in the
    # dot product near parallel vectors, so the computation must be the
    # plain rounding-deterministic form of the formula (no BLAS, no FMA)
    dx, dy = float(b[0]) - float(a[0]), float(b[1]) - float(a[1])
    norm = math.sqrt(dx * dx + dy * dy)
    if norm == 0.0:
        raise DegenerateGeometryError(pair)
    return np.array([dx / norm, dy / norm])


def _angle_between(u: np.ndarray, v: np.ndarray) -> float:
    dot = float(u[0]) * float(v[0]) + float(u[1]) * float(v[1])
    return math.acos(min(1.0, max(-1.0, dot)))


def shoulder_nose_angles(frame: KeypointFrame) -> tuple[UnitVectors, np.ndarray]:
    """Angles between the neck-to-nose direction and each neck-to-shoulder direction.

    Dot products are clamped to [-1, 1] before arccos to guard against
    floating-point drift.  Coincident endpoints raise
    :class:`DegenerateGeometryError` naming the offending pair.
    """
    neck = frame.coord(KeypointId.NECK)
    v1 = _unit(neck, frame.coord(KeypointId.NOSE), "nose and neck")
    v2 = _unit(neck, frame.coord(KeypointId.LEFT_SHOULDER), "left shoulder and neck")
    v3 = _unit(neck, frame.coord(KeypointId.RIGHT_SHOULDER), "right shoulder and neck")
    angles = np.array([_angle_between(v1, v2), _angle_between(v1, v3)])
    return UnitVectors(v1, v2, v3), angles


def geometric_feature_vector(frame: KeypointFrame) -> GeometricFeatures:
    """Assemble all geometric features for one complete nose-origin frame."""
    if frame.space is not FrameSpace.NOSE_ORIGIN:
        raise ValueError("geometric features are defined on nose-origin frames")
    _, angles = shoulder_nose_angles(frame)
    return GeometricFeatures(
        d_f=face_distances(frame),
        d_bf=body_face_distances(frame),
        d_le=eye_contour_distances(frame, "left"),
        d_re=eye_contour_distances(frame, "right"),
        a=angles,
    )


def _short(k: KeypointId) -> str:
    return {
        KeypointId.NOSE: "nose",
        KeypointId.LEFT_EYE_CENTER: "leye",
        KeypointId.RIGHT_EYE_CENTER: "reye",
        KeypointId.NECK: "neck",
        KeypointId.LEFT_SHOULDER: "lshoulder",
        KeypointId.RIGHT_SHOULDER: "rshoulder",
    }[k]


GF_FEATURE_NAMES: list[str] = (
    [
        f"d_{_short(FACE_KEYPOINTS[i])}_{_short(FACE_KEYPOINTS[j])}"
        for i, j in [(0, 1), (0, 2), (1, 2)]
    ]
    + [f"d_{_short(b)}_{_short(f)}" for b in BODY_KEYPOINTS for f in FACE_KEYPOINTS]
    + [f"d_leye_c{i}" for i in range(1, 7)]
    + [f"d_reye_c{i}" for i in range(1, 7)]
    + ["angle_nose_neck_lshoulder", "angle_nose_neck_rshoulder"]
)

assert len(GF_FEATURE_NAMES) == GF_DIM
