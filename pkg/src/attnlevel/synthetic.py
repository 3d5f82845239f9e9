"""Deterministic synthetic fixtures.

Real recordings cannot ship with the toolkit, so tests, demos and the
acceptance suite run on generated stand-ins: a moving skeleton rendered to
pose-estimator JSON plus matching depth maps, multi-annotator vote files
with a controllable disagreement profile, and an abstract three-class,
three-modality Gaussian feature dataset for the model zoo.
"""

from __future__ import annotations

import json
import os
from typing import Mapping, Sequence

import numpy as np

from .annotation import write_label_csv
from .depth_sampler import DEFAULT_DEPTH_SIZE, DepthImage
from .feature_store import MODALITY_DIMS, FeatureRecord
from .pose_ingest import (
    DEFAULT_INDEX_MAP,
    KeypointId,
    N_KEYPOINTS,
)


def skeleton_coords(t: int, seed: int = 0) -> np.ndarray:
    """Plausible upper-body keypoints for frame t, smooth and jitter-free.

    Coordinates stay well inside a 1920x1080 image.  Deterministic in (t, seed).
    """
    rng = np.random.default_rng([seed, t])
    phase = 2 * np.pi * t / 60.0
    sway = 60.0 * np.sin(phase)
    bob = 15.0 * np.sin(2 * phase)

    nose = np.array([960.0 + sway, 400.0 + bob])
    coords = np.zeros((N_KEYPOINTS, 2))
    coords[KeypointId.NOSE] = nose
    coords[KeypointId.LEFT_EYE_CENTER] = nose + [45.0, -35.0]
    coords[KeypointId.RIGHT_EYE_CENTER] = nose + [-45.0, -35.0]
    coords[KeypointId.NECK] = nose + [0.0, 150.0]
    coords[KeypointId.LEFT_SHOULDER] = coords[KeypointId.NECK] + [185.0, 25.0]
    coords[KeypointId.RIGHT_SHOULDER] = coords[KeypointId.NECK] + [-185.0, 25.0]
    for base, center in (
        (KeypointId.LEFT_EYE_1, KeypointId.LEFT_EYE_CENTER),
        (KeypointId.RIGHT_EYE_1, KeypointId.RIGHT_EYE_CENTER),
    ):
        for i in range(6):
            angle = np.pi * i / 3.0
            coords[int(base) + i] = coords[center] + 12.0 * np.array([np.cos(angle), np.sin(angle)])
    coords += rng.normal(0.0, 0.4, size=coords.shape)  # sub-pixel sensor noise
    return coords


def _person_entry(coords_map: Mapping[KeypointId, np.ndarray], confidence: float = 0.9) -> dict:
    pose = [0.0] * (25 * 3)
    face = [0.0] * (70 * 3)
    arrays = {"pose_keypoints_2d": pose, "face_keypoints_2d": face}
    for kp, (array_name, idx) in DEFAULT_INDEX_MAP.items():
        if kp not in coords_map:
            continue
        x, y = coords_map[kp]
        arr = arrays[array_name]
        arr[3 * idx : 3 * idx + 3] = [float(x), float(y), confidence]
    return {"pose_keypoints_2d": pose, "face_keypoints_2d": face}


def write_pose_fixture(
    out_dir: str,
    set_id: str = "s01",
    n_frames: int = 50,
    seed: int = 0,
    gap_frames: Mapping[int, Sequence[KeypointId]] | None = None,
    split_frames: Sequence[int] = (),
) -> None:
    """Write `<set_id>_<i>.json` pose documents for a single moving subject.

    ``gap_frames`` drops the named keypoints from those frames (simulating
    missed detections); ``split_frames`` breaks the subject into a face-only
    plus a body-only person entry (simulating a split detection).
    """
    os.makedirs(out_dir, exist_ok=True)
    gap_frames = gap_frames or {}
    face_set = {k for k in KeypointId if k not in (KeypointId.NECK, KeypointId.LEFT_SHOULDER, KeypointId.RIGHT_SHOULDER)}
    for t in range(n_frames):
        coords = skeleton_coords(t, seed=seed)
        coords_map = {k: coords[int(k)] for k in KeypointId}
        for kp in gap_frames.get(t, ()):
            coords_map.pop(kp, None)
        if t in split_frames:
            people = [
                _person_entry({k: v for k, v in coords_map.items() if k in face_set}),
                _person_entry({k: v for k, v in coords_map.items() if k not in face_set}),
            ]
        else:
            people = [_person_entry(coords_map)]
        with open(os.path.join(out_dir, f"{set_id}_{t}.json"), "w", encoding="utf-8") as fh:
            json.dump({"people": people}, fh)


def write_depth_fixture(
    out_dir: str,
    set_id: str = "s01",
    n_frames: int = 50,
    seed: int = 0,
    size: tuple[int, int] = DEFAULT_DEPTH_SIZE,
) -> None:
    """Write `<set_id>_<i>_depth.png` 16-bit depth maps with smooth structure."""
    os.makedirs(out_dir, exist_ok=True)
    w, h = size
    xs = np.linspace(0.0, 1.0, w)[None, :]
    ys = np.linspace(0.0, 1.0, h)[:, None]
    for t in range(n_frames):
        wave = 200.0 * np.sin(2 * np.pi * (xs + t / 40.0)) * np.cos(2 * np.pi * ys)
        base = 1800.0 + 400.0 * ys + 150.0 * xs + wave
        img = DepthImage(width=w, height=h, values=np.clip(base, 1.0, 65535.0).astype(np.uint16))
        img.to_png(os.path.join(out_dir, f"{set_id}_{t}_depth.png"))


VOTE_PATTERNS = ("agree4", "maj3", "checker_fix", "split211", "stubborn")


def write_vote_fixture(
    out_dir: str,
    sets: Sequence[str] = ("s01", "s02"),
    frames_per_set: int = 60,
    seed: int = 0,
    pattern_weights: Mapping[str, float] | None = None,
) -> tuple[dict[tuple[str, int], int], dict[tuple[str, int], str]]:
    """Write four annotator CSVs plus a checker CSV with known disagreement.

    Per-frame vote patterns (relative to a ground-truth label):

        agree4       all four annotators vote the truth
        maj3         three vote the truth, one strays
        checker_fix  2-2 tie, the checker votes the truth (settles at stage 2)
        split211     2-1-1, the checker votes the truth (settles at stage 2)
        stubborn     2-2 tie, the checker votes the third label (to median)

    Returns the ground-truth labels and the per-frame pattern so tests can
    derive expected resolution stages.  The checker file holds votes only for
    frames the four-way majority leaves unresolved.
    """
    os.makedirs(out_dir, exist_ok=True)
    weights = dict(pattern_weights or {"agree4": 0.6, "maj3": 0.18, "checker_fix": 0.1, "split211": 0.06, "stubborn": 0.06})
    names = list(weights)
    probs = np.array([weights[n] for n in names], dtype=np.float64)
    probs /= probs.sum()

    rng = np.random.default_rng(seed)
    annotators: dict[str, dict[tuple[str, int], int]] = {f"a{i}": {} for i in range(1, 5)}
    checker: dict[tuple[str, int], int] = {}
    truth: dict[tuple[str, int], int] = {}
    patterns: dict[tuple[str, int], str] = {}

    for set_id in sets:
        label = int(rng.integers(0, 3))
        for t in range(frames_per_set):
            if rng.random() < 0.05:  # occasional attention shift
                label = int(rng.integers(0, 3))
            key = (set_id, t)
            truth[key] = label
            others = [l for l in (0, 1, 2) if l != label]
            pattern = names[int(rng.choice(len(names), p=probs))]
            patterns[key] = pattern
            if pattern == "agree4":
                votes = [label] * 4
            elif pattern == "maj3":
                votes = [label] * 3 + [int(rng.choice(others))]
            elif pattern == "checker_fix":
                other = int(rng.choice(others))
                votes = [label, label, other, other]
                checker[key] = label
            elif pattern == "split211":
                votes = [label, label, others[0], others[1]]
                checker[key] = label
            else:  # stubborn: 2-2 tie, checker picks the remaining label
                other = int(rng.choice(others))
                third = [l for l in (0, 1, 2) if l not in (label, other)][0]
                votes = [label, label, other, other]
                checker[key] = third
            order = rng.permutation(4)
            for slot, annotator in enumerate(annotators.values()):
                annotator[key] = votes[order[slot]]

    for name, votes in annotators.items():
        write_label_csv(votes, os.path.join(out_dir, f"labels_{name}.csv"))
    write_label_csv(checker, os.path.join(out_dir, "labels_checker.csv"))
    return truth, patterns


def make_fusion_dataset(
    n: int = 3000,
    seed: int = 0,
    class_priors: Sequence[float] = (0.4, 0.3, 0.3),
    separation: Mapping[str, float] | None = None,
) -> list[FeatureRecord]:
    """Three Gaussian class clusters with modality-specific informativeness.

    Each modality gets its own class-mean geometry whose separation scale
    controls how informative that modality is on its own (keypoints
    strongest, depth weakest, mirroring the real modalities' behavior).
    Noise is unit Gaussian.  The nose KP entries stay identically zero.
    """
    separation = dict(separation or {"kp": 6.0, "gf": 5.0, "depth": 3.5})
    rng = np.random.default_rng(seed)
    priors = np.asarray(class_priors, dtype=np.float64)
    priors /= priors.sum()

    means: dict[str, list[np.ndarray]] = {}
    for mod, dim in MODALITY_DIMS.items():
        per_class = []
        for _ in range(3):
            direction = rng.normal(size=dim)
            direction /= np.linalg.norm(direction)
            per_class.append(separation[mod] * direction)
        means[mod] = per_class

    labels = rng.choice(3, size=n, p=priors)
    records = []
    for i in range(n):
        c = int(labels[i])
        vecs = {}
        for mod, dim in MODALITY_DIMS.items():
            vecs[mod] = means[mod][c] + rng.normal(size=dim)
        vecs["kp"][0:2] = 0.0  # nose-origin invariant
        records.append(
            FeatureRecord(
                set_id=f"synth{i % 8:02d}",
                frame_index=i,
                kp=vecs["kp"],
                gf=vecs["gf"],
                depth=vecs["depth"],
                label=c,
            )
        )
    return records
