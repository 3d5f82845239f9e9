"""End-to-end feature extraction: pose JSON + depth maps to feature records.

Per set, per frame: parse person detections, merge split detections,
interpolate keypoint gaps over the track, sample depth on the pixel-space
frames, translate to the nose origin, compute geometric features and
assemble the record.  Depth sampling deliberately happens after
interpolation and before the nose-origin transform.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .depth_sampler import (
    DEFAULT_RGB_SIZE,
    CoordinateMapping,
    DepthImage,
    depth_vector,
    find_depth_file,
)
from .feature_store import FeatureRecord, assemble_frame_features
from .geometry import DegenerateGeometryError, geometric_feature_vector
from .pose_ingest import (
    KeypointFrame,
    KeypointId,
    RawDetection,
    interpolate_track,
    merge_split_detections,
    parse_pose_frame,
    to_nose_origin,
)

_POSE_FILE = re.compile(r"^(?P<set_id>.+)_(?P<frame>\d+)\.json$")


class PipelineError(ValueError):
    pass


@dataclass
class ExtractOptions:
    tau: float = 0.1
    theta_overlap: float = 0.0
    delta_px: float = 10.0
    rgb_size: tuple[int, int] = DEFAULT_RGB_SIZE
    mapping: CoordinateMapping | None = None  # None: proportional to the depth image
    index_map: Mapping[KeypointId, tuple[str, int]] | None = None
    on_degenerate: str = "raise"  # or "carry": reuse the previous frame's angles


def scan_pose_dir(pose_dir: str) -> dict[str, list[tuple[int, str]]]:
    """Group `<set_id>_<frame>.json` files by set, ordered by frame index."""
    by_set: dict[str, list[tuple[int, str]]] = {}
    for name in sorted(os.listdir(pose_dir)):
        m = _POSE_FILE.match(name)
        if not m:
            continue
        by_set.setdefault(m.group("set_id"), []).append(
            (int(m.group("frame")), os.path.join(pose_dir, name))
        )
    for frames in by_set.values():
        frames.sort()
    if not by_set:
        raise PipelineError(f"no pose files matching <set_id>_<frame>.json under {pose_dir}")
    return by_set


def extract_set_frames(
    pose_files: Sequence[tuple[int, str]],
    opts: ExtractOptions,
) -> list[KeypointFrame]:
    """Parse, merge and interpolate one set's pose files into pixel-space frames."""
    track: list[RawDetection] = []
    for frame_index, path in pose_files:
        with open(path, encoding="utf-8") as fh:
            blob = fh.read()
        detections = parse_pose_frame(
            blob, index_map=opts.index_map, frame_index=frame_index, tau=opts.tau
        )
        track.append(
            merge_split_detections(
                detections,
                theta_overlap=opts.theta_overlap,
                delta_px=opts.delta_px,
                frame_index=frame_index,
            )
        )
    return interpolate_track(track)


def extract_features(
    pose_dir: str,
    depth_dir: str | None,
    opts: ExtractOptions | None = None,
) -> tuple[list[FeatureRecord], list[tuple[str, KeypointFrame]]]:
    """Run the full extraction over a pose directory.

    Returns the assembled records plus the pixel-space keypoint frames
    (for the canonical keypoint CSV and overlay rendering).  Without a depth
    directory the depth vectors are zero-filled.
    """
    opts = opts or ExtractOptions()
    by_set = scan_pose_dir(pose_dir)
    records: list[FeatureRecord] = []
    keypoint_rows: list[tuple[str, KeypointFrame]] = []

    for set_id in sorted(by_set):
        pixel_frames = extract_set_frames(by_set[set_id], opts)
        prev_angles: np.ndarray | None = None
        for kf_pixel in pixel_frames:
            keypoint_rows.append((set_id, kf_pixel))
            if depth_dir is not None:
                depth_path = find_depth_file(depth_dir, set_id, kf_pixel.frame_index)
                if depth_path is None:
                    raise PipelineError(
                        f"no depth file for {set_id} frame {kf_pixel.frame_index} under {depth_dir}"
                    )
                img = DepthImage.load(depth_path)
                mapping = opts.mapping or CoordinateMapping.proportional(
                    rgb_size=opts.rgb_size, depth_size=(img.width, img.height)
                )
                dv = depth_vector(kf_pixel, img, mapping)
            else:
                dv = np.zeros(18)

            kf_origin = to_nose_origin(kf_pixel)
            try:
                gf = geometric_feature_vector(kf_origin)
                prev_angles = gf.a.copy()
            except DegenerateGeometryError:
                if opts.on_degenerate != "carry" or prev_angles is None:
                    raise
                from .geometry import (
                    GeometricFeatures,
                    body_face_distances,
                    eye_contour_distances,
                    face_distances,
                )

                gf = GeometricFeatures(
                    d_f=face_distances(kf_origin),
                    d_bf=body_face_distances(kf_origin),
                    d_le=eye_contour_distances(kf_origin, "left"),
                    d_re=eye_contour_distances(kf_origin, "right"),
                    a=prev_angles.copy(),
                )
            records.append(
                assemble_frame_features(set_id, kf_pixel, kf_origin, gf.vector(), dv)
            )
    return records, keypoint_rows


def attach_labels(
    records: Sequence[FeatureRecord], labels: Mapping[tuple[str, int], int]
) -> list[FeatureRecord]:
    """Return records with labels filled in from a (set_id, frame_index) map."""
    out = []
    missing = []
    for r in records:
        if r.key() not in labels:
            missing.append(r.key())
            continue
        out.append(
            FeatureRecord(
                set_id=r.set_id,
                frame_index=r.frame_index,
                kp=r.kp,
                gf=r.gf,
                depth=r.depth,
                label=labels[r.key()],
            )
        )
    if missing:
        raise PipelineError(f"{len(missing)} records have no label; first: {missing[:5]}")
    return out
