"""Per-keypoint depth extraction from the depth image.

Keypoints live in RGB pixel coordinates (1920x1080 by default); the depth
image is smaller (512x424 by default), so coordinates are mapped through a
configurable proportional scaling before sampling.  Each keypoint's depth is
the mean of the 3x3 neighborhood around its mapped position, with zero-valued
pixels (sensor dropout) excluded so they cannot drag the average down.

Depth extraction happens on pixel-space frames, after gap interpolation but
before the nose-origin transform.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .pose_ingest import N_KEYPOINTS, FrameSpace, KeypointFrame, KeypointId

DEFAULT_RGB_SIZE = (1920, 1080)
DEFAULT_DEPTH_SIZE = (512, 424)


class SpaceError(ValueError):
    """Frame handed to depth sampling in the wrong coordinate space."""


@dataclass
class DepthImage:
    """Single-channel depth map, row-major uint16 millimeter-scale values."""

    width: int
    height: int
    values: np.ndarray  # (height, width)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values)
        if self.values.shape != (self.height, self.width):
            raise ValueError(
                f"depth values shape {self.values.shape} != (height={self.height}, width={self.width})"
            )

    @classmethod
    def from_png(cls, path: str) -> "DepthImage":
        from PIL import Image

        with Image.open(path) as img:
            arr = np.asarray(img, dtype=np.uint16)
        return cls(width=arr.shape[1], height=arr.shape[0], values=arr)

    @classmethod
    def from_raw(cls, path: str) -> "DepthImage":
        """Raw little-endian uint16 with a `<path>.json` sidecar {width, height}."""
        with open(path + ".json", encoding="utf-8") as fh:
            header = json.load(fh)
        w, h = int(header["width"]), int(header["height"])
        arr = np.fromfile(path, dtype="<u2")
        if arr.size != w * h:
            raise ValueError(f"{path}: expected {w * h} values, found {arr.size}")
        return cls(width=w, height=h, values=arr.reshape(h, w))

    @classmethod
    def load(cls, path: str) -> "DepthImage":
        if path.endswith(".png"):
            return cls.from_png(path)
        return cls.from_raw(path)

    def to_png(self, path: str) -> None:
        from PIL import Image

        Image.fromarray(self.values.astype(np.uint16)).save(path)

    def to_raw(self, path: str) -> None:
        self.values.astype("<u2").tofile(path)
        with open(path + ".json", "w", encoding="utf-8") as fh:
            json.dump({"width": self.width, "height": self.height}, fh)


@dataclass
class CoordinateMapping:
    """Affine RGB -> depth coordinate registration."""

    scale_x: float
    scale_y: float
    offset_x: float = 0.0
    offset_y: float = 0.0

    def __post_init__(self) -> None:
        if self.scale_x <= 0 or self.scale_y <= 0:
            raise ValueError("mapping scales must be positive")

    @classmethod
    def proportional(
        cls,
        rgb_size: tuple[int, int] = DEFAULT_RGB_SIZE,
        depth_size: tuple[int, int] = DEFAULT_DEPTH_SIZE,
    ) -> "CoordinateMapping":
        return cls(scale_x=depth_size[0] / rgb_size[0], scale_y=depth_size[1] / rgb_size[1])

    @classmethod
    def identity(cls) -> "CoordinateMapping":
        return cls(scale_x=1.0, scale_y=1.0)


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def map_rgb_to_depth(
    p: tuple[float, float], mapping: CoordinateMapping, width: int, height: int
) -> tuple[int, int]:
    """Map an RGB pixel coordinate into depth-image pixel indices, clamped to bounds."""
    ix = _round_half_up(p[0] * mapping.scale_x + mapping.offset_x)
    iy = _round_half_up(p[1] * mapping.scale_y + mapping.offset_y)
    return (min(max(ix, 0), width - 1), min(max(iy, 0), height - 1))


def sample_depth(img: DepthImage, p: tuple[int, int]) -> float:
    """Mean of the 3x3 window at p, in-bounds pixels only, dropout zeros excluded."""
    x, y = p
    x0, x1 = max(x - 1, 0), min(x + 2, img.width)
    y0, y1 = max(y - 1, 0), min(y + 2, img.height)
    window = img.values[y0:y1, x0:x1].astype(np.float64)
    valid = window[window > 0]
    if valid.size == 0:
        return 0.0
    return float(valid.mean())


def depth_vector(
    frame: KeypointFrame, img: DepthImage, mapping: CoordinateMapping
) -> np.ndarray:
    """Sampled depth per keypoint, canonical order, length 18."""
    if frame.space is not FrameSpace.PIXEL:
        raise SpaceError("depth sampling requires a pixel-space frame (before nose-origin)")
    out = np.empty(N_KEYPOINTS)
    for k in KeypointId:
        x, y = frame.coord(k)
        out[int(k)] = sample_depth(img, map_rgb_to_depth((x, y), mapping, img.width, img.height))
    return out


def find_depth_file(depth_dir: str, set_id: str, frame_index: int) -> str | None:
    """Locate `<set_id>_<frame_index>_depth.png` or `.raw` under depth_dir."""
    for ext in ("png", "raw"):
        candidate = os.path.join(depth_dir, f"{set_id}_{frame_index}_depth.{ext}")
        if os.path.exists(candidate):
            return candidate
    return None
