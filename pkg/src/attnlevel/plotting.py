"""Figure rendering: confusion matrices and keypoint/feature overlays."""

from __future__ import annotations

from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .geometry import shoulder_nose_angles
from .pose_ingest import (
    BODY_KEYPOINTS,
    FACE_KEYPOINTS,
    LEFT_EYE_CONTOUR,
    RIGHT_EYE_CONTOUR,
    KeypointFrame,
    KeypointId,
)

CLASS_NAMES = ("low", "mid", "high")


def confusion_figure(matrix: np.ndarray, path: str, title: str | None = None) -> None:
    """Render a 3x3 confusion matrix; darker cells hold more classifications."""
    matrix = np.asarray(matrix)
    fig, ax = plt.subplots(figsize=(4.2, 3.8))
    ax.imshow(matrix, cmap="Blues")
    threshold = matrix.max() * 0.6 if matrix.max() > 0 else 1
    for i in range(3):
        for j in range(3):
            color = "white" if matrix[i, j] > threshold else "black"
            ax.text(j, i, str(int(matrix[i, j])), ha="center", va="center", color=color)
    ax.set_xticks(range(3), CLASS_NAMES)
    ax.set_yticks(range(3), CLASS_NAMES)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def feature_overlay(
    frame: KeypointFrame,
    path: str,
    image: Optional[np.ndarray] = None,
    title: str | None = None,
) -> None:
    """Draw the keypoints and the feature construction lines over a frame.

    Keypoints green; face-distance segments pink; body-face segments yellow;
    the neck-anchored direction vectors blue with the angle arcs orange.
    """
    fig, ax = plt.subplots(figsize=(6, 5))
    if image is not None:
        ax.imshow(image, cmap="gray")

    coords = frame.coords

    def xy(k: KeypointId) -> tuple[float, float]:
        return float(coords[k][0]), float(coords[k][1])

    for i in range(3):
        for j in range(i + 1, 3):
            a, b = xy(FACE_KEYPOINTS[i]), xy(FACE_KEYPOINTS[j])
            ax.plot([a[0], b[0]], [a[1], b[1]], color="violet", lw=1.5, zorder=2)
    for bkp in BODY_KEYPOINTS:
        for fkp in FACE_KEYPOINTS:
            a, b = xy(bkp), xy(fkp)
            ax.plot([a[0], b[0]], [a[1], b[1]], color="gold", lw=1.0, zorder=1)
    for contour, center in ((LEFT_EYE_CONTOUR, KeypointId.LEFT_EYE_CENTER),
                            (RIGHT_EYE_CONTOUR, KeypointId.RIGHT_EYE_CENTER)):
        c = xy(center)
        for k in contour:
            e = xy(k)
            ax.plot([c[0], e[0]], [c[1], e[1]], color="violet", lw=0.6, zorder=2)

    neck = np.array(xy(KeypointId.NECK))
    try:
        vectors, angles = shoulder_nose_angles(frame)
        scale = 0.35 * float(np.abs(coords - coords.mean(axis=0)).max() or 1.0)
        for v in (vectors.v1, vectors.v2, vectors.v3):
            ax.annotate(
                "",
                xy=tuple(neck + scale * v),
                xytext=tuple(neck),
                arrowprops={"arrowstyle": "->", "color": "tab:blue", "lw": 1.5},
            )
        label = f"{np.degrees(angles[0]):.0f}° / {np.degrees(angles[1]):.0f}°"
        ax.annotate(label, xy=tuple(neck), color="tab:orange", fontsize=9,
                    xytext=(5, -12), textcoords="offset points")
    except ValueError:
        pass  # degenerate frame: draw points and distances only

    ax.scatter(coords[:, 0], coords[:, 1], s=18, color="tab:green", zorder=3)
    ax.set_aspect("equal")
    ax.invert_yaxis()  # image convention: y grows downward
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
