"""Per-frame feature records: assembly, standardization, CSV persistence.

A record carries three modality vectors in a frozen layout:

    kp     36   nose-origin (x, y) per keypoint, canonical order
    gf     26   geometric features (see geometry.GF_FEATURE_NAMES)
    depth  18   sampled depth per keypoint

Early fusion concatenates them as kp | gf | depth (80 dims, 62 without
depth).  Standardization statistics are always fitted on a training split
only; the Standardizer records exactly which frames it saw so downstream
cross-validation can prove no test frame leaked into the fit.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .geometry import GF_DIM, GF_FEATURE_NAMES
from .pose_ingest import FrameSpace, KeypointFrame, KeypointId

KP_DIM = 36
DEPTH_DIM = 18
TOTAL_DIM = KP_DIM + GF_DIM + DEPTH_DIM  # 80

MODALITY_DIMS = {"kp": KP_DIM, "gf": GF_DIM, "depth": DEPTH_DIM}
MODALITY_SLICES = {
    "kp": slice(0, KP_DIM),
    "gf": slice(KP_DIM, KP_DIM + GF_DIM),
    "depth": slice(KP_DIM + GF_DIM, TOTAL_DIM),
}

LAYOUT_VERSION = "attn-features-v1"

KP_COLUMNS = [f"kp_{k.short_name}_{axis}" for k in KeypointId for axis in ("x", "y")]
GF_COLUMNS = [f"gf_{name}" for name in GF_FEATURE_NAMES]
DEPTH_COLUMNS = [f"depth_{k.short_name}" for k in KeypointId]
FEATURE_COLUMNS = KP_COLUMNS + GF_COLUMNS + DEPTH_COLUMNS
CSV_HEADER = ["set_id", "frame_index", *FEATURE_COLUMNS, "label"]  # 83 columns


class FeatureStoreError(ValueError):
    pass


class AssemblyError(FeatureStoreError):
    """Inputs assembled into one record disagree on frame identity or space."""


class FeatureLoadError(FeatureStoreError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass
class FeatureRecord:
    set_id: str
    frame_index: int
    kp: np.ndarray  # (36,)
    gf: np.ndarray  # (26,)
    depth: np.ndarray  # (18,)
    label: int | None = None

    def __post_init__(self) -> None:
        self.kp = np.asarray(self.kp, dtype=np.float64)
        self.gf = np.asarray(self.gf, dtype=np.float64)
        self.depth = np.asarray(self.depth, dtype=np.float64)
        for name, vec in (("kp", self.kp), ("gf", self.gf), ("depth", self.depth)):
            want = MODALITY_DIMS[name]
            if vec.shape != (want,):
                raise FeatureStoreError(f"{name} vector must have shape ({want},), got {vec.shape}")

    def key(self) -> tuple[str, int]:
        return (self.set_id, self.frame_index)

    def vector(self) -> np.ndarray:
        """Early-fusion concatenation kp | gf | depth, length 80."""
        return np.concatenate([self.kp, self.gf, self.depth])


def assemble_frame_features(
    set_id: str,
    kf_pixel: KeypointFrame,
    kf_origin: KeypointFrame,
    gf_vector: np.ndarray,
    depth_vec: np.ndarray,
    label: int | None = None,
) -> FeatureRecord:
    """Combine one frame's modalities into a FeatureRecord.

    The KP vector comes from the nose-origin frame; depth was sampled on the
    pixel-space frame.  Both frames must refer to the same frame index.
    """
    if kf_pixel.frame_index != kf_origin.frame_index:
        raise AssemblyError(
            f"frame identity mismatch: pixel frame {kf_pixel.frame_index}, "
            f"origin frame {kf_origin.frame_index}"
        )
    if kf_pixel.space is not FrameSpace.PIXEL or kf_origin.space is not FrameSpace.NOSE_ORIGIN:
        raise AssemblyError("expected one pixel-space and one nose-origin frame")
    return FeatureRecord(
        set_id=set_id,
        frame_index=kf_origin.frame_index,
        kp=kf_origin.coords.reshape(-1).copy(),
        gf=np.asarray(gf_vector, dtype=np.float64).copy(),
        depth=np.asarray(depth_vec, dtype=np.float64).copy(),
        label=label,
    )


@dataclass
class Standardizer:
    """Per-dimension mean/std over the 80-dim concatenation, fitted on train data.

    Dimensions whose std falls below ``epsilon`` are flagged constant and map
    to 0 (this covers the nose's identically-zero KP entries).  ``fit_keys``
    records the (set_id, frame_index) identities the statistics were fitted
    on; it is provenance for leakage checks and is not persisted.
    """

    means: np.ndarray
    stds: np.ndarray
    constant: np.ndarray  # bool mask
    layout_version: str = LAYOUT_VERSION
    epsilon: float = 1e-9
    fit_keys: frozenset = field(default_factory=frozenset, repr=False)

    def transform_vector(self, vec: np.ndarray) -> np.ndarray:
        if vec.shape != self.means.shape:
            raise FeatureStoreError(f"dimension mismatch: {vec.shape} vs fitted {self.means.shape}")
        safe = np.where(self.constant, 1.0, self.stds)
        z = (vec - self.means) / safe
        return np.where(self.constant, 0.0, z)

    def inverse_vector(self, vec: np.ndarray) -> np.ndarray:
        safe = np.where(self.constant, 0.0, self.stds)
        return vec * safe + self.means

    def save_json(self, path: str) -> None:
        payload = {
            "layout_version": self.layout_version,
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "constant_flags": self.constant.astype(bool).tolist(),
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)

    @classmethod
    def load_json(cls, path: str) -> "Standardizer":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("layout_version") != LAYOUT_VERSION:
            raise FeatureStoreError(
                f"standardizer layout {payload.get('layout_version')!r} != expected {LAYOUT_VERSION!r}"
            )
        return cls(
            means=np.asarray(payload["means"], dtype=np.float64),
            stds=np.asarray(payload["stds"], dtype=np.float64),
            constant=np.asarray(payload["constant_flags"], dtype=bool),
        )


def fit_standardizer(train: Sequence[FeatureRecord], epsilon: float = 1e-9) -> Standardizer:
    """Per-dimension mean and population std over the training records only."""
    if not train:
        raise FeatureStoreError("cannot fit a standardizer on an empty training set")
    matrix = np.stack([r.vector() for r in train])
    means = matrix.mean(axis=0)
    stds = matrix.std(axis=0)  # population std
    constant = stds < epsilon
    return Standardizer(
        means=means,
        stds=stds,
        constant=constant,
        epsilon=epsilon,
        fit_keys=frozenset(r.key() for r in train),
    )


def apply_standardizer(s: Standardizer, record: FeatureRecord) -> FeatureRecord:
    z = s.transform_vector(record.vector())
    return replace(
        record,
        kp=z[MODALITY_SLICES["kp"]],
        gf=z[MODALITY_SLICES["gf"]],
        depth=z[MODALITY_SLICES["depth"]],
    )


def persist_features(records: Iterable[FeatureRecord], path: str) -> None:
    """Write records as CSV (9 significant digits) behind a layout marker line."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# layout: {LAYOUT_VERSION}\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in records:
            values = [f"{v:.9g}" for v in r.vector()]
            label = "" if r.label is None else str(r.label)
            writer.writerow([r.set_id, r.frame_index, *values, label])


def load_features(path: str) -> list[FeatureRecord]:
    """Read a feature CSV written by persist_features, checking layout and shape."""
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        marker = fh.readline().strip()
        if marker != f"# layout: {LAYOUT_VERSION}":
            raise FeatureLoadError(
                f"unrecognized feature layout marker {marker!r}; expected layout {LAYOUT_VERSION!r}",
                line=1,
            )
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise FeatureLoadError(
                f"bad header: expected {len(CSV_HEADER)} columns (36+26+18 features + 3 id/meta)",
                line=2,
            )
        for lineno, row in enumerate(reader, start=3):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise FeatureLoadError(
                    f"expected {len(CSV_HEADER)} columns (36+26+18 features + 3 id/meta), got {len(row)}",
                    line=lineno,
                )
            try:
                set_id = row[0]
                frame_index = int(row[1])
                vec = np.array([float(v) for v in row[2 : 2 + TOTAL_DIM]])
                label = int(row[-1]) if row[-1] != "" else None
            except ValueError as exc:
                raise FeatureLoadError(str(exc), line=lineno) from exc
            records.append(
                FeatureRecord(
                    set_id=set_id,
                    frame_index=frame_index,
                    kp=vec[MODALITY_SLICES["kp"]],
                    gf=vec[MODALITY_SLICES["gf"]],
                    depth=vec[MODALITY_SLICES["depth"]],
                    label=label,
                )
            )
    return records
