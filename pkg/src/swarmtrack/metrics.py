"""Evaluation metrics: detection rate, mask overlap, world-frame error.

The successful detection rate (SDR) is the percentage of frames whose
predicted center lies within a pixel radius of the annotated center,
over the frames where both annotations exist. Mask quality uses the
confusion matrix of predicted vs reference binary masks. World-frame
accuracy is measured on pairwise point distances, which cancels any
global offset or rotation between coordinate conventions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .shapes import BinaryMask


class MetricError(ValueError):
    """Inputs insufficient or inconsistent for the requested metric."""


@dataclass(frozen=True)
class Trajectory2D:
    """Image-space track: frame index -> (x, y) pixels, corner origin.

    Frames are kept sorted; missing frames simply have no entry.
    """

    points: dict[int, tuple[float, float]]

    def __post_init__(self) -> None:
        cleaned: dict[int, tuple[float, float]] = {}
        for frame in sorted(self.points):
            x, y = self.points[frame]
            if frame < 0:
                raise MetricError(f"negative frame index {frame}")
            if not (math.isfinite(x) and math.isfinite(y)):
                raise MetricError(f"non-finite point at frame {frame}")
            cleaned[int(frame)] = (float(x), float(y))
        object.__setattr__(self, "points", cleaned)

    @property
    def frames(self) -> list[int]:
        return list(self.points)

    def __len__(self) -> int:
        return len(self.points)


def sdr(pred: Trajectory2D, ref: Trajectory2D, radius: float) -> float:
    """Successful detection rate at a pixel radius, in percent.

    Only frames annotated in both trajectories count; the rate is the
    share of those frames with center error <= radius.
    """
    if not (math.isfinite(radius) and radius > 0):
        raise MetricError(f"radius must be positive, got {radius!r}")
    common = sorted(set(pred.points) & set(ref.points))
    if not common:
        raise MetricError("trajectories share no annotated frames")
    hits = 0
    for frame in common:
        px, py = pred.points[frame]
        rx, ry = ref.points[frame]
        if math.hypot(px - rx, py - ry) <= radius:
            hits += 1
    return 100.0 * hits / len(common)


@dataclass(frozen=True)
class MaskScores:
    """Confusion-matrix scores of one predicted mask against reference.

    ``degenerate`` marks the both-empty case, where all scores are
    defined as 1 by convention.
    """

    iou: float
    precision: float
    recall: float
    f1: float
    degenerate: bool = False


def mask_scores(pred: BinaryMask | np.ndarray, ref: BinaryMask | np.ndarray) -> MaskScores:
    """IoU / precision / recall / F1 of two binary masks."""
    p = pred.bits if isinstance(pred, BinaryMask) else np.asarray(pred, dtype=bool)
    r = ref.bits if isinstance(ref, BinaryMask) else np.asarray(ref, dtype=bool)
    if p.shape != r.shape:
        raise MetricError(f"mask shapes differ: {p.shape} vs {r.shape}")
    tp = int(np.count_nonzero(p & r))
    fp = int(np.count_nonzero(p & ~r))
    fn = int(np.count_nonzero(~p & r))
    if tp + fp + fn == 0:
        return MaskScores(1.0, 1.0, 1.0, 1.0, degenerate=True)
    iou = tp / (tp + fp + fn)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * tp / (2 * tp + fp + fn)
    return MaskScores(iou, precision, recall, f1)


@dataclass
class MaskScoreAccumulator:
    """Streaming micro/macro aggregation over a mask sequence.

    Micro scores pool the confusion counts over all frames; macro
    scores average the per-frame values (degenerate frames score 1).
    """

    tp: int = 0
    fp: int = 0
    fn: int = 0
    per_frame: list[MaskScores] | None = None

    def __post_init__(self) -> None:
        if self.per_frame is None:
            self.per_frame = []

    def add(self, pred: BinaryMask | np.ndarray, ref: BinaryMask | np.ndarray) -> MaskScores:
        p = pred.bits if isinstance(pred, BinaryMask) else np.asarray(pred, dtype=bool)
        r = ref.bits if isinstance(ref, BinaryMask) else np.asarray(ref, dtype=bool)
        scores = mask_scores(p, r)
        self.tp += int(np.count_nonzero(p & r))
        self.fp += int(np.count_nonzero(p & ~r))
        self.fn += int(np.count_nonzero(~p & r))
        self.per_frame.append(scores)
        return scores

    def micro(self) -> MaskScores:
        if not self.per_frame:
            raise MetricError("no frames accumulated")
        if self.tp + self.fp + self.fn == 0:
            return MaskScores(1.0, 1.0, 1.0, 1.0, degenerate=True)
        iou = self.tp / (self.tp + self.fp + self.fn)
        precision = self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0
        recall = self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0
        f1 = 2 * self.tp / (2 * self.tp + self.fp + self.fn)
        return MaskScores(iou, precision, recall, f1)

    def macro(self) -> MaskScores:
        if not self.per_frame:
            raise MetricError("no frames accumulated")
        return MaskScores(
            iou=float(np.mean([s.iou for s in self.per_frame])),
            precision=float(np.mean([s.precision for s in self.per_frame])),
            recall=float(np.mean([s.recall for s in self.per_frame])),
            f1=float(np.mean([s.f1 for s in self.per_frame])),
        )

    def __len__(self) -> int:
        return len(self.per_frame)


def relative_distance_error(
    pred: np.ndarray, ref: np.ndarray
) -> tuple[float, float]:
    """Mean and std of pairwise-distance discrepancies, in input units.

    For every point pair (i, j), the error is
    abs(|pred_i - pred_j| - |ref_i - ref_j|). Because only distances
    enter, a global translation or rotation of either set changes
    nothing; this isolates geometric consistency from georeferencing.
    """
    p = np.asarray(pred, dtype=float)
    r = np.asarray(ref, dtype=float)
    if p.shape != r.shape:
        raise MetricError(f"point sets differ in shape: {p.shape} vs {r.shape}")
    if p.ndim != 2 or p.shape[1] not in (2, 3):
        raise MetricError(f"expected (n, 2) or (n, 3) points, got {p.shape}")
    if p.shape[0] < 2:
        raise MetricError("need at least 2 points for pairwise distances")
    errors = np.abs(pdist(p) - pdist(r))
    return float(errors.mean()), float(errors.std())


def framewise_centroid_baseline(
    masks, threshold: float = 0.5
) -> Trajectory2D:
    """Per-frame centroid of the thresholded mask, no temporal model.

    The reference baseline the filter is compared against. Frames with
    no pixel above threshold carry the previous centroid forward (image
    center before the first detection) so every frame stays annotated.
    """
    if not (0 <= threshold <= 1):
        raise MetricError(f"threshold must be in [0, 1], got {threshold!r}")
    points: dict[int, tuple[float, float]] = {}
    last: tuple[float, float] | None = None
    n = 0
    for i, mask in enumerate(masks):
        values = mask.values
        ys, xs = np.nonzero(values >= threshold)
        if xs.size:
            w = values[ys, xs]
            last = (float(np.dot(w, xs) / w.sum()), float(np.dot(w, ys) / w.sum()))
        elif last is None:
            last = ((values.shape[1] - 1) / 2.0, (values.shape[0] - 1) / 2.0)
        points[i] = last
        n += 1
    if n == 0:
        raise MetricError("no masks supplied")
    return Trajectory2D(points)
