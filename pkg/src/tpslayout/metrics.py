"""Layout evaluation: 3-D and floor-plan IoU, corner error and pixel error."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import geometry
from .layout import CornerAnnotation, RoomLayout
from .maps import WALL_CEILING, WALL_FLOOR

CEILING, WALL, FLOOR = 0, 1, 2


class CornerCountMismatch(ValueError):
    pass


def polygon_intersection_area(a, b) -> float:
    """Exact area of the intersection of two simple polygons."""
    for name, p in (("first", a), ("second", b)):
        if not geometry.is_simple(p):
            raise ValueError(f"{name} polygon is self-intersecting or degenerate")
    return geometry.intersection_area(a, b)


def iou_2d(pred: RoomLayout, gt: RoomLayout) -> float:
    inter = polygon_intersection_area(pred.floor_polygon, gt.floor_polygon)
    union = pred.floor_area + gt.floor_area - inter
    return float(min(1.0, max(0.0, inter / union)))


def _vertical_overlap(a: RoomLayout, b: RoomLayout) -> float:
    lo = max(-a.camera_height, -b.camera_height)
    hi = min(a.ceiling_height - a.camera_height, b.ceiling_height - b.camera_height)
    return max(0.0, hi - lo)


def iou_3d(pred: RoomLayout, gt: RoomLayout) -> float:
    """Volume IoU of two vertical prisms expressed in the same camera frame.

    With a shared floor plane the overlap height is ``min(H_pred, H_gt)``;
    in general it is the overlap of the two [floor, ceiling] intervals.
    """
    inter = polygon_intersection_area(pred.floor_polygon, gt.floor_polygon) * _vertical_overlap(pred, gt)
    union = pred.volume + gt.volume - inter
    return float(min(1.0, max(0.0, inter / union)))


def corner_error(pred: CornerAnnotation, gt: CornerAnnotation, width: int | None = None,
                 height: int | None = None) -> float:
    """Mean corner distance as a percentage of the image diagonal.

    Every column contributes its ceiling and floor corner.  Prediction and
    ground truth are aligned by the cyclic shift (either direction) with the
    smallest total distance; horizontal offsets wrap around the panorama.
    """
    width = width or gt.width
    height = height or gt.height
    if len(pred) != len(gt):
        raise CornerCountMismatch(f"{len(pred)} predicted vs {len(gt)} ground-truth corner columns")
    if len(gt) == 0:
        return 0.0
    p = pred.columns
    g = gt.columns
    best = math.inf
    for order in (p, p[::-1]):
        for s in range(len(g)):
            q = np.roll(order, s, axis=0)
            du = np.abs(q[:, 0] - g[:, 0]) % width
            du = np.minimum(du, width - du)
            d = np.hypot(du, q[:, 1] - g[:, 1]) + np.hypot(du, q[:, 2] - g[:, 2])
            best = min(best, float(d.sum()))
    mean = best / (2 * len(g))
    return 100.0 * mean / math.hypot(width, height)


def _boundary_rows(channel: np.ndarray, threshold: float, missing: float) -> np.ndarray:
    h, w = channel.shape
    mask = channel >= threshold
    rows = np.arange(h, dtype=float)[:, None] + 0.5
    wsum = np.where(mask, channel, 0.0).sum(axis=0)
    have = wsum > 0
    out = np.full(w, missing)
    out[have] = (np.where(mask, channel, 0.0) * rows).sum(axis=0)[have] / wsum[have]
    if have.any() and not have.all():
        cols = np.flatnonzero(have)
        # circular interpolation across the gaps
        xp = np.concatenate([cols - w, cols, cols + w])
        fp = np.tile(out[cols], 3)
        gaps = np.flatnonzero(~have)
        out[gaps] = np.interp(gaps, xp, fp)
    return out


def class_raster(edge_map, threshold: float = 0.5) -> np.ndarray:
    """Ceiling / wall / floor labels per pixel from the G and B boundary strokes."""
    e = np.asarray(edge_map, dtype=float)
    h, w = e.shape[:2]
    top = _boundary_rows(e[:, :, WALL_CEILING], threshold, 0.0)
    bottom = _boundary_rows(e[:, :, WALL_FLOOR], threshold, float(h))
    centers = np.arange(h, dtype=float)[:, None] + 0.5
    cls = np.full((h, w), WALL, dtype=np.int8)
    cls[centers < top[None, :]] = CEILING
    cls[centers > bottom[None, :]] = FLOOR
    return cls


def pixel_error(pred_classes, gt_classes) -> float:
    """Percentage of pixels whose region labels disagree."""
    p = np.asarray(pred_classes)
    g = np.asarray(gt_classes)
    if p.shape != g.shape:
        raise ValueError(f"class rasters differ in size: {p.shape} vs {g.shape}")
    return 100.0 * float(np.count_nonzero(p != g)) / p.size


@dataclass
class MetricsReport:
    iou3d: float
    iou2d: float
    corner_error: float | None
    pixel_error: float

    def __post_init__(self):
        for name in ("iou3d", "iou2d"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    def to_dict(self) -> dict:
        return {"iou3d": self.iou3d, "iou2d": self.iou2d, "ce_pct": self.corner_error,
                "pe_pct": self.pixel_error}

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(d["iou3d"], d["iou2d"], d.get("ce_pct"), d["pe_pct"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def report(pred_layout: RoomLayout, gt_layout: RoomLayout, pred_ann: CornerAnnotation,
           gt_ann: CornerAnnotation, pred_classes, gt_classes) -> MetricsReport:
    try:
        ce = corner_error(pred_ann, gt_ann)
    except CornerCountMismatch:
        ce = None
    return MetricsReport(
        iou3d=iou_3d(pred_layout, gt_layout),
        iou2d=iou_2d(pred_layout, gt_layout),
        corner_error=ce,
        pixel_error=pixel_error(pred_classes, gt_classes),
    )


__all__ = [
    "CEILING", "WALL", "FLOOR", "CornerCountMismatch", "MetricsReport", "class_raster",
    "corner_error", "iou_2d", "iou_3d", "pixel_error", "polygon_intersection_area", "report",
]
