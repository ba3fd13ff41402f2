"""Seeded synthetic rooms with rendered maps and corner annotations.

Cuboids are random boxes.  Manhattan rooms are boxes with rectangular
notches cut from some of their corners (each notch adds two corners).  The
camera is placed near the centre of the region from which every wall is
visible, so each corner projects to its own blob in the corner map.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .layout import CAMERA_HEIGHT, CornerAnnotation, RoomLayout, corner_annotation, render_maps
from .maps import WORKING_SIZE, LayoutMaps


class CorpusError(RuntimeError):
    """Rejection sampling ran out of attempts."""


@dataclass(frozen=True)
class CorpusSpec:
    count: int = 10
    seed: int = 0
    kind: str = "cuboid"
    min_corners: int = 4
    max_corners: int = 4
    width_range: tuple = (2.0, 8.0)
    depth_range: tuple = (2.0, 8.0)
    ceiling_range: tuple = (2.4, 3.5)
    camera_jitter: float = 1.0
    wall_clearance: float = 0.5
    camera_height: float = CAMERA_HEIGHT
    # smallest longitude gap between corners, in pixels at 1024 wide
    min_corner_separation: float = 50.0
    resolution: tuple = WORKING_SIZE
    max_attempts: int = 1000

    def __post_init__(self):
        if self.kind not in ("cuboid", "manhattan"):
            raise ValueError(f"kind must be 'cuboid' or 'manhattan', got {self.kind!r}")
        if self.kind == "cuboid":
            object.__setattr__(self, "min_corners", 4)
            object.__setattr__(self, "max_corners", 4)
        lo, hi = self.min_corners, self.max_corners
        if lo % 2 or hi % 2 or not 4 <= lo <= hi <= 10:
            raise ValueError("corner counts must be even with 4 <= min_corners <= max_corners <= 10")
        for name in ("width_range", "depth_range", "ceiling_range"):
            a, b = getattr(self, name)
            if not 0 < a <= b:
                raise ValueError(f"{name} must be a non-empty positive interval")
            object.__setattr__(self, name, (float(a), float(b)))
        if self.ceiling_range[0] <= self.camera_height:
            raise ValueError("ceilings must be higher than the camera")
        if min(self.width_range[0], self.depth_range[0]) <= 2 * self.wall_clearance:
            raise ValueError("rooms must be wider than twice the wall clearance")
        if self.count < 0 or self.camera_jitter < 0 or self.wall_clearance <= 0:
            raise ValueError("count and camera_jitter must be non-negative, wall_clearance positive")
        object.__setattr__(self, "resolution", tuple(int(r) for r in self.resolution))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CorpusSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown CorpusSpec keys: {sorted(unknown)}")
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


@dataclass(frozen=True, eq=False)
class Sample:
    layout: RoomLayout
    maps: LayoutMaps
    annotation: CornerAnnotation


# corners of the box in CCW order (x-z plane): SE, NE, NW, SW
_BOX_SIGNS = ((1, -1), (1, 1), (-1, 1), (-1, -1))


def _notched_polygon(w: float, d: float, notches: dict) -> np.ndarray:
    """Box ``[-w/2, w/2] x [-d/2, d/2]`` with notch ``(sx, sz)`` cut at each listed corner index."""
    corners = [np.array([sx * w / 2, sz * d / 2]) for sx, sz in _BOX_SIGNS]
    pts = []
    for k, v in enumerate(corners):
        if k not in notches:
            pts.append(v)
            continue
        prev, nxt = corners[k - 1], corners[(k + 1) % 4]
        dir_in = (v - prev) / np.linalg.norm(v - prev)
        dir_out = (nxt - v) / np.linalg.norm(nxt - v)
        sx, sz = notches[k]
        s_in = sx if abs(dir_in[0]) > 0.5 else sz
        s_out = sx if abs(dir_out[0]) > 0.5 else sz
        p_in = v - dir_in * s_in
        pts += [p_in, p_in + dir_out * s_out, v + dir_out * s_out]
    return np.array(pts)


def _core(w: float, d: float, notches: dict):
    """Rectangle from which the whole notched box is visible: (xmin, xmax, zmin, zmax)."""
    xmin, xmax, zmin, zmax = -w / 2, w / 2, -d / 2, d / 2
    for k, (sx, sz) in notches.items():
        cx, cz = _BOX_SIGNS[k]
        if cx > 0:
            xmax = min(xmax, w / 2 - sx)
        else:
            xmin = max(xmin, -w / 2 + sx)
        if cz > 0:
            zmax = min(zmax, d / 2 - sz)
        else:
            zmin = max(zmin, -d / 2 + sz)
    return xmin, xmax, zmin, zmax


def _separation_ok(poly: np.ndarray, min_sep_px: float) -> bool:
    lon = np.sort(np.arctan2(poly[:, 0], poly[:, 1]))
    gaps = np.diff(np.concatenate([lon, [lon[0] + 2 * math.pi]]))
    return float(gaps.min()) / (2 * math.pi) * 1024 >= min_sep_px


# notch placements tried per room size before the size is redrawn
_TRIES_PER_SIZE = 50


def _sample_room(spec: CorpusSpec, rng: np.random.Generator) -> RoomLayout:
    w = rng.uniform(*spec.width_range)
    d = rng.uniform(*spec.depth_range)
    ceiling = rng.uniform(*spec.ceiling_range)
    n_corners = int(rng.choice(np.arange(spec.min_corners, spec.max_corners + 1, 2)))
    clear = spec.wall_clearance
    for attempt in range(spec.max_attempts):
        if attempt and attempt % _TRIES_PER_SIZE == 0:
            # narrow rooms cannot host three notches; those sizes get redrawn
            w = rng.uniform(*spec.width_range)
            d = rng.uniform(*spec.depth_range)
            ceiling = rng.uniform(*spec.ceiling_range)
        which = rng.choice(4, size=(n_corners - 4) // 2, replace=False)
        notches = {int(k): (rng.uniform(0.2, 0.45) * w, rng.uniform(0.2, 0.45) * d) for k in which}
        xmin, xmax, zmin, zmax = _core(w, d, notches)
        if xmax - xmin <= 2 * clear or zmax - zmin <= 2 * clear:
            continue
        poly = _notched_polygon(w, d, notches)
        centre = np.array([(xmin + xmax) / 2, (zmin + zmax) / 2])
        for k in range(20):
            if k < 19:
                r = spec.camera_jitter * math.sqrt(rng.uniform())
                phi = rng.uniform(0, 2 * math.pi)
                cam = centre + r * np.array([math.cos(phi), math.sin(phi)])
            else:
                cam = centre
            if not (xmin + clear <= cam[0] <= xmax - clear and zmin + clear <= cam[1] <= zmax - clear):
                continue
            local = poly - cam
            if _separation_ok(local, spec.min_corner_separation):
                return RoomLayout(local, ceiling, spec.camera_height, manhattan=True)
    raise CorpusError(f"no valid {n_corners}-corner room after {spec.max_attempts} attempts")


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream per sample, so output does not depend on generation order."""
    return np.random.default_rng([int(seed), int(index)])


def generate_layout(spec: CorpusSpec, index: int) -> RoomLayout:
    """Room ``index`` of the corpus without rendering its maps."""
    return _sample_room(spec, sample_rng(spec.seed, index))


def generate_one(spec: CorpusSpec, index: int) -> Sample:
    layout = generate_layout(spec, index)
    width, height = spec.resolution
    return Sample(layout, render_maps(layout, width, height), corner_annotation(layout, width, height))


def generate(spec: CorpusSpec) -> list[Sample]:
    return [generate_one(spec, i) for i in range(spec.count)]


def write_corpus(samples: list[Sample], spec: CorpusSpec, out_dir) -> Path:
    """Write ``NNNN.{edge,corner}.png``, ``NNNN.layout.json``, ``NNNN.corners.json`` and ``index.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, s in enumerate(samples):
        stem = f"{i:04d}"
        s.maps.save(out / stem)
        s.layout.save(out / f"{stem}.layout.json")
        (out / f"{stem}.corners.json").write_text(json.dumps(s.annotation.to_dict(), indent=2) + "\n")
        entries.append({
            "id": stem,
            "edge": f"{stem}.edge.png",
            "corner": f"{stem}.corner.png",
            "layout": f"{stem}.layout.json",
            "corners": f"{stem}.corners.json",
            "n_corners": s.layout.n_corners,
        })
    manifest = out / "index.json"
    manifest.write_text(json.dumps({"spec": spec.to_dict(), "entries": entries}, indent=2) + "\n")
    return manifest


def read_manifest(corpus_dir) -> dict:
    path = Path(corpus_dir) / "index.json"
    if not path.is_file():
        raise FileNotFoundError(f"missing corpus manifest: {path}")
    return json.loads(path.read_text())
