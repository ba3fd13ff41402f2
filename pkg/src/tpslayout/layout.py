"""Room layouts, equirectangular projection, map rendering and reconstruction.

Camera frame: the camera sits at the origin, ``y`` points up, and the floor
plan lives in the ``x``-``z`` plane.  Longitude is ``atan2(x, z)`` (so ``+z``
projects to the image centre) and latitude is ``asin(y / |p|)``.  Pixel
coordinates are continuous with pixel ``j`` covering ``[j, j + 1)``:
``u = (lon + pi) / (2 pi) * W`` and ``v = (pi/2 - lat) / pi * H``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import geometry
from ._accel import dispatch, njit
from .maps import WALL_CEILING, WALL_FLOOR, WALL_WALL, LayoutMaps
from .postproc import binarize, connected_components

CAMERA_HEIGHT = 1.6
REFERENCE_WIDTH = 1024


class LayoutError(ValueError):
    """A layout violates its invariants or cannot be recovered from maps."""


class TooFewCornersError(LayoutError):
    pass


class UnpairedCornerError(LayoutError):
    pass


@dataclass(frozen=True, eq=False)
class RoomLayout:
    """Vertical-prism room: CCW floor polygon (metres, camera at origin) and heights."""

    floor_polygon: np.ndarray
    ceiling_height: float
    camera_height: float = CAMERA_HEIGHT
    manhattan: bool = False

    def __post_init__(self):
        poly = np.array(self.floor_polygon, dtype=np.float64)
        if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 4:
            raise LayoutError(f"floor polygon needs >= 4 (x, z) vertices, got shape {poly.shape}")
        if not np.all(np.isfinite(poly)):
            raise LayoutError("floor polygon has non-finite coordinates")
        if not 0 < self.camera_height < self.ceiling_height:
            raise LayoutError(
                f"need 0 < camera_height ({self.camera_height}) < ceiling_height ({self.ceiling_height})"
            )
        if not geometry.is_simple(poly):
            raise LayoutError("floor polygon is not simple")
        if geometry.signed_area(poly) <= 0:
            raise LayoutError("floor polygon must be counterclockwise in the x-z plane")
        if not geometry.point_in_polygon((0.0, 0.0), poly) or geometry.distance_to_boundary((0.0, 0.0), poly) < 1e-9:
            raise LayoutError("camera (origin) must lie strictly inside the floor polygon")
        if self.manhattan:
            d = np.roll(poly, -1, axis=0) - poly
            scale = max(1.0, float(np.abs(poly).max()))
            if np.any(np.minimum(np.abs(d[:, 0]), np.abs(d[:, 1])) > 1e-9 * scale):
                raise LayoutError("manhattan layout has a non axis-parallel wall")
        poly.flags.writeable = False
        object.__setattr__(self, "floor_polygon", poly)
        object.__setattr__(self, "ceiling_height", float(self.ceiling_height))
        object.__setattr__(self, "camera_height", float(self.camera_height))

    @property
    def n_corners(self) -> int:
        return len(self.floor_polygon)

    @property
    def floor_area(self) -> float:
        return geometry.signed_area(self.floor_polygon)

    @property
    def volume(self) -> float:
        return self.floor_area * self.ceiling_height

    def rotated(self, yaw: float) -> "RoomLayout":
        """Same room seen after turning the camera by ``-yaw`` (longitudes grow by ``yaw``)."""
        c, s = math.cos(yaw), math.sin(yaw)
        x, z = self.floor_polygon[:, 0], self.floor_polygon[:, 1]
        # lon = atan2(x, z) -> lon + yaw
        poly = np.stack([x * c + z * s, z * c - x * s], axis=1)
        return RoomLayout(poly, self.ceiling_height, self.camera_height, False)

    def translated(self, dx: float, dz: float) -> "RoomLayout":
        return RoomLayout(self.floor_polygon + np.array([dx, dz]), self.ceiling_height,
                          self.camera_height, self.manhattan)

    def to_dict(self) -> dict:
        return {
            "floor_polygon": self.floor_polygon.tolist(),
            "camera_height": self.camera_height,
            "ceiling_height": self.ceiling_height,
            "manhattan": bool(self.manhattan),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoomLayout":
        return cls(
            np.asarray(d["floor_polygon"], dtype=float),
            float(d["ceiling_height"]),
            float(d.get("camera_height", CAMERA_HEIGHT)),
            bool(d.get("manhattan", False)),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "RoomLayout":
        return cls.from_dict(json.loads(Path(path).read_text()))


def cuboid(width: float, depth: float, ceiling_height: float,
           camera_height: float = CAMERA_HEIGHT, center=(0.0, 0.0)) -> RoomLayout:
    """Axis-aligned box room; ``center`` is the room centre relative to the camera."""
    cx, cz = center
    hw, hd = width / 2.0, depth / 2.0
    poly = [(cx + hw, cz - hd), (cx + hw, cz + hd), (cx - hw, cz + hd), (cx - hw, cz - hd)]
    if geometry.signed_area(poly) < 0:
        poly.reverse()
    return RoomLayout(np.array(poly), ceiling_height, camera_height, True)


def canonical_room() -> RoomLayout:
    """4 m x 4 m x 3 m box, camera centred at 1.6 m; corners at longitudes +-45, +-135 deg."""
    return cuboid(4.0, 4.0, 3.0)


# -- projection ----------------------------------------------------------------


class SphericalPoint(NamedTuple):
    lon: float
    lat: float


def project(point3d) -> SphericalPoint:
    p = np.asarray(point3d, dtype=float)
    r = float(np.linalg.norm(p))
    if r == 0.0:
        raise ValueError("cannot project the camera centre")
    lon = math.atan2(p[0], p[2])
    if lon >= math.pi:
        lon -= 2 * math.pi
    return SphericalPoint(lon, math.asin(max(-1.0, min(1.0, p[1] / r))))


def pixel(point: SphericalPoint, width: int, height: int) -> tuple[float, float]:
    return ((point.lon + math.pi) / (2 * math.pi) * width,
            (math.pi / 2 - point.lat) / math.pi * height)


def xyz_to_pixel(xyz, width: int, height: int) -> np.ndarray:
    """Vectorized projection of (..., 3) points to continuous (u, v)."""
    p = np.asarray(xyz, dtype=float)
    lon = np.arctan2(p[..., 0], p[..., 2])
    lat = np.arctan2(p[..., 1], np.hypot(p[..., 0], p[..., 2]))
    u = (lon + np.pi) / (2 * np.pi) * width
    v = (np.pi / 2 - lat) / np.pi * height
    return np.stack([np.mod(u, width), v], axis=-1)


def pixel_to_lonlat(u, v, width: int, height: int):
    return (np.asarray(u) / width * 2 * np.pi - np.pi,
            np.pi / 2 - np.asarray(v) / height * np.pi)


def unproject_to_plane(u, v, width: int, height: int, normal, offset: float) -> np.ndarray:
    """Intersect the viewing ray through pixel (u, v) with the plane ``normal . p = offset``."""
    lon, lat = pixel_to_lonlat(u, v, width, height)
    ray = np.array([math.cos(lat) * math.sin(lon), math.sin(lat), math.cos(lat) * math.cos(lon)])
    denom = float(np.dot(normal, ray))
    if abs(denom) < 1e-15:
        raise ValueError("ray is parallel to the plane")
    return ray * (offset / denom)


@dataclass(frozen=True, eq=False)
class CornerAnnotation:
    """Corner columns ``[u, v_ceiling, v_floor]`` sorted by ``u`` (pixels at ``width x height``)."""

    columns: np.ndarray = field(repr=False)
    width: int = 1024
    height: int = 512

    def __post_init__(self):
        c = np.array(self.columns, dtype=float).reshape(-1, 3)
        if np.any(c[:, 1] < 0) or np.any(c[:, 1] >= c[:, 2]) or np.any(c[:, 2] >= self.height):
            raise LayoutError("corner columns need 0 <= v_ceiling < v_floor < height")
        c = c[np.argsort(c[:, 0], kind="stable")]
        c.flags.writeable = False
        object.__setattr__(self, "columns", c)

    def __len__(self) -> int:
        return len(self.columns)

    def points(self) -> np.ndarray:
        """(2K, 2) array: ceiling corners followed by floor corners."""
        c = self.columns
        return np.concatenate([c[:, [0, 1]], c[:, [0, 2]]])

    def to_dict(self) -> dict:
        return {"corners": self.columns.tolist(), "width": self.width, "height": self.height}

    @classmethod
    def from_dict(cls, d: dict) -> "CornerAnnotation":
        return cls(np.asarray(d["corners"], dtype=float), int(d.get("width", 1024)), int(d.get("height", 512)))


def corner_annotation(layout: RoomLayout, width: int = 1024, height: int = 512) -> CornerAnnotation:
    """Exact projected corner columns of ``layout``."""
    poly = layout.floor_polygon
    n = len(poly)
    y_ceil = layout.ceiling_height - layout.camera_height
    ceil = np.column_stack([poly[:, 0], np.full(n, y_ceil), poly[:, 1]])
    floor = np.column_stack([poly[:, 0], np.full(n, -layout.camera_height), poly[:, 1]])
    pc = xyz_to_pixel(ceil, width, height)
    pf = xyz_to_pixel(floor, width, height)
    return CornerAnnotation(np.column_stack([pf[:, 0], pc[:, 1], pf[:, 1]]), width, height)


# -- rendering -----------------------------------------------------------------


@dataclass(frozen=True)
class RenderStyle:
    """Stroke and blob sizes in pixels at a 1024-pixel-wide panorama (scaled with width)."""

    stroke_width: float = 5.0
    blob_sigma: float = 18.75
    max_step: float = 0.25

    def scaled(self, width: int) -> tuple[float, float]:
        s = width / REFERENCE_WIDTH
        return self.stroke_width * s, self.blob_sigma * s


@njit
def _stamp_nb(img, ch, us, vs, radius):
    h, w = img.shape[0], img.shape[1]
    r2 = radius * radius
    reach = int(np.ceil(radius)) + 1
    for s in range(us.shape[0]):
        u = us[s]
        v = vs[s]
        jc = int(np.floor(u))
        ic = int(np.floor(v))
        for di in range(-reach, reach + 1):
            i = ic + di
            if i < 0 or i >= h:
                continue
            dy = i + 0.5 - v
            for dj in range(-reach, reach + 1):
                j = jc + dj
                dx = j + 0.5 - u
                if dx * dx + dy * dy <= r2:
                    img[i, j % w, ch] = 1.0


def _stamp_np(img, ch, us, vs, radius):
    h, w = img.shape[:2]
    reach = int(np.ceil(radius)) + 1
    jc = np.floor(us).astype(np.int64)
    ic = np.floor(vs).astype(np.int64)
    for di in range(-reach, reach + 1):
        i = ic + di
        dy = i + 0.5 - vs
        for dj in range(-reach, reach + 1):
            j = jc + dj
            dx = j + 0.5 - us
            hit = (dx * dx + dy * dy <= radius * radius) & (i >= 0) & (i < h)
            img[i[hit], j[hit] % w, ch] = 1.0


_stamp = dispatch(_stamp_nb, _stamp_np)


def _wrapped_steps(uv: np.ndarray, width: int) -> float:
    d = np.diff(uv, axis=0)
    du = np.abs(d[:, 0])
    du = np.minimum(du, width - du)
    return float(np.max(np.hypot(du, d[:, 1]))) if len(d) else 0.0


def _sample_segment(a3, b3, width, height, max_step) -> np.ndarray:
    n = 64
    for _ in range(12):
        t = np.linspace(0.0, 1.0, n)[:, None]
        uv = xyz_to_pixel(a3 + t * (b3 - a3), width, height)
        step = _wrapped_steps(uv, width)
        if step <= max_step:
            return uv
        n = int(min(2_000_000, math.ceil(n * step / max_step) + 1))
    return uv


def render_maps(layout: RoomLayout, width: int = 1024, height: int = 512,
                style: RenderStyle | None = None) -> LayoutMaps:
    """Rasterize the edge map (R wall-wall, G wall-ceiling, B wall-floor) and the corner map.

    Boundaries are dense samples of the 3-D wall edges projected to pixels
    and stamped with a disc of the stroke width.  Each ceiling and floor
    corner becomes an isotropic Gaussian blob with peak 1; overlapping blobs
    combine by maximum.  Occlusion is not modelled.
    """
    style = style or RenderStyle()
    stroke, sigma = style.scaled(width)
    poly = layout.floor_polygon
    if len(poly) < 3 or abs(geometry.signed_area(poly)) < 1e-12:
        raise LayoutError("degenerate floor polygon")
    y_ceil = layout.ceiling_height - layout.camera_height
    y_floor = -layout.camera_height
    edge = np.zeros((height, width, 3))
    ann = corner_annotation(layout, width, height)

    n = len(poly)
    for i in range(n):
        (x0, z0), (x1, z1) = poly[i], poly[(i + 1) % n]
        for y, ch in ((y_ceil, WALL_CEILING), (y_floor, WALL_FLOOR)):
            uv = _sample_segment(np.array([x0, y, z0]), np.array([x1, y, z1]), width, height, style.max_step)
            _stamp(edge, ch, np.ascontiguousarray(uv[:, 0]), np.ascontiguousarray(uv[:, 1]), stroke / 2.0)
    for u, vc, vf in ann.columns:
        k = int(math.ceil((vf - vc) / style.max_step)) + 1
        vs = np.linspace(vc, vf, k)
        _stamp(edge, WALL_WALL, np.full(k, u), vs, stroke / 2.0)

    corner = np.zeros((height, width))
    reach = int(math.ceil(4 * sigma))
    for u, vc, vf in ann.columns:
        for v in (vc, vf):
            rows = np.arange(max(0, int(v) - reach), min(height, int(v) + reach + 1))
            cols = np.arange(int(u) - reach, int(u) + reach + 1)
            du = cols + 0.5 - u
            dv = rows + 0.5 - v
            blob = np.exp(-(dv[:, None] ** 2 + du[None, :] ** 2) / (2 * sigma * sigma))
            wc = cols % width
            corner[np.ix_(rows, wc)] = np.maximum(corner[np.ix_(rows, wc)], blob)
    return LayoutMaps(edge, corner)


def reference_layout(width: int = 1024, height: int = 512, style: RenderStyle | None = None) -> LayoutMaps:
    """Maps of the canonical room, the prior that every fit starts from."""
    return render_maps(canonical_room(), width, height, style)


# -- reconstruction ------------------------------------------------------------


def _refine_peak(values, rows, cols, fallback):
    """Sub-pixel maximum from a weighted quadratic fit to ``log(values)``.

    Exact for Gaussian blobs.  Returns ``fallback`` when the fit is not a
    proper maximum inside the component.
    """
    k = int(np.argmax(values))
    r0, c0 = rows[k], cols[k]
    dr = rows - r0
    dc = cols - c0
    A = np.column_stack([np.ones_like(dr), dc, dr, dc * dc, dc * dr, dr * dr])
    wts = values
    try:
        coef, *_ = np.linalg.lstsq(A * wts[:, None], np.log(values) * wts, rcond=None)
    except np.linalg.LinAlgError:
        return fallback
    hess = np.array([[2 * coef[3], coef[4]], [coef[4], 2 * coef[5]]])
    if not (hess[0, 0] < 0 and np.linalg.det(hess) > 0):
        return fallback
    off = np.linalg.solve(hess, -coef[1:3])
    if np.abs(off[0]) > np.ptp(dc) / 2 + 1 or np.abs(off[1]) > np.ptp(dr) / 2 + 1:
        return fallback
    return np.array([c0 + off[0] + 0.5, r0 + off[1] + 0.5])


def extract_corners(corner_map, threshold: float = 0.5, horizon: float | None = None):
    """Corner positions (continuous pixels) of the ceiling and floor blobs of a corner map."""
    cm = np.asarray(corner_map, dtype=float)
    h, w = cm.shape
    horizon = h / 2.0 if horizon is None else horizon
    comps = connected_components(binarize(cm, threshold), 8, True)
    ceiling, floor = [], []
    flat_labels = comps.labels.ravel()
    for k in range(comps.count):
        pix = np.flatnonzero(flat_labels == k + 1)
        rows, cols = np.divmod(pix, w)
        cols_unwrapped = (cols - comps.col_start[k]) % w + comps.col_start[k]
        vals = cm[rows, cols]
        centroid = np.array([
            np.average(cols_unwrapped, weights=vals) + 0.5,
            np.average(rows, weights=vals) + 0.5,
        ])
        if len(pix) >= 6:
            pos = _refine_peak(vals, rows.astype(float), cols_unwrapped.astype(float), centroid)
        else:
            pos = centroid
        pos = np.array([pos[0] % w, pos[1]])
        (ceiling if pos[1] < horizon else floor).append(pos)
    return np.array(ceiling).reshape(-1, 2), np.array(floor).reshape(-1, 2)


def _wrapped_du(a, b, width):
    d = np.abs(a - b) % width
    return np.minimum(d, width - d)


def pair_corners(ceiling, floor, width: int, height: int, tolerance: float = 10.0,
                 strict: bool = True, min_columns: int = 4) -> CornerAnnotation:
    """Match ceiling and floor corners sharing a column (within ``tolerance`` pixels at 1024 wide)."""
    tol = tolerance * width / REFERENCE_WIDTH
    if min(len(ceiling), len(floor)) < min_columns:
        raise TooFewCornersError(
            f"found {len(ceiling)} ceiling and {len(floor)} floor corners, need at least {min_columns} of each"
        )
    cand = []
    for i, c in enumerate(ceiling):
        for j, f in enumerate(floor):
            d = _wrapped_du(c[0], f[0], width)
            if d <= tol:
                cand.append((d, i, j))
    cand.sort()
    used_c, used_f, cols = set(), set(), []
    for d, i, j in cand:
        if i in used_c or j in used_f:
            continue
        used_c.add(i)
        used_f.add(j)
        uc, uf = ceiling[i][0], floor[j][0]
        # circular mean of the two column positions
        u = (uf + ((uc - uf + width / 2) % width - width / 2) / 2) % width
        cols.append((u, ceiling[i][1], floor[j][1]))
    if strict and (len(used_c) != len(ceiling) or len(used_f) != len(floor)):
        raise UnpairedCornerError(
            f"{len(ceiling) - len(used_c)} ceiling and {len(floor) - len(used_f)} floor corners unpaired"
        )
    if len(cols) < min_columns:
        raise TooFewCornersError(f"only {len(cols)} paired corner columns, need at least {min_columns}")
    return CornerAnnotation(np.array(cols), width, height)


def annotation_from_maps(maps: LayoutMaps, threshold: float = 0.5, pair_tolerance: float = 10.0,
                         strict: bool = True, min_columns: int = 4) -> CornerAnnotation:
    ceiling, floor = extract_corners(maps.corner, threshold)
    return pair_corners(ceiling, floor, maps.width, maps.height, pair_tolerance, strict, min_columns)


def complete_rectangle(ann: CornerAnnotation, camera_height: float = CAMERA_HEIGHT) -> CornerAnnotation:
    """Add the fourth corner of a rectangular room seen with three corner columns.

    The missing floor corner closes the parallelogram whose middle vertex is
    closest to a right angle among those that keep the camera inside.
    """
    if len(ann) != 3:
        raise TooFewCornersError(f"rectangle completion needs 3 corner columns, got {len(ann)}")
    c = ann.columns
    lon, lat_c = pixel_to_lonlat(c[:, 0], c[:, 1], ann.width, ann.height)
    _, lat_f = pixel_to_lonlat(c[:, 0], c[:, 2], ann.width, ann.height)
    if np.any(lat_f >= 0) or np.any(lat_c <= 0):
        raise LayoutError("floor corners must lie below and ceiling corners above the horizon")
    depth = camera_height / np.tan(-lat_f)
    y_ceil = float(np.mean(depth * np.tan(lat_c)))
    pts = np.column_stack([depth * np.sin(lon), depth * np.cos(lon)])
    best = None
    for b in range(3):
        a, m, d = pts[(b - 1) % 3], pts[b], pts[(b + 1) % 3]
        quad = np.array([a, m, d, a + d - m])
        if not _contains_origin(quad):
            continue
        u, v = a - m, d - m
        score = abs(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))
        if best is None or score < best[0]:
            best = (score, quad[3])
    if best is None:
        raise LayoutError("no rectangle through three corners contains the camera")
    x, z = best[1]
    uv = xyz_to_pixel(np.array([[x, y_ceil, z], [x, -camera_height, z]]), ann.width, ann.height)
    cols = np.vstack([c, [uv[1, 0], uv[0, 1], uv[1, 1]]])
    return CornerAnnotation(cols, ann.width, ann.height)


def _contains_origin(quad: np.ndarray) -> bool:
    edge = np.roll(quad, -1, axis=0) - quad
    # z component of edge x (origin - vertex) for every edge
    cross = edge[:, 1] * quad[:, 0] - edge[:, 0] * quad[:, 1]
    return bool(np.all(cross > 0) or np.all(cross < 0))


def layout_from_annotation(ann: CornerAnnotation, camera_height: float = CAMERA_HEIGHT) -> RoomLayout:
    """Floor vertices from floor-corner depth, ceiling height averaged over columns."""
    c = ann.columns
    lon, lat_c = pixel_to_lonlat(c[:, 0], c[:, 1], ann.width, ann.height)
    _, lat_f = pixel_to_lonlat(c[:, 0], c[:, 2], ann.width, ann.height)
    if np.any(lat_f >= 0) or np.any(lat_c <= 0):
        raise LayoutError("floor corners must lie below and ceiling corners above the horizon")
    depth = camera_height / np.tan(-lat_f)
    heights = camera_height + depth * np.tan(lat_c)
    poly = np.column_stack([depth * np.sin(lon), depth * np.cos(lon)])[::-1]
    return RoomLayout(poly, float(np.mean(heights)), camera_height, False)


def manhattan_regularize(room: RoomLayout, merge_tolerance: float = 0.25) -> RoomLayout:
    """Snap a recovered floor polygon to the room's two dominant wall axes.

    Each wall is assigned to the nearer axis and kept at its mean offset.
    Adjacent parallel walls closer than ``merge_tolerance`` metres merge into
    one; farther ones are joined by a perpendicular jog at their shared
    corner, which restores corners lost to merged blobs.  The original room is
    returned when the snapped polygon is not a valid layout.
    """
    poly = room.floor_polygon
    edge = np.roll(poly, -1, axis=0) - poly
    length = np.hypot(edge[:, 0], edge[:, 1])
    angle = np.arctan2(edge[:, 1], edge[:, 0])
    # dominant orientation: truncated least squares over a 0.1 degree grid, so a few
    # tilted walls cannot pull the axes away from the clean ones
    grid = np.deg2rad(np.arange(-45.0, 45.0, 0.1))
    resid = (angle[None, :] - grid[:, None] + np.pi / 4) % (np.pi / 2) - np.pi / 4
    cost = np.sum(length * np.minimum(resid**2, np.deg2rad(5.0) ** 2), axis=1)
    theta = grid[np.argmin(cost)]
    # refine on the walls that agree with the grid optimum
    near = np.abs(resid[np.argmin(cost)]) < np.deg2rad(5.0)
    theta += np.sum(length[near] * resid[np.argmin(cost)][near]) / np.sum(length[near])
    c, s = np.cos(theta), np.sin(theta)
    rot = poly @ np.array([[c, -s], [s, c]])
    walls = []  # (axis, offset, weight, start vertex, end vertex); axis 0 runs along x, 1 along z
    for i in range(len(rot)):
        a, b = rot[i], rot[(i + 1) % len(rot)]
        axis = 0 if abs(b[0] - a[0]) >= abs(b[1] - a[1]) else 1
        walls.append([axis, (a[1 - axis] + b[1 - axis]) / 2, length[i], a, b])
    merged = True
    while merged and len(walls) > 1:
        merged = False
        for i in range(len(walls)):
            p, q = walls[i], walls[(i + 1) % len(walls)]
            if p[0] == q[0] and abs(p[1] - q[1]) < merge_tolerance:
                w = p[2] + q[2]
                walls[i] = [p[0], (p[1] * p[2] + q[1] * q[2]) / w, w, p[3], q[4]]
                del walls[(i + 1) % len(walls)]
                merged = True
                break
    verts = []
    for i in range(len(walls)):
        p, q = walls[i], walls[(i + 1) % len(walls)]
        if p[0] != q[0]:
            verts.append(_axis_point(p[0], p[1], q[1]))
        else:
            # jog perpendicular to both walls at their shared corner
            at = p[4][p[0]]
            verts.append(_axis_point(p[0], p[1], at))
            verts.append(_axis_point(p[0], q[1], at))
    back = np.array(verts) @ np.array([[c, s], [-s, c]])
    try:
        return RoomLayout(back, room.ceiling_height, room.camera_height, False)
    except LayoutError:
        return room


def _axis_point(axis: int, offset: float, along: float) -> tuple[float, float]:
    """Point on a wall of ``axis`` at ``offset``, ``along`` its running coordinate."""
    return (along, offset) if axis == 0 else (offset, along)


def maps_to_layout(maps: LayoutMaps, camera_height: float = CAMERA_HEIGHT, threshold: float = 0.5,
                   pair_tolerance: float = 10.0, strict: bool = True) -> RoomLayout:
    """Recover a room from its corner map.

    Blob peaks above ``threshold`` are split into ceiling/floor by the
    horizon row and paired by column.  With ``strict=False`` unpaired blobs
    are dropped instead of raising :class:`UnpairedCornerError`.
    """
    ann = annotation_from_maps(maps, threshold, pair_tolerance, strict)
    return layout_from_annotation(ann, camera_height)


# -- mesh export ---------------------------------------------------------------


def mesh(layout: RoomLayout) -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    """Closed prism mesh, floor at y = 0; faces wound counterclockwise seen from outside."""
    poly = layout.floor_polygon
    n = len(poly)
    h = layout.ceiling_height
    verts = np.vstack([
        np.column_stack([poly[:, 0], np.zeros(n), poly[:, 1]]),
        np.column_stack([poly[:, 0], np.full(n, h), poly[:, 1]]),
    ])
    faces: list[tuple[int, int, int]] = []
    tris = geometry.triangulate(poly)
    faces += [(a, b, c) for a, b, c in tris]
    faces += [(a + n, c + n, b + n) for a, b, c in tris]
    for i in range(n):
        j = (i + 1) % n
        faces.append((i, j + n, j))
        faces.append((i, i + n, j + n))
    return verts, faces


def export_obj(layout: RoomLayout, path) -> Path:
    verts, faces = mesh(layout)
    lines = [f"v {x:.6f} {y:.6f} {z:.6f}" for x, y, z in verts]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in faces]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path
