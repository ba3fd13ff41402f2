"""Brute-force reference implementations used by the metric tests."""

import numpy as np
from matplotlib.path import Path as MplPath

from tpslayout import synth
from tpslayout.maps import LayoutMaps


def monte_carlo_area(a, b, n=1_000_000, seed=0):
    """Area of a ∩ b by uniform sampling of the joint bounding box."""
    pts = np.vstack([a, b])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    rng = np.random.default_rng(seed)
    s = rng.uniform(lo, hi, (n, 2))
    inside = MplPath(a).contains_points(s) & MplPath(b).contains_points(s)
    return inside.mean() * np.prod(hi - lo)


def _cell_masks(polys, res):
    pts = np.vstack(polys)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    if isinstance(res, int):
        xs = np.linspace(lo[0], hi[0], res, endpoint=False) + (hi[0] - lo[0]) / (2 * res)
        zs = np.linspace(lo[1], hi[1], res, endpoint=False) + (hi[1] - lo[1]) / (2 * res)
    else:  # metric cell size
        xs = np.arange(np.floor(lo[0] / res), np.ceil(hi[0] / res)) * res + res / 2
        zs = np.arange(np.floor(lo[1] / res), np.ceil(hi[1] / res)) * res + res / 2
    gx, gz = np.meshgrid(xs, zs)
    centres = np.column_stack([gx.ravel(), gz.ravel()])
    return [MplPath(p).contains_points(centres) for p in polys]


def raster_iou(a, b, res=2048):
    """Floor IoU on a res x res raster of the joint bounding box."""
    ma, mb = _cell_masks([a, b], res)
    return (ma & mb).sum() / (ma | mb).sum()


def voxel_iou(pa, pb, cell=0.01):
    """Volume IoU of two vertical prisms by counting cell^3 voxels.

    Columns are rasterized in the floor plane; in each column the voxel
    layers whose centres fall inside the prism's vertical interval are
    counted (the separable form of a full 3-D voxel scan).
    """
    ma, mb = _cell_masks([pa.floor_polygon, pb.floor_polygon], cell)

    def layers(room):
        lo, hi = -room.camera_height, room.ceiling_height - room.camera_height
        centres = (np.arange(np.floor(lo / cell) - 1, np.ceil(hi / cell) + 1) + 0.5) * cell
        return centres[(centres >= lo) & (centres < hi)]

    la, lb = layers(pa), layers(pb)
    both = np.intersect1d(np.floor(la / cell).astype(int), np.floor(lb / cell).astype(int)).size
    inter = (ma & mb).sum() * both
    union = ma.sum() * la.size + mb.sum() * lb.size - inter
    return inter / union


def random_manhattan_pairs(count, seed):
    spec = synth.CorpusSpec(count=2 * count, seed=seed, kind="manhattan", min_corners=4, max_corners=10)
    rooms = [synth.generate_layout(spec, i) for i in range(2 * count)]
    return list(zip(rooms[::2], rooms[1::2]))


def polygon_audit(poly, rectilinear=True):
    """Independent check: simple, optionally axis-parallel, strictly contains the origin."""
    p = np.asarray(poly, dtype=float)
    n = len(p)
    edges = [(p[i], p[(i + 1) % n]) for i in range(n)]
    if rectilinear and any(min(abs(b[0] - a[0]), abs(b[1] - a[1])) > 1e-9 for a, b in edges):
        return False

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def touch(a, b, c, d):
        d1, d2, d3, d4 = cross(c, d, a), cross(c, d, b), cross(a, b, c), cross(a, b, d)
        if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 and d2 and d3 and d4:
            return True
        for o, q, r, v in ((c, a, d, d1), (c, b, d, d2), (a, c, b, d3), (a, d, b, d4)):
            if v == 0 and min(o[0], r[0]) <= q[0] <= max(o[0], r[0]) and min(o[1], r[1]) <= q[1] <= max(o[1], r[1]):
                return True
        return False

    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            if touch(*edges[i], *edges[j]):
                return False
    return bool(MplPath(p).contains_point((0.0, 0.0)))


def smooth_random_maps(rng, width, height, terms=6):
    """Maps built from a few low-frequency waves, periodic in x, valued in [0, 1]."""
    x = (np.arange(width) + 0.5) / width
    y = (np.arange(height) + 0.5) / height
    gx, gy = np.meshgrid(x, y)
    chans = []
    for _ in range(4):
        f = np.zeros_like(gx)
        for _ in range(terms):
            kx, ky = rng.integers(1, 4), rng.uniform(0.5, 3)
            f += rng.uniform(0.2, 1) * np.sin(2 * np.pi * (kx * gx + ky * gy) + rng.uniform(0, 2 * np.pi))
        chans.append(0.5 + 0.45 * f / np.abs(f).max())
    stack = np.stack(chans, axis=-1)
    return LayoutMaps(stack[..., :3], stack[..., 3])
