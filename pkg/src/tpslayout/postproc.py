"""Corner-map post-processing for rooms with more corners than the reference.

A warped corner map can merge neighbouring corners into one wide blob.  Such
blobs are found by connected-component labeling of the binarized map; upper
(ceiling) blobs whose width is close to a multiple of the single-corner width
are cut into equal parts by thin zero bands, and the same column bands are
cleared in the floor half of the corner map and in the edge map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ._accel import dispatch, njit
from .maps import LayoutMaps

__all__ = ["ComponentSet", "binarize", "connected_components", "split_corners", "split_columns"]


def binarize(image, threshold: float = 0.5) -> np.ndarray:
    a = np.asarray(image, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("binarize expects a single-channel (H, W) map")
    return (a >= threshold).astype(np.uint8)


# -- labeling kernels ----------------------------------------------------------


@njit
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@njit
def _union(parent, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra < rb:
        parent[rb] = ra
    elif rb < ra:
        parent[ra] = rb


@njit
def _label_nb(binary, conn8, wrap):
    h, w = binary.shape
    labels = np.zeros((h, w), dtype=np.int64)
    parent = np.zeros(h * w // 2 + 2, dtype=np.int64)
    nxt = 1
    for i in range(h):
        for j in range(w):
            if binary[i, j] == 0:
                continue
            best = 0
            # already-visited neighbours: W, NW, N, NE
            for di, dj in ((0, -1), (-1, -1), (-1, 0), (-1, 1)):
                if not conn8 and di != 0 and dj != 0:
                    continue
                ii = i + di
                jj = j + dj
                if ii < 0 or jj < 0 or jj >= w:
                    continue
                lab = labels[ii, jj]
                if lab == 0:
                    continue
                if best == 0:
                    best = lab
                else:
                    _union(parent, best, lab)
            if best == 0:
                if nxt >= parent.shape[0]:
                    grown = np.zeros(parent.shape[0] * 2, dtype=np.int64)
                    grown[: parent.shape[0]] = parent
                    parent = grown
                parent[nxt] = nxt
                best = nxt
                nxt += 1
            labels[i, j] = best
    if wrap and w > 1:
        for i in range(h):
            a = labels[i, 0]
            if a == 0:
                continue
            for di in (-1, 0, 1):
                if not conn8 and di != 0:
                    continue
                ii = i + di
                if ii < 0 or ii >= h:
                    continue
                b = labels[ii, w - 1]
                if b != 0:
                    _union(parent, a, b)
    # resolve roots, then renumber by first appearance in raster order
    remap = np.zeros(nxt, dtype=np.int64)
    count = 0
    for i in range(h):
        for j in range(w):
            lab = labels[i, j]
            if lab == 0:
                continue
            r = _find(parent, lab)
            if remap[r] == 0:
                count += 1
                remap[r] = count
            labels[i, j] = remap[r]
    return labels


def _renumber(labels: np.ndarray) -> np.ndarray:
    flat = labels.ravel()
    ids, first = np.unique(flat, return_index=True)
    keep = ids != 0
    ids, first = ids[keep], first[keep]
    order = ids[np.argsort(first, kind="stable")]
    lut = np.zeros(int(flat.max()) + 1 if flat.size else 1, dtype=np.int64)
    lut[order] = np.arange(1, len(order) + 1)
    return lut[labels]


def _label_np(binary, conn8, wrap):
    structure = np.ones((3, 3), dtype=int) if conn8 else None
    labels, n = ndimage.label(binary, structure=structure)
    labels = labels.astype(np.int64)
    if wrap and n and binary.shape[1] > 1:
        parent = np.arange(n + 1)

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        left, right = labels[:, 0], labels[:, -1]
        shifts = (-1, 0, 1) if conn8 else (0,)
        h = binary.shape[0]
        for s in shifts:
            rows = np.arange(max(0, -s), min(h, h - s))
            a, b = left[rows], right[rows + s]
            for x, y in zip(a[(a > 0) & (b > 0)], b[(a > 0) & (b > 0)]):
                rx, ry = find(x), find(y)
                if rx != ry:
                    parent[max(rx, ry)] = min(rx, ry)
        roots = np.array([find(i) for i in range(n + 1)])
        labels = roots[labels]
    return _renumber(labels)


_label = dispatch(_label_nb, _label_np)


@dataclass(frozen=True, eq=False)
class ComponentSet:
    """Labeled components; per-component arrays are indexed by ``label - 1``.

    Column extents are circular when the labeling wrapped: ``col_start`` is
    the leftmost column and ``width`` the number of columns spanned.
    Centroids are continuous pixel positions (pixel centres at ``j + 0.5``).
    """

    labels: np.ndarray
    row_min: np.ndarray
    row_max: np.ndarray
    col_start: np.ndarray
    width: np.ndarray
    pixel_count: np.ndarray
    centroid: np.ndarray

    @property
    def count(self) -> int:
        return len(self.pixel_count)

    def columns(self, k: int) -> np.ndarray:
        """Column indices spanned by component ``k`` (0-based), left to right."""
        w = self.labels.shape[1]
        return (self.col_start[k] + np.arange(self.width[k])) % w


def _circular_extent(cols: np.ndarray, w: int, wrap: bool) -> tuple[int, int]:
    occupied = np.unique(cols)
    if not wrap or len(occupied) == w:
        return int(occupied[0]), int(occupied[-1] - occupied[0] + 1)
    # the largest run of empty columns (circularly) bounds the component
    gaps = np.diff(np.concatenate([occupied, [occupied[0] + w]]))
    k = int(np.argmax(gaps))
    start = int(occupied[(k + 1) % len(occupied)])
    return start, int(w - (gaps[k] - 1))


def connected_components(binary, connectivity: int = 8, wrap_x: bool = True) -> ComponentSet:
    """Two-pass union-find labeling; with ``wrap_x`` the first and last columns are adjacent."""
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    b = np.ascontiguousarray(np.asarray(binary) != 0, dtype=np.uint8)
    labels = _label(b, connectivity == 8, bool(wrap_x))
    h, w = b.shape
    n = int(labels.max()) if labels.size else 0
    row_min = np.zeros(n, dtype=np.int64)
    row_max = np.zeros(n, dtype=np.int64)
    col_start = np.zeros(n, dtype=np.int64)
    width = np.zeros(n, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    centroid = np.zeros((n, 2))
    if n:
        flat = labels.ravel()
        idx = np.flatnonzero(flat)
        order = idx[np.argsort(flat[idx], kind="stable")]
        bounds = np.searchsorted(flat[order], np.arange(1, n + 2))
        for k in range(n):
            pix = order[bounds[k] : bounds[k + 1]]
            rows, cols = np.divmod(pix, w)
            start, span = _circular_extent(cols, w, wrap_x)
            row_min[k], row_max[k] = rows.min(), rows.max()
            col_start[k], width[k] = start, span
            counts[k] = len(pix)
            unwrapped = (cols - start) % w + start if wrap_x else cols
            centroid[k] = ((unwrapped.mean() + 0.5) % w, rows.mean() + 0.5)
    return ComponentSet(labels, row_min, row_max, col_start, width, counts, centroid)


def split_columns(col_start: int, w: int, parts: int, separator: int) -> np.ndarray:
    """Column offsets (relative to ``col_start``) of the zero bands cutting ``w`` into ``parts``."""
    usable = w - (parts - 1) * separator
    base, extra = divmod(usable, parts)
    gaps = []
    pos = 0
    for p in range(parts - 1):
        pos += base + (1 if p < extra else 0)
        gaps.extend(range(pos, pos + separator))
        pos += separator
    return col_start + np.asarray(gaps, dtype=np.int64)


def split_corners(
    maps: LayoutMaps,
    unit_width: int = 75,
    separator: int = 5,
    horizon_row: float | None = None,
    tolerance: float = 25.0,
    threshold: float = 0.5,
    wrap_x: bool = True,
) -> LayoutMaps:
    """Cut merged upper corners into ``m`` parts and mirror the cuts below and in the edge map.

    An upper component of width ``w`` is split when ``m = round(w / unit_width)``
    is at least 2 and ``|w - m * unit_width| <= tolerance``.  Parts are equal
    up to one pixel (remainder columns go to the leftmost parts) and are
    separated by ``separator`` zeroed columns.  Columns outside the bands are
    left untouched.
    """
    if unit_width <= 0 or separator < 0:
        raise ValueError("unit_width must be positive and separator non-negative")
    horizon = maps.height / 2.0 if horizon_row is None else float(horizon_row)
    comps = connected_components(binarize(maps.corner, threshold), 8, wrap_x)
    cut = []
    for k in range(comps.count):
        if comps.centroid[k, 1] >= horizon:
            continue
        w = int(comps.width[k])
        m = int(np.floor(w / unit_width + 0.5))
        if m < 2 or abs(w - m * unit_width) > tolerance:
            continue
        if w - (m - 1) * separator < m:
            continue
        cut.append(split_columns(int(comps.col_start[k]), w, m, separator))
    if not cut:
        return maps
    cols = np.unique(np.concatenate(cut) % maps.width) if wrap_x else np.unique(np.concatenate(cut))
    cols = cols[(cols >= 0) & (cols < maps.width)]
    corner = maps.corner.copy()
    edge = maps.edge.copy()
    corner[:, cols] = 0.0
    edge[:, cols, :] = 0.0
    return LayoutMaps(edge, corner)
