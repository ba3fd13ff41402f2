"""Bilinear resampling of raster maps through a sampling grid, and its gradient.

Rasters are float arrays shaped ``(H, W)`` (grey corner maps) or
``(H, W, C)`` (RGB edge maps) with values in [0, 1].  Normalized coordinate
(x, y) lands on continuous pixel position ``(x*W - 0.5, y*H - 0.5)``, so pixel
centres sit on integers.  With ``wrap_x`` the columns are cyclic (the left
and right panorama borders touch); rows are always clamped.
"""

from __future__ import annotations

import numpy as np

from ._accel import dispatch, njit
from .tps import SamplingGrid

__all__ = ["sample_bilinear", "sample_gradient", "sample_coords", "sample_coords_gradient"]


@njit
def _bilinear_nb(src, px, py, wrap):
    h, w, c = src.shape
    m = px.shape[0]
    out = np.zeros((m, c))
    for p in range(m):
        x = px[p]
        y = py[p]
        if y < 0.0:
            y = 0.0
        elif y > h - 1.0:
            y = h - 1.0
        y0 = int(np.floor(y))
        fy = y - y0
        y1 = y0 + 1 if y0 + 1 < h else h - 1
        xf = np.floor(x)
        fx = x - xf
        x0 = int(xf)
        x1 = x0 + 1
        w00 = (1.0 - fx) * (1.0 - fy)
        w01 = fx * (1.0 - fy)
        w10 = (1.0 - fx) * fy
        w11 = fx * fy
        if wrap:
            x0 = x0 % w
            x1 = x1 % w
            for k in range(c):
                out[p, k] = (w00 * src[y0, x0, k] + w01 * src[y0, x1, k]
                             + w10 * src[y1, x0, k] + w11 * src[y1, x1, k])
        else:
            in0 = 0 <= x0 < w
            in1 = 0 <= x1 < w
            for k in range(c):
                a = src[y0, x0, k] if in0 else 0.0
                b = src[y0, x1, k] if in1 else 0.0
                cc = src[y1, x0, k] if in0 else 0.0
                d = src[y1, x1, k] if in1 else 0.0
                out[p, k] = w00 * a + w01 * b + w10 * cc + w11 * d
    return out


@njit
def _bilinear_grad_nb(src, px, py, upstream, wrap):
    h, w, c = src.shape
    m = px.shape[0]
    grad = np.zeros((m, 2))
    for p in range(m):
        x = px[p]
        y = py[p]
        active_y = True
        if y < 0.0:
            y = 0.0
            active_y = False
        elif y > h - 1.0:
            y = h - 1.0
            active_y = False
        y0 = int(np.floor(y))
        fy = y - y0
        y1 = y0 + 1 if y0 + 1 < h else h - 1
        xf = np.floor(x)
        fx = x - xf
        x0 = int(xf)
        x1 = x0 + 1
        in0 = True
        in1 = True
        if wrap:
            x0 = x0 % w
            x1 = x1 % w
        else:
            in0 = 0 <= x0 < w
            in1 = 0 <= x1 < w
        gx = 0.0
        gy = 0.0
        for k in range(c):
            a = src[y0, x0, k] if in0 else 0.0
            b = src[y0, x1, k] if in1 else 0.0
            cc = src[y1, x0, k] if in0 else 0.0
            d = src[y1, x1, k] if in1 else 0.0
            g = upstream[p, k]
            gx += g * ((1.0 - fy) * (b - a) + fy * (d - cc))
            gy += g * ((1.0 - fx) * (cc - a) + fx * (d - b))
        grad[p, 0] = gx * w
        grad[p, 1] = gy * h if active_y else 0.0
    return grad


def _taps_np(src, px, py, wrap):
    h, w, _ = src.shape
    active_y = (py >= 0.0) & (py <= h - 1.0)
    y = np.clip(py, 0.0, h - 1.0)
    y0 = np.floor(y).astype(np.int64)
    fy = y - y0
    y1 = np.minimum(y0 + 1, h - 1)
    xf = np.floor(px)
    fx = px - xf
    x0 = xf.astype(np.int64)
    x1 = x0 + 1
    if wrap:
        x0 %= w
        x1 %= w
        a, b = src[y0, x0], src[y0, x1]
        cc, d = src[y1, x0], src[y1, x1]
    else:
        in0 = ((x0 >= 0) & (x0 < w))[:, None]
        in1 = ((x1 >= 0) & (x1 < w))[:, None]
        x0c = np.clip(x0, 0, w - 1)
        x1c = np.clip(x1, 0, w - 1)
        a = np.where(in0, src[y0, x0c], 0.0)
        b = np.where(in1, src[y0, x1c], 0.0)
        cc = np.where(in0, src[y1, x0c], 0.0)
        d = np.where(in1, src[y1, x1c], 0.0)
    return fx[:, None], fy[:, None], a, b, cc, d, active_y


def _bilinear_np(src, px, py, wrap):
    fx, fy, a, b, cc, d, _ = _taps_np(src, px, py, wrap)
    w00 = (1.0 - fx) * (1.0 - fy)
    w01 = fx * (1.0 - fy)
    w10 = (1.0 - fx) * fy
    w11 = fx * fy
    return w00 * a + w01 * b + w10 * cc + w11 * d


def _bilinear_grad_np(src, px, py, upstream, wrap):
    h, w, _ = src.shape
    fx, fy, a, b, cc, d, active_y = _taps_np(src, px, py, wrap)
    gx = (upstream * ((1.0 - fy) * (b - a) + fy * (d - cc))).sum(axis=1) * w
    gy = (upstream * ((1.0 - fx) * (cc - a) + fx * (d - b))).sum(axis=1) * h
    return np.stack([gx, np.where(active_y, gy, 0.0)], axis=1)


_bilinear = dispatch(_bilinear_nb, _bilinear_np)
_bilinear_grad = dispatch(_bilinear_grad_nb, _bilinear_grad_np)


def _as_hwc(src) -> tuple[np.ndarray, bool]:
    a = np.asarray(src, dtype=np.float64)
    if a.ndim == 2:
        return np.ascontiguousarray(a[:, :, None]), True
    if a.ndim == 3:
        return np.ascontiguousarray(a), False
    raise ValueError(f"raster must be (H, W) or (H, W, C), got shape {a.shape}")


def _pixel_positions(coords: np.ndarray, width: int, height: int):
    c = coords.reshape(-1, 2)
    return (np.ascontiguousarray(c[:, 0] * width - 0.5),
            np.ascontiguousarray(c[:, 1] * height - 0.5))


def sample_coords(src, coords, wrap_x: bool = True) -> np.ndarray:
    """Sample ``src`` at normalized ``coords`` of shape (M, 2); returns (M, C)."""
    s, _ = _as_hwc(src)
    if s.size == 0:
        raise ValueError("empty source raster")
    px, py = _pixel_positions(np.asarray(coords, dtype=np.float64), s.shape[1], s.shape[0])
    return _bilinear(s, px, py, bool(wrap_x))


def sample_coords_gradient(src, coords, upstream, wrap_x: bool = True) -> np.ndarray:
    """Gradient of ``sum(upstream * sample_coords(src, coords))`` w.r.t. coords, shape (M, 2)."""
    s, _ = _as_hwc(src)
    px, py = _pixel_positions(np.asarray(coords, dtype=np.float64), s.shape[1], s.shape[0])
    up = np.ascontiguousarray(np.asarray(upstream, dtype=np.float64).reshape(px.shape[0], -1))
    if up.shape[1] != s.shape[2]:
        raise ValueError("upstream channel count does not match the source raster")
    return _bilinear_grad(s, px, py, up, bool(wrap_x))


def sample_bilinear(src, grid: SamplingGrid, wrap_x: bool = True) -> np.ndarray:
    """Backward-warp ``src`` through ``grid``; output is (grid.height, grid.width[, C])."""
    s, squeeze = _as_hwc(src)
    out = sample_coords(s, grid.coords, wrap_x).reshape(grid.height, grid.width, s.shape[2])
    return out[:, :, 0] if squeeze else out


def sample_gradient(src, grid: SamplingGrid, upstream, wrap_x: bool = True) -> np.ndarray:
    """Per-pixel (d/dx, d/dy) of ``sum(upstream * sample_bilinear(src, grid))``.

    Derivatives are taken with respect to the normalized grid coordinates.  At
    integer pixel positions, where the bilinear surface has a kink, the
    right-hand limit is returned; clamped rows contribute no y-gradient.
    """
    s, _ = _as_hwc(src)
    up = np.asarray(upstream, dtype=np.float64)
    expected = (grid.height, grid.width)
    if up.shape[:2] != expected:
        raise ValueError(f"upstream shape {up.shape} does not match grid {expected}")
    g = sample_coords_gradient(s, grid.coords, up.reshape(grid.height * grid.width, -1), wrap_x)
    return g.reshape(grid.height, grid.width, 2)
