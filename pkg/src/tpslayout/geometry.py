"""Planar polygon helpers: orientation, simplicity, ear clipping and convex clipping."""

from __future__ import annotations

import numpy as np

_EPS = 1e-12


def signed_area(poly) -> float:
    p = np.asarray(poly, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _on_segment(p, q, r) -> bool:
    return (min(p[0], r[0]) - _EPS <= q[0] <= max(p[0], r[0]) + _EPS
            and min(p[1], r[1]) - _EPS <= q[1] <= max(p[1], r[1]) + _EPS)


def segments_intersect(p1, p2, q1, q2) -> bool:
    """True if closed segments p1p2 and q1q2 share at least one point."""
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    if ((d1 > _EPS and d2 < -_EPS) or (d1 < -_EPS and d2 > _EPS)) and (
        (d3 > _EPS and d4 < -_EPS) or (d3 < -_EPS and d4 > _EPS)
    ):
        return True
    if abs(d1) <= _EPS and _on_segment(q1, p1, q2):
        return True
    if abs(d2) <= _EPS and _on_segment(q1, p2, q2):
        return True
    if abs(d3) <= _EPS and _on_segment(p1, q1, p2):
        return True
    if abs(d4) <= _EPS and _on_segment(p1, q2, p2):
        return True
    return False


def is_simple(poly) -> bool:
    """No repeated vertices, no zero-area polygon, and no two non-adjacent edges touching."""
    p = np.asarray(poly, dtype=float)
    n = len(p)
    if n < 3 or abs(signed_area(p)) <= _EPS:
        return False
    for i in range(n):
        if np.allclose(p[i], p[(i + 1) % n], atol=_EPS, rtol=0):
            return False
    for i in range(n):
        a1, a2 = p[i], p[(i + 1) % n]
        for j in range(i + 1, n):
            b1, b2 = p[j], p[(j + 1) % n]
            if j == i + 1:
                if _folds_back(a2, a1, b2):
                    return False
            elif i == 0 and j == n - 1:
                if _folds_back(a1, a2, b1):
                    return False
            elif segments_intersect(a1, a2, b1, b2):
                return False
    return True


def _folds_back(shared, u, v) -> bool:
    """Adjacent edges shared-u and shared-v overlap (collinear, same direction)."""
    return abs(_cross(shared, u, v)) <= _EPS and float(np.dot(u - shared, v - shared)) > 0


def point_in_polygon(pt, poly) -> bool:
    """Even-odd ray cast; points on the boundary may go either way."""
    x, y = float(pt[0]), float(pt[1])
    p = np.asarray(poly, dtype=float)
    inside = False
    n = len(p)
    for i in range(n):
        x1, y1 = p[i]
        x2, y2 = p[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xi = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xi > x:
                inside = not inside
    return inside


def distance_to_boundary(pt, poly) -> float:
    p = np.asarray(poly, dtype=float)
    q = np.asarray(pt, dtype=float)
    a = p
    b = np.roll(p, -1, axis=0)
    ab = b - a
    t = np.clip(np.einsum("ij,ij->i", q - a, ab) / np.einsum("ij,ij->i", ab, ab), 0.0, 1.0)
    closest = a + t[:, None] * ab
    return float(np.min(np.linalg.norm(closest - q, axis=1)))


def _in_triangle(pt, a, b, c) -> bool:
    return _cross(a, b, pt) >= -_EPS and _cross(b, c, pt) >= -_EPS and _cross(c, a, pt) >= -_EPS


def triangulate(poly) -> list[tuple[int, int, int]]:
    """Ear-clipping triangulation of a simple polygon; returns n-2 CCW index triples."""
    p = np.asarray(poly, dtype=float)
    idx = list(range(len(p)))
    if signed_area(p) < 0:
        idx.reverse()
    tris: list[tuple[int, int, int]] = []
    while len(idx) > 3:
        m = len(idx)
        for k in range(m):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % m]
            a, b, c = p[i0], p[i1], p[i2]
            if _cross(a, b, c) <= _EPS:
                continue
            if any(_in_triangle(p[j], a, b, c) for j in idx if j not in (i0, i1, i2)):
                continue
            tris.append((i0, i1, i2))
            idx.pop(k)
            break
        else:
            # only degenerate (collinear) ears remain: drop a flat vertex
            for k in range(m):
                if abs(_cross(p[idx[k - 1]], p[idx[k]], p[idx[(k + 1) % m]])) <= _EPS:
                    tris.append((idx[k - 1], idx[k], idx[(k + 1) % m]))
                    idx.pop(k)
                    break
            else:
                raise ValueError("ear clipping failed: polygon is not simple")
    tris.append((idx[0], idx[1], idx[2]))
    return tris


def clip_convex(subject, clip) -> np.ndarray:
    """Sutherland-Hodgman: ``subject`` clipped by the convex CCW polygon ``clip``."""
    out = [np.asarray(v, dtype=float) for v in subject]
    c = np.asarray(clip, dtype=float)
    for i in range(len(c)):
        if not out:
            break
        e1, e2 = c[i], c[(i + 1) % len(c)]
        inp = out
        out = []
        for j in range(len(inp)):
            cur, prev = inp[j], inp[j - 1]
            cur_in = _cross(e1, e2, cur) >= 0
            prev_in = _cross(e1, e2, prev) >= 0
            if cur_in:
                if not prev_in:
                    out.append(_line_hit(prev, cur, e1, e2))
                out.append(cur)
            elif prev_in:
                out.append(_line_hit(prev, cur, e1, e2))
    return np.array(out).reshape(-1, 2)


def _line_hit(p, q, e1, e2):
    dp = _cross(e1, e2, p)
    dq = _cross(e1, e2, q)
    t = dp / (dp - dq)
    return p + t * (q - p)


def intersection_area(a, b) -> float:
    """Area of the intersection of two simple polygons.

    Both are split into triangles; the pairwise triangle overlaps partition
    the intersection, so their clipped areas add up exactly.
    """
    pa = np.asarray(a, dtype=float)
    pb = np.asarray(b, dtype=float)
    ta = [pa[list(t)] for t in triangulate(pa)]
    tb = [pb[list(t)] for t in triangulate(pb)]
    total = 0.0
    for t1 in ta:
        lo1, hi1 = t1.min(axis=0), t1.max(axis=0)
        for t2 in tb:
            if np.any(t2.max(axis=0) < lo1) or np.any(t2.min(axis=0) > hi1):
                continue
            piece = clip_convex(t1, t2)
            if len(piece) >= 3:
                total += abs(signed_area(piece))
    return total
