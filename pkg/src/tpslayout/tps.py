"""Thin-plate-spline transform over a square lattice of control points.

All coordinates live in the normalized map square ``[0, 1] x [0, 1]`` with x
along the image width and y down the image height.  The transform maps an
OUTPUT location to the SOURCE location in the reference map that should be
sampled there (backward warping).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._accel import dispatch, njit

__all__ = [
    "ControlGrid",
    "SamplingGrid",
    "SingularSystemError",
    "TpsCoefficients",
    "bending_energy",
    "evaluate_map",
    "lattice",
    "make_sampling_grid",
    "map_jacobian_wrt_targets",
    "pixel_centers",
    "solve_coefficients",
    "solve_points",
    "tps_kernel",
]

# relative reciprocal condition number below which the TPS system is singular
_RCOND_MIN = 1e-13


class SingularSystemError(ValueError):
    """The TPS linear system has no unique solution (collinear or duplicate sources)."""


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=np.float64)
    out.flags.writeable = False
    return out


def lattice(n_side: int) -> np.ndarray:
    """Cell-centred ``n_side x n_side`` lattice; row-major, point (i, j) at ((j+.5)/n, (i+.5)/n)."""
    c = (np.arange(n_side, dtype=np.float64) + 0.5) / n_side
    yy, xx = np.meshgrid(c, c, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


@dataclass(frozen=True, eq=False)
class ControlGrid:
    """Source lattice and the (free) target positions of the TPS control points."""

    n_side: int
    source_points: np.ndarray
    target_points: np.ndarray

    def __post_init__(self):
        if int(self.n_side) != self.n_side or self.n_side < 3:
            raise ValueError(f"n_side must be an integer >= 3, got {self.n_side}")
        src = _frozen(self.source_points)
        tgt = _frozen(self.target_points)
        n = self.n_side**2
        if src.shape != (n, 2) or tgt.shape != (n, 2):
            raise ValueError(
                f"expected {n} source and target points, got {src.shape} and {tgt.shape}"
            )
        if np.max(np.abs(src - lattice(self.n_side))) > 1e-12:
            raise ValueError("source_points are not the cell-centred regular lattice")
        if not np.all(np.isfinite(tgt)):
            raise ValueError("target_points must be finite")
        object.__setattr__(self, "source_points", src)
        object.__setattr__(self, "target_points", tgt)

    @classmethod
    def identity(cls, n_side: int) -> "ControlGrid":
        src = lattice(n_side)
        return cls(n_side, src, src.copy())

    def with_targets(self, targets) -> "ControlGrid":
        return ControlGrid(self.n_side, self.source_points, targets)

    @property
    def n_points(self) -> int:
        return self.n_side**2

    def to_dict(self) -> dict:
        return {
            "n_side": self.n_side,
            "source_points": self.source_points.tolist(),
            "target_points": self.target_points.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ControlGrid":
        n = int(d["n_side"])
        src = d.get("source_points", lattice(n))
        return cls(n, np.asarray(src, dtype=float), np.asarray(d["target_points"], dtype=float))


@dataclass(frozen=True, eq=False)
class TpsCoefficients:
    """Affine part (2 x 3, rows are output x / y over (1, x, y)) and radial weights (N x 2)."""

    affine: np.ndarray
    weights: np.ndarray
    smoothing: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "affine", _frozen(self.affine))
        object.__setattr__(self, "weights", _frozen(self.weights))


@dataclass(frozen=True, eq=False)
class SamplingGrid:
    """Per output pixel, the normalized source coordinate to sample; ``coords`` is (height, width, 2)."""

    width: int
    height: int
    coords: np.ndarray

    def __post_init__(self):
        c = _frozen(self.coords)
        if c.shape != (self.height, self.width, 2):
            raise ValueError(f"coords shape {c.shape} != ({self.height}, {self.width}, 2)")
        object.__setattr__(self, "coords", c)

    @classmethod
    def identity(cls, width: int, height: int) -> "SamplingGrid":
        return cls(width, height, pixel_centers(width, height).reshape(height, width, 2))

    def shifted(self, dx: float = 0.0, dy: float = 0.0) -> "SamplingGrid":
        return SamplingGrid(self.width, self.height, self.coords + np.array([dx, dy]))


def pixel_centers(width: int, height: int) -> np.ndarray:
    """Normalized centres of all pixels, row-major, shape (height*width, 2)."""
    xs = (np.arange(width, dtype=np.float64) + 0.5) / width
    ys = (np.arange(height, dtype=np.float64) + 0.5) / height
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


def tps_kernel(r_sq):
    """U(r^2) = r^2 ln(r^2), with the limit value 0 at r = 0."""
    r_sq = np.asarray(r_sq, dtype=np.float64)
    if np.any(r_sq < 0):
        raise ValueError("tps_kernel needs r_sq >= 0")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(r_sq > 0, r_sq * np.log(np.where(r_sq > 0, r_sq, 1.0)), 0.0)
    return out if out.ndim else float(out)


# -- kernels -----------------------------------------------------------------


@njit
def _eval_nb(points, ctrl, affine, weights):
    m = points.shape[0]
    n = ctrl.shape[0]
    out = np.empty((m, 2))
    for p in range(m):
        x = points[p, 0]
        y = points[p, 1]
        ox = affine[0, 0] + affine[0, 1] * x + affine[0, 2] * y
        oy = affine[1, 0] + affine[1, 1] * x + affine[1, 2] * y
        for i in range(n):
            dx = x - ctrl[i, 0]
            dy = y - ctrl[i, 1]
            r2 = dx * dx + dy * dy
            u = r2 * np.log(r2) if r2 > 0.0 else 0.0
            ox += weights[i, 0] * u
            oy += weights[i, 1] * u
        out[p, 0] = ox
        out[p, 1] = oy
    return out


def _eval_np(points, ctrl, affine, weights):
    x = points[:, 0]
    y = points[:, 1]
    ox = affine[0, 0] + affine[0, 1] * x + affine[0, 2] * y
    oy = affine[1, 0] + affine[1, 1] * x + affine[1, 2] * y
    for i in range(ctrl.shape[0]):
        dx = x - ctrl[i, 0]
        dy = y - ctrl[i, 1]
        r2 = dx * dx + dy * dy
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.where(r2 > 0.0, r2 * np.log(r2), 0.0)
        ox = ox + weights[i, 0] * u
        oy = oy + weights[i, 1] * u
    return np.stack([ox, oy], axis=1)


@njit
def _radial_nb(points, ctrl):
    m = points.shape[0]
    n = ctrl.shape[0]
    out = np.empty((m, n))
    for p in range(m):
        for i in range(n):
            dx = points[p, 0] - ctrl[i, 0]
            dy = points[p, 1] - ctrl[i, 1]
            r2 = dx * dx + dy * dy
            out[p, i] = r2 * np.log(r2) if r2 > 0.0 else 0.0
    return out


def _radial_np(points, ctrl):
    d = points[:, None, :] - ctrl[None, :, :]
    r2 = d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r2 > 0.0, r2 * np.log(r2), 0.0)


_evaluate = dispatch(_eval_nb, _eval_np)
_radial = dispatch(_radial_nb, _radial_np)


# -- solving -----------------------------------------------------------------


def _system_matrix(source: np.ndarray, smoothing: float) -> np.ndarray:
    n = source.shape[0]
    L = np.zeros((n + 3, n + 3))
    L[:n, :n] = _radial(source, source) + smoothing * np.eye(n)
    L[:n, n] = 1.0
    L[:n, n + 1 :] = source
    L[n, :n] = 1.0
    L[n + 1 :, :n] = source.T
    return L


def _solve_system(L: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    s = np.linalg.svd(L, compute_uv=False)
    if s[-1] <= _RCOND_MIN * s[0]:
        raise SingularSystemError(
            "TPS system is singular: control points are collinear or duplicated"
        )
    return np.linalg.solve(L, rhs)


def solve_points(source, target, smoothing: float = 0.0) -> TpsCoefficients:
    """Regularized TPS fit mapping ``source`` points onto ``target`` points.

    Solves ``[[K + kI, P], [P^T, 0]] [w; a] = [t; 0]`` for both output
    dimensions at once.  ``k = 0`` interpolates; larger ``k`` pulls the map
    toward the least-squares affine fit.
    """
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if smoothing < 0:
        raise ValueError("smoothing must be non-negative")
    if source.ndim != 2 or source.shape[1] != 2 or source.shape != target.shape:
        raise ValueError("source and target must both be (N, 2)")
    n = source.shape[0]
    if n < 3:
        raise SingularSystemError("need at least 3 non-collinear control points")
    rhs = np.zeros((n + 3, 2))
    rhs[:n] = target
    sol = _solve_system(_system_matrix(source, smoothing), rhs)
    return TpsCoefficients(affine=sol[n:].T, weights=sol[:n], smoothing=float(smoothing))


def solve_coefficients(grid: ControlGrid, smoothing: float = 0.0) -> TpsCoefficients:
    return solve_points(grid.source_points, grid.target_points, smoothing)


def evaluate_map(coef: TpsCoefficients, grid: ControlGrid, points) -> np.ndarray:
    """T(q) = A (1, qx, qy)^T + sum_i w_i U(|q - p_i|^2) for each row of ``points``."""
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 2))
    return _evaluate(pts, grid.source_points, coef.affine, coef.weights)


def make_sampling_grid(
    coef: TpsCoefficients, grid: ControlGrid, width: int, height: int
) -> SamplingGrid:
    if width < 2 or height < 2:
        raise ValueError("sampling grid needs width, height >= 2")
    coords = evaluate_map(coef, grid, pixel_centers(width, height))
    return SamplingGrid(width, height, coords.reshape(height, width, 2))


def map_jacobian_wrt_targets(grid: ControlGrid, smoothing: float, query_points,
                             chunk: int = 65536) -> np.ndarray:
    """Basis matrix ``Phi`` (M x N) with ``T(q_m) = sum_i Phi[m, i] * t_i``.

    The TPS solve is linear in the targets, so ``Phi`` is also the Jacobian
    of every output coordinate with respect to the matching coordinate of
    each target point (the cross terms are zero).
    """
    src = grid.source_points
    n = src.shape[0]
    rhs = np.zeros((n + 3, n))
    rhs[:n] = np.eye(n)
    basis = _solve_system(_system_matrix(src, smoothing), rhs)  # (N+3) x N
    radial_part = basis[:n]
    affine_part = basis[n:]
    q = np.ascontiguousarray(np.asarray(query_points, dtype=np.float64).reshape(-1, 2))
    out = np.empty((q.shape[0], n))
    for start in range(0, q.shape[0], chunk):
        qs = q[start : start + chunk]
        out[start : start + chunk] = (
            _radial(qs, src) @ radial_part
            + affine_part[0]
            + qs[:, :1] * affine_part[1]
            + qs[:, 1:] * affine_part[2]
        )
    return out


def bending_energy(coef: TpsCoefficients, grid: ControlGrid) -> float:
    """w^T K w summed over both output dimensions."""
    K = _radial(grid.source_points, grid.source_points)
    w = coef.weights
    return float(np.sum(w * (K @ w)))
