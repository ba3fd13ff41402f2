"""Gradient-based fitting of TPS control points to a target layout.

The warped reference maps are compared to the target maps with a weighted
pair of Huber losses (edge map and corner map).  The gradient reaches the
control points through the bilinear sampler and the linear TPS basis, and
the displacements are updated with Adam plus decoupled weight decay.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from ._accel import dispatch, njit
from .maps import LayoutMaps
from .tps import ControlGrid, SamplingGrid, map_jacobian_wrt_targets, pixel_centers
from .warp import sample_coords

# (alpha, beta) pairs of the published loss-weight sweep
SWEEP_PAIRS = ((0.10, 0.90), (0.25, 0.75), (0.50, 0.50), (0.75, 0.25), (0.90, 0.10))


class DivergenceError(FloatingPointError):
    """The loss became non-finite during fitting."""


@dataclass(frozen=True)
class FitConfig:
    alpha: float = 0.75
    beta: float = 0.25
    delta: float = 1.0
    steps: int = 400
    step_size: float = 1e-2
    # cosine decay of the step size over the budget, down to step_size * final_step_ratio
    final_step_ratio: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4
    n_side: int = 4
    smoothing: float = 0.0
    pyramid: bool = True
    # per level: downsampling factor and blur sigma in pixels at 1024 wide
    pyramid_scales: tuple = (4, 2, 1)
    pyramid_sigmas: tuple = (16.0, 6.0, 2.0)
    # share of the step budget per level; empty means an even split
    pyramid_weights: tuple = ()
    wrap_x: bool = True
    loss_threshold: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ValueError("alpha and beta must be non-negative with alpha + beta > 0")
        for name in ("delta", "step_size", "eps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("moment decays must lie in [0, 1)")
        if self.weight_decay < 0 or self.smoothing < 0 or self.steps < 0:
            raise ValueError("weight_decay, smoothing and steps must be non-negative")
        if self.n_side < 3:
            raise ValueError("n_side must be at least 3")
        if len(self.pyramid_scales) != len(self.pyramid_sigmas) or not self.pyramid_scales:
            raise ValueError("pyramid_scales and pyramid_sigmas must be non-empty and equally long")
        object.__setattr__(self, "pyramid_scales", tuple(int(s) for s in self.pyramid_scales))
        object.__setattr__(self, "pyramid_sigmas", tuple(float(s) for s in self.pyramid_sigmas))
        object.__setattr__(self, "pyramid_weights", tuple(float(w) for w in self.pyramid_weights))
        if self.pyramid_weights and (len(self.pyramid_weights) != len(self.pyramid_scales)
                                     or min(self.pyramid_weights) < 0 or sum(self.pyramid_weights) <= 0):
            raise ValueError("pyramid_weights must be non-negative, one per level, with a positive sum")

    def replace(self, **changes) -> "FitConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["pyramid_scales"] = list(self.pyramid_scales)
        d["pyramid_sigmas"] = list(self.pyramid_sigmas)
        d["pyramid_weights"] = list(self.pyramid_weights)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FitConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown FitConfig keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "FitConfig":
        """Read a JSON or YAML file whose keys are FitConfig field names."""
        return cls.from_dict(load_mapping(path))


def load_mapping(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() in (".yaml", ".yml"):
        import yaml

        data = yaml.safe_load(text) or {}
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping at the top level")
    return data


@dataclass
class FitTrace:
    losses: list = field(default_factory=list)
    levels: list = field(default_factory=list)
    grid: ControlGrid | None = None
    warped: LayoutMaps | None = None
    initial_loss: float = math.nan
    final_loss: float = math.nan

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "loss"])
            for i, loss in enumerate(self.losses):
                w.writerow([i, repr(float(loss))])


def huber_loss(pred, gt, delta: float = 1.0):
    """Mean elementwise Huber loss and its gradient with respect to ``pred``."""
    p = np.asarray(pred, dtype=float)
    g = np.asarray(gt, dtype=float)
    if p.shape != g.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {g.shape}")
    e = p - g
    a = np.abs(e)
    per = np.where(a <= delta, 0.5 * e * e, delta * (a - 0.5 * delta))
    n = max(1, e.size)
    return float(per.sum() / n), np.clip(e, -delta, delta) / n


def combine_losses(l_edge: float, l_corner: float, alpha: float, beta: float) -> float:
    """Weighted sum of the edge and corner losses."""
    return alpha * l_edge + beta * l_corner


def overall_loss(pred: LayoutMaps, gt: LayoutMaps, cfg: FitConfig):
    """``alpha * L_edge + beta * L_corner`` with gradients for both predicted maps."""
    if pred.edge.shape != gt.edge.shape:
        raise ValueError(f"shape mismatch: {pred.edge.shape} vs {gt.edge.shape}")
    l_edge, g_edge = huber_loss(pred.edge, gt.edge, cfg.delta)
    l_corner, g_corner = huber_loss(pred.corner, gt.corner, cfg.delta)
    return combine_losses(l_edge, l_corner, cfg.alpha, cfg.beta), (cfg.alpha * g_edge, cfg.beta * g_corner)


def _blur(stack: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0:
        return stack
    return ndimage.gaussian_filter(stack, sigma=(sigma, sigma, 0), mode=("nearest", "wrap", "nearest"))


def _downsample(stack: np.ndarray, factor: int) -> np.ndarray:
    if factor == 1:
        return stack
    h, w, c = stack.shape
    if h % factor or w % factor:
        raise ValueError(f"map size {w}x{h} is not divisible by pyramid factor {factor}")
    return stack.reshape(h // factor, factor, w // factor, factor, c).mean(axis=(1, 3))


@njit
def _warp_huber_nb(src, px, py, target, weight, delta, wrap):
    h, w, c = src.shape
    m = px.shape[0]
    grad = np.zeros((m, 2))
    loss = 0.0
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
            val = ((1.0 - fx) * (1.0 - fy) * a + fx * (1.0 - fy) * b
                   + (1.0 - fx) * fy * cc + fx * fy * d)
            e = val - target[p, k]
            ae = abs(e)
            if ae <= delta:
                loss += weight[k] * 0.5 * e * e
                g = weight[k] * e
            else:
                loss += weight[k] * delta * (ae - 0.5 * delta)
                g = weight[k] * (delta if e > 0 else -delta)
            gx += g * ((1.0 - fy) * (b - a) + fy * (d - cc))
            gy += g * ((1.0 - fx) * (cc - a) + fx * (d - b))
        grad[p, 0] = gx * w
        grad[p, 1] = gy * h if active_y else 0.0
    return loss, grad


def _warp_huber_np(src, px, py, target, weight, delta, wrap):
    from .warp import _bilinear_grad_np, _bilinear_np

    warped = _bilinear_np(src, px, py, wrap)
    e = warped - target
    a = np.abs(e)
    per = np.where(a <= delta, 0.5 * e * e, delta * (a - 0.5 * delta))
    loss = float((per.sum(axis=0) * weight).sum())
    upstream = np.clip(e, -delta, delta) * weight
    return loss, _bilinear_grad_np(src, px, py, upstream, wrap)


_warp_huber = dispatch(_warp_huber_nb, _warp_huber_np)


class WarpObjective:
    """Overall loss of the warped reference as a function of the control-point targets."""

    def __init__(self, reference: np.ndarray, target: np.ndarray, grid: ControlGrid, cfg: FitConfig):
        if reference.shape != target.shape or reference.shape[2] != 4:
            raise ValueError("reference and target must be matching (H, W, 4) stacks")
        self.reference = np.ascontiguousarray(reference)
        self.target = np.ascontiguousarray(target.reshape(-1, 4))
        self.height, self.width = reference.shape[:2]
        self.cfg = cfg
        self.centers = pixel_centers(self.width, self.height)
        self.basis = map_jacobian_wrt_targets(grid, cfg.smoothing, self.centers)
        self.source = np.array(grid.source_points)
        m = self.width * self.height
        self.channel_weight = np.array([cfg.alpha / (3 * m)] * 3 + [cfg.beta / m])
        # per-channel loss: alpha * mean over the 3 edge channels + beta * mean over the corner channel

    def coords(self, targets: np.ndarray) -> np.ndarray:
        # displacement form: the identity warp lands exactly on pixel centres
        return self.centers + self.basis @ (targets - self.source)

    def warp(self, targets: np.ndarray) -> np.ndarray:
        return sample_coords(self.reference, self.coords(targets), self.cfg.wrap_x)

    def value_and_grad(self, targets: np.ndarray):
        coords = self.coords(targets)
        px = np.ascontiguousarray(coords[:, 0] * self.width - 0.5)
        py = np.ascontiguousarray(coords[:, 1] * self.height - 0.5)
        loss, g_coords = _warp_huber(self.reference, px, py, self.target, self.channel_weight,
                                     float(self.cfg.delta), bool(self.cfg.wrap_x))
        return float(loss), self.basis.T @ g_coords


def _levels(reference: LayoutMaps, target: LayoutMaps, cfg: FitConfig):
    ref = reference.stacked()
    tgt = target.stacked()
    if not cfg.pyramid:
        return [(ref, tgt)]
    out = []
    for factor, sigma in zip(cfg.pyramid_scales, cfg.pyramid_sigmas):
        s = sigma * reference.width / 1024 / factor
        out.append((_blur(_downsample(ref, factor), s), _blur(_downsample(tgt, factor), s)))
    return out


def _split_steps(total: int, weights) -> list[int]:
    """Integer shares of ``total`` proportional to ``weights`` (largest remainder, ties to earlier levels)."""
    w = np.asarray(weights, dtype=float)
    exact = total * w / w.sum()
    out = np.floor(exact).astype(int)
    order = sorted(range(len(w)), key=lambda i: (-(exact[i] - out[i]), i))
    for i in order[: total - int(out.sum())]:
        out[i] += 1
    return out.tolist()


def _anneal(i: int, total: int, floor: float) -> float:
    if total <= 1 or floor >= 1.0:
        return 1.0
    return floor + (1.0 - floor) * 0.5 * (1.0 + math.cos(math.pi * i / (total - 1)))


def fit_tps(reference: LayoutMaps, target: LayoutMaps, cfg: FitConfig | None = None,
            callback=None) -> FitTrace:
    """Optimize control-point targets so the warped reference matches ``target``.

    Starts from the identity warp.  With ``cfg.pyramid`` the budget is split
    evenly over coarse-to-fine levels of blurred, downsampled maps.  Raises
    :class:`DivergenceError` if the loss stops being finite.
    """
    cfg = cfg or FitConfig()
    if reference.edge.shape != target.edge.shape:
        raise ValueError("reference and target maps must share a resolution")
    grid = ControlGrid.identity(cfg.n_side)
    source = grid.source_points
    disp = np.zeros_like(source)
    m1 = np.zeros_like(source)
    m2 = np.zeros_like(source)
    trace = FitTrace()
    levels = _levels(reference, target, cfg)
    t = 0
    weights = cfg.pyramid_weights if cfg.pyramid and cfg.pyramid_weights else [1.0] * len(levels)
    for level, ((ref, tgt), steps) in enumerate(zip(levels, _split_steps(cfg.steps, weights))):
        objective = WarpObjective(ref, tgt, grid, cfg)
        for _ in range(steps):
            loss, g = objective.value_and_grad(source + disp)
            if not (math.isfinite(loss) and np.all(np.isfinite(g))):
                raise DivergenceError(f"non-finite loss at iteration {t}")
            trace.losses.append(loss)
            trace.levels.append(level)
            t += 1
            m1 = cfg.beta1 * m1 + (1 - cfg.beta1) * g
            m2 = cfg.beta2 * m2 + (1 - cfg.beta2) * g * g
            m_hat = m1 / (1 - cfg.beta1**t)
            v_hat = m2 / (1 - cfg.beta2**t)
            lr = cfg.step_size * _anneal(t - 1, cfg.steps, cfg.final_step_ratio)
            disp = disp - lr * (m_hat / (np.sqrt(v_hat) + cfg.eps) + cfg.weight_decay * disp)
            if callback is not None:
                callback(t, loss, source + disp)
    final = grid.with_targets(source + disp)
    trace.grid = final
    trace.warped = warp_maps(reference, final, cfg.smoothing, cfg.wrap_x)
    trace.initial_loss = overall_loss(reference, target, cfg)[0]
    trace.final_loss = overall_loss(trace.warped, target, cfg)[0]
    if not math.isfinite(trace.final_loss):
        raise DivergenceError("final loss is not finite")
    return trace


def sampling_grid(grid: ControlGrid, smoothing: float, width: int, height: int) -> SamplingGrid:
    centers = pixel_centers(width, height)
    basis = map_jacobian_wrt_targets(grid, smoothing, centers)
    coords = centers + basis @ (grid.target_points - grid.source_points)
    return SamplingGrid(width, height, coords.reshape(height, width, 2))


def warp_maps(maps: LayoutMaps, grid: ControlGrid, smoothing: float = 0.0, wrap_x: bool = True) -> LayoutMaps:
    """Backward-warp both maps of ``maps`` through the TPS defined by ``grid``."""
    sg = sampling_grid(grid, smoothing, maps.width, maps.height)
    out = sample_coords(maps.stacked(), sg.coords, wrap_x).reshape(maps.height, maps.width, 4)
    return LayoutMaps.from_stacked(out)


def objective_at(reference: LayoutMaps, target: LayoutMaps, grid: ControlGrid, cfg: FitConfig):
    """Full-resolution (loss, gradient w.r.t. targets) without pyramid smoothing."""
    obj = WarpObjective(reference.stacked(), target.stacked(), grid, cfg)
    return obj.value_and_grad(np.array(grid.target_points))
