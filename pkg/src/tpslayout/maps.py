"""Paired edge/corner rasters and their PNG encoding."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

WORKING_SIZE = (1024, 512)

# edge-map channel order; R = wall-wall, G = wall-ceiling, B = wall-floor
WALL_WALL, WALL_CEILING, WALL_FLOOR = 0, 1, 2


@dataclass(frozen=True, eq=False)
class LayoutMaps:
    """RGB edge map ``(H, W, 3)`` and grey corner map ``(H, W)``, values in [0, 1]."""

    edge: np.ndarray
    corner: np.ndarray

    def __post_init__(self):
        edge = np.array(self.edge, dtype=np.float64)
        corner = np.array(self.corner, dtype=np.float64)
        if edge.ndim != 3 or edge.shape[2] != 3:
            raise ValueError(f"edge map must be (H, W, 3), got {edge.shape}")
        if corner.shape != edge.shape[:2]:
            raise ValueError(f"corner map {corner.shape} does not match edge map {edge.shape[:2]}")
        if not (np.all(np.isfinite(edge)) and np.all(np.isfinite(corner))):
            raise ValueError("map values must be finite")
        if edge.size and (edge.min() < 0 or edge.max() > 1 or corner.min() < 0 or corner.max() > 1):
            raise ValueError("map values must lie in [0, 1]")
        edge.flags.writeable = False
        corner.flags.writeable = False
        object.__setattr__(self, "edge", edge)
        object.__setattr__(self, "corner", corner)

    @property
    def width(self) -> int:
        return self.edge.shape[1]

    @property
    def height(self) -> int:
        return self.edge.shape[0]

    def stacked(self) -> np.ndarray:
        """(H, W, 4) array: edge channels followed by the corner channel."""
        return np.concatenate([self.edge, self.corner[:, :, None]], axis=2)

    @classmethod
    def from_stacked(cls, a: np.ndarray) -> "LayoutMaps":
        a = np.clip(a, 0.0, 1.0)
        return cls(a[:, :, :3], a[:, :, 3])

    def equals(self, other: "LayoutMaps") -> bool:
        return np.array_equal(self.edge, other.edge) and np.array_equal(self.corner, other.corner)

    def save(self, prefix) -> tuple[Path, Path]:
        """Write ``<prefix>.edge.png`` (RGB) and ``<prefix>.corner.png`` (grey)."""
        prefix = Path(prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        edge_path = Path(f"{prefix}.edge.png")
        corner_path = Path(f"{prefix}.corner.png")
        write_png(edge_path, self.edge)
        write_png(corner_path, self.corner)
        return edge_path, corner_path

    @classmethod
    def load(cls, prefix) -> "LayoutMaps":
        return cls(read_png(f"{prefix}.edge.png", channels=3), read_png(f"{prefix}.corner.png", channels=1))


def to_uint8(a: np.ndarray) -> np.ndarray:
    return np.round(np.clip(a, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_png(path, a: np.ndarray) -> None:
    # fixed compression level and no metadata chunks -> byte-identical reruns
    Image.fromarray(to_uint8(a)).save(path, format="PNG", compress_level=6, optimize=False)


def read_png(path, channels: int) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"missing raster: {path}")
    with Image.open(path) as im:
        im = im.convert("RGB" if channels == 3 else "L")
        return np.asarray(im, dtype=np.float64) / 255.0
