"""
Shape Renderer
Analytic shape masks, procedural textures and the 3x32x32 image atom
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Tuple

import numpy as np

from grad_core.rng import make_rng

from .errors import ConfigInvalid, DegenerateShape

logger = logging.getLogger(__name__)

IMAGE_SIZE = 32
CHANNELS = 3
BACKGROUND = 0.5
MIN_AREA = 0.05
MAX_AREA = 0.8

SHAPE_TAGS = ("circle", "square", "triangle", "cross", "ring", "diamond")
TEXTURE_TAGS = ("solid", "stripes", "checker", "noise", "gradient")

# Saturated colors keep texture contrast against the gray background.
PALETTE: Tuple[Tuple[float, float, float], ...] = (
    (0.9, 0.1, 0.1),
    (0.1, 0.75, 0.2),
    (0.15, 0.3, 0.95),
    (0.95, 0.85, 0.1),
    (0.85, 0.2, 0.8),
    (0.1, 0.85, 0.85),
)


@dataclass(frozen=True)
class ShapeClass:
    tag: str
    size: float
    offset: Tuple[int, int] = (0, 0)

    def __post_init__(self):
        if self.tag not in SHAPE_TAGS:
            raise ConfigInvalid(f"unknown shape tag: {self.tag}")
        if not 0.3 <= self.size <= 0.8:
            raise ConfigInvalid(f"shape size {self.size} outside [0.3, 0.8]")


@dataclass(frozen=True)
class TextureClass:
    tag: str
    color: Tuple[float, float, float] = PALETTE[0]
    frequency: float = 3.0

    def __post_init__(self):
        if self.tag not in TEXTURE_TAGS:
            raise ConfigInvalid(f"unknown texture tag: {self.tag}")
        if any(not 0.0 <= c <= 1.0 for c in self.color):
            raise ConfigInvalid(f"texture color {self.color} outside [0, 1]")
        if self.frequency <= 0:
            raise ConfigInvalid("texture frequency must be positive")


@dataclass(frozen=True)
class ShapeTextureImage:
    pixels: np.ndarray = field(repr=False)
    shape_label: str
    texture_label: str
    seed: int

    @property
    def flat(self) -> np.ndarray:
        return self.pixels.reshape(-1)


def _circle(x, y, L):
    return x * x + y * y <= (0.625 * L) ** 2


def _square(x, y, L):
    return (np.abs(x) <= L / 2) & (np.abs(y) <= L / 2)


def _triangle(x, y, L):
    # apex up, base = height = 1.2 L, centered on the bounding box
    h = 1.2 * L
    top, bottom = -h / 2, h / 2
    half_width = 0.5 * h * (y - top) / h
    return (y >= top) & (y <= bottom) & (np.abs(x) <= half_width)


def _cross(x, y, L):
    arm, thick = L / 2, 0.2 * L
    horizontal = (np.abs(x) <= arm) & (np.abs(y) <= thick)
    vertical = (np.abs(y) <= arm) & (np.abs(x) <= thick)
    return horizontal | vertical


def _ring(x, y, L):
    r2 = x * x + y * y
    return (r2 <= (0.6 * L) ** 2) & (r2 >= (0.36 * L) ** 2)


def _diamond(x, y, L):
    return np.abs(x) + np.abs(y) <= 0.6 * L


MASKS: Dict[str, Callable[[np.ndarray, np.ndarray, float], np.ndarray]] = {
    "circle": _circle,
    "square": _square,
    "triangle": _triangle,
    "cross": _cross,
    "ring": _ring,
    "diamond": _diamond,
}


def shape_mask(shape: ShapeClass, size: int = IMAGE_SIZE) -> np.ndarray:
    """Coverage in [0, 1] per pixel from 2x2 supersampling of the analytic mask"""
    cx = size / 2 + shape.offset[0]
    cy = size / 2 + shape.offset[1]
    sub = (np.arange(2 * size) + 0.5) / 2.0
    ys, xs = np.meshgrid(sub - cy, sub - cx, indexing="ij")
    inside = MASKS[shape.tag](xs, ys, shape.size * size).astype(np.float64)
    return inside.reshape(size, 2, size, 2).mean(axis=(1, 3))


def texture_field(texture: TextureClass, seed: int, size: int = IMAGE_SIZE) -> np.ndarray:
    """Color field (3, H, W) sampled at pixel centers"""
    centers = (np.arange(size) + 0.5) / size
    v, u = np.meshgrid(centers, centers, indexing="ij")
    f = texture.frequency
    if texture.tag == "solid":
        intensity = np.ones((size, size))
    elif texture.tag == "stripes":
        intensity = np.where(np.floor(2 * f * u) % 2 == 0, 1.0, 0.3)
    elif texture.tag == "checker":
        intensity = np.where((np.floor(2 * f * u) + np.floor(2 * f * v)) % 2 == 0, 1.0, 0.3)
    elif texture.tag == "noise":
        intensity = 0.35 + 0.65 * make_rng(seed, "noise").random((size, size))
    else:
        intensity = 0.3 + 0.7 * u
    color = np.asarray(texture.color, dtype=np.float64).reshape(CHANNELS, 1, 1)
    return color * intensity[None, :, :]


def render_image(shape: ShapeClass, texture: TextureClass, seed: int) -> ShapeTextureImage:
    """Composite the textured mask over gray; raises DegenerateShape if the area is out of bounds"""
    mask = shape_mask(shape)
    area = float(mask.mean())
    if not MIN_AREA <= area <= MAX_AREA:
        raise DegenerateShape(f"{shape.tag} mask covers {area:.3f} of the image", area)

    pixels = mask[None] * texture_field(texture, seed) + (1.0 - mask[None]) * BACKGROUND
    # float32 quantization so STLB round trips are exact
    pixels = np.clip(pixels, 0.0, 1.0).astype(np.float32).astype(np.float64)
    return ShapeTextureImage(pixels=pixels, shape_label=shape.tag, texture_label=texture.tag, seed=int(seed))
