"""Deterministic synthetic dataset: rectangles with class-specific spectra.

Each foreground class k carries a Gaussian reflectance bump centered at
band round(k * bands / num_classes) with amplitude 1; background is flat
0.1.  Pixel spectra add N(0, 0.05) noise, which keeps the classes linearly
separable in band space.  RGB colors are a fixed palette quantized to
1/255 steps so a PPM round trip is lossless.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .formats import HyperCube, LabelMask
from .tensor import Tensor

NOISE_SIGMA = 0.05
BACKGROUND_LEVEL = 0.1


def class_signature(k: int, bands: int, num_classes: int) -> np.ndarray:
    """Noise-free spectrum of class k; argmax sits at round(k*bands/K)."""
    if k == 0:
        return np.full(bands, BACKGROUND_LEVEL)
    center = round(k * bands / num_classes)
    center = min(center, bands - 1)
    width = max(1.0, bands / (3.0 * num_classes))
    axis = np.arange(bands, dtype=np.float64)
    return np.exp(-0.5 * ((axis - center) / width) ** 2)


def class_color(k: int) -> np.ndarray:
    """Fixed per-class RGB in [0, 1], quantized to 255 levels."""
    if k == 0:
        levels = np.array([26, 26, 26])
    else:
        levels = np.array([(k * 97) % 200 + 30, (k * 151) % 200 + 30,
                           (k * 211) % 200 + 30])
    return levels / 255.0


def generate_synthetic_dataset(seed: int, count: int, height: int, width: int,
                               bands: int, num_classes: int
                               ) -> list[tuple[HyperCube, Tensor, LabelMask]]:
    if num_classes < 2:
        raise ConfigError(f"num_classes must be >= 2, got {num_classes}")
    if height < 8 or width < 8:
        raise ConfigError(f"extents must be >= 8, got {height}x{width}")
    if count < 1 or bands < 1:
        raise ConfigError(f"count {count} and bands {bands} must be >= 1")
    rng = np.random.default_rng(seed)
    signatures = np.stack([class_signature(k, bands, num_classes)
                           for k in range(num_classes)])
    colors = np.stack([class_color(k) for k in range(num_classes)])
    samples = []
    for index in range(count):
        mask = np.zeros((height, width), dtype=np.uint8)
        # Rect sides stay below the image extent, so covering both the top
        # and bottom rows would take two rects each; with at most 3 rects
        # the background always survives.  Corners and sides sit on the
        # even-pixel lattice, which keeps rectangle edges representable by
        # a stride-2 logit grid under bilinear upsampling.
        for rect in range(int(rng.integers(2, 4))):
            if rect == 0:
                # Cycle the first rectangle's class with the image index so
                # every class gets pixels in every pass over the dataset.
                cls = 1 + index % (num_classes - 1)
            else:
                cls = int(rng.integers(1, num_classes))
            rh = 2 * int(rng.integers(height // 6, height // 3 + 1))
            rw = 2 * int(rng.integers(width // 6, width // 3 + 1))
            top = 2 * int(rng.integers(0, (height - rh) // 2 + 1))
            left = 2 * int(rng.integers(0, (width - rw) // 2 + 1))
            mask[top:top + rh, left:left + rw] = cls
        spectra = signatures[mask]                      # [H, W, bands]
        noise = rng.normal(0.0, NOISE_SIGMA, size=spectra.shape)
        cube = HyperCube((spectra + noise).transpose(2, 0, 1).astype(np.float32))
        rgb = Tensor(colors[mask].transpose(2, 0, 1)[None])
        samples.append((cube, rgb, LabelMask(mask)))
    return samples
