"""Spectral dimensionality reduction and RGB fusion.

Each pixel's spectrum is one sample; PCA runs per image on the population
covariance (divisor n) and keeps the top three components ("Hyper3").  The
eigensolver is cyclic Jacobi, which is exact enough at these band counts
and has no external dependency.  Component signs follow the
largest-magnitude-coordinate-positive convention so results are stable
across runs and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .errors import ConfigError, ShapeError
from .formats import HyperCube
from .tensor import Tensor


def jacobi_eigh(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps until every off-diagonal magnitude drops below 1e-12 * trace or
    100 sweeps elapse.  Returns (eigenvalues, eigenvectors as columns) in
    descending eigenvalue order.
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"jacobi_eigh needs a square matrix, got {a.shape}")
    n = a.shape[0]
    v = np.eye(n)
    threshold = 1e-12 * abs(np.trace(a))
    for _ in range(100):
        off = np.abs(a - np.diag(np.diag(a))).max() if n > 1 else 0.0
        if off <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= threshold:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                # Smaller-angle root, computed stably for large theta.
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                v = v @ rot
    eigvals = np.diag(a).copy()
    order = np.argsort(-eigvals, kind="stable")
    return eigvals[order], v[:, order]


@dataclass
class PcaModel:
    mean: np.ndarray          # [bands]
    components: np.ndarray    # [n_components, bands], orthonormal rows
    eigenvalues: np.ndarray   # all band eigenvalues, descending
    variance_retained: float

    @property
    def bands(self) -> int:
        return self.mean.shape[0]

    @property
    def n_components(self) -> int:
        return self.components.shape[0]


def fit_pca(cube: HyperCube) -> PcaModel:
    """Fit the top three principal components over the cube's pixel spectra."""
    bands = cube.bands
    n_pixels = cube.height * cube.width
    if bands < 3:
        raise ConfigError(f"PCA band reduction needs at least 3 bands, got {bands}")
    if n_pixels < 2:
        raise ShapeError(f"PCA needs at least 2 pixels, got {n_pixels}")
    x = cube.data.reshape(bands, n_pixels).T.astype(np.float64)
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / n_pixels
    eigvals, eigvecs = jacobi_eigh(cov)
    eigvals = np.maximum(eigvals, 0.0)
    components = eigvecs[:, :3].T.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    total = eigvals.sum()
    retained = float(eigvals[:3].sum() / total) if total > 0 else 1.0
    return PcaModel(mean, components, eigvals, retained)


def project_hyper3(cube: HyperCube, model: PcaModel) -> Tensor:
    """Project to component scores and min-max each channel to [0, 1].

    A constant score channel (a component with no variance in this cube)
    normalizes to 0.5 rather than dividing by zero.
    """
    if model.bands != cube.bands:
        raise ShapeError(
            f"model has {model.bands} bands, cube has {cube.bands}")
    h, w = cube.height, cube.width
    x = cube.data.reshape(cube.bands, h * w).T.astype(np.float64)
    scores = (x - model.mean) @ model.components.T    # [n_pixels, 3]
    out = np.full((3, h, w), 0.5)
    for k in range(model.n_components):
        channel = scores[:, k].reshape(h, w)
        lo, hi = channel.min(), channel.max()
        out[k] = 0.5 if hi == lo else (channel - lo) / (hi - lo)
    return Tensor(out[None])


def fuse(rgb: Tensor, hyper3: Tensor) -> Tensor:
    """Concatenate RGB with Hyper3 resampled onto the RGB raster: 6 channels."""
    if rgb.ndim != 4 or rgb.shape[1] != 3:
        raise ShapeError(f"rgb must be [1, 3, H, W], got {rgb.shape}")
    if hyper3.ndim != 4 or hyper3.shape[1] != 3:
        raise ShapeError(f"hyper3 must be [1, 3, H, W], got {hyper3.shape}")
    aligned = ops.bilinear_resize(hyper3, rgb.shape[2], rgb.shape[3])
    return ops.concat_channels(rgb, aligned)


def fuse_sample(cube: HyperCube, rgb: Tensor) -> tuple[Tensor, PcaModel]:
    """The full data-fusion stage: fit, project, align, concatenate."""
    model = fit_pca(cube)
    return fuse(rgb, project_hyper3(cube, model)), model
