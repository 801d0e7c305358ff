"""PSNR and multi-scale SSIM between original and compressed images."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import QfSelectError, ShapeMismatchError
from .kernels import filter_valid

# canonical five-scale weights, normalized to sum exactly 1 (the published
# constants add up to 1.0001)
_RAW_WEIGHTS = np.array([0.0448, 0.2856, 0.3001, 0.2363, 0.1333], np.float64)
DEFAULT_SCALE_WEIGHTS = tuple(_RAW_WEIGHTS / _RAW_WEIGHTS.sum())


@dataclass(frozen=True)
class MsSsimParams:
    scale_weights: tuple = DEFAULT_SCALE_WEIGHTS
    window_size: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0

    def __post_init__(self):
        w = np.asarray(self.scale_weights, np.float64)
        if w.size == 0 or (w <= 0).any():
            raise QfSelectError("scale weights must be positive")
        if abs(float(w.sum()) - 1.0) > 1e-9:
            raise QfSelectError("scale weights must sum to 1")


DEFAULT_MSSSIM_PARAMS = MsSsimParams()


def luminance(img: np.ndarray) -> np.ndarray:
    """BT.601 luma as float64; 2-D inputs pass through as already-luma."""
    if img.ndim == 2:
        return img.astype(np.float64)
    rgb = img.astype(np.float64)
    return 0.299 * rgb[:, :, 0] + 0.587 * rgb[:, :, 1] + 0.114 * rgb[:, :, 2]


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB over all channels; inf when equal."""
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    diff = a.astype(np.float64) - b.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(255.0 * 255.0 / mse)


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _ssim_cs_means(x: np.ndarray, y: np.ndarray, p: MsSsimParams):
    """Mean structural-similarity and contrast-structure over the valid map."""
    kern = _gaussian_kernel(p.window_size, p.sigma)
    c1 = (p.k1 * p.dynamic_range) ** 2
    c2 = (p.k2 * p.dynamic_range) ** 2
    mu_x = filter_valid(x, kern)
    mu_y = filter_valid(y, kern)
    mu_xx = mu_x * mu_x
    mu_yy = mu_y * mu_y
    mu_xy = mu_x * mu_y
    var_x = filter_valid(x * x, kern) - mu_xx
    var_y = filter_valid(y * y, kern) - mu_yy
    cov = filter_valid(x * y, kern) - mu_xy
    cs_map = (2.0 * cov + c2) / (var_x + var_y + c2)
    lum_map = (2.0 * mu_xy + c1) / (mu_xx + mu_yy + c1)
    return float(np.mean(lum_map * cs_map)), float(np.mean(cs_map))


def _downsample_2x2(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    img = img[: h - h % 2, : w - w % 2]
    return img.reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))


def reachable_scales(height: int, width: int, p: MsSsimParams = DEFAULT_MSSSIM_PARAMS) -> int:
    """Number of dyadic scales whose pooled image still fits the window."""
    n = 0
    h, w = height, width
    while n < len(p.scale_weights) and min(h, w) >= p.window_size:
        n += 1
        h //= 2
        w //= 2
    return n


def ms_ssim(a: np.ndarray, b: np.ndarray, p: MsSsimParams = DEFAULT_MSSSIM_PARAMS) -> float:
    """Multi-scale SSIM on the luminance plane.

    Contrast-structure terms are taken at every reachable scale and the
    luminance term at the coarsest one; scales the image is too small for
    are dropped and the remaining weights renormalized to sum 1.
    """
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    x = luminance(a)
    y = luminance(b)
    h, w = x.shape
    if min(h, w) < p.window_size:
        raise QfSelectError(
            f"image {h}x{w} smaller than the {p.window_size}x{p.window_size} window"
        )
    nscales = reachable_scales(h, w, p)
    weights = np.asarray(p.scale_weights[:nscales], np.float64)
    weights = weights / weights.sum()
    value = 1.0
    for s in range(nscales):
        ssim_mean, cs_mean = _ssim_cs_means(x, y, p)
        if s == nscales - 1:
            value *= max(ssim_mean, 0.0) ** weights[s]
        else:
            value *= max(cs_mean, 0.0) ** weights[s]
            x = _downsample_2x2(x)
            y = _downsample_2x2(y)
    return float(value)
