"""Shared image utilities: grayscale conversion, resampling, kernels.

These run once or twice per frame (not per pixel-neighborhood), so they stay
in portable numpy regardless of the selected kernel backend.
"""

from __future__ import annotations

import numpy as np


def gaussian_kernel(sigma: float, radius: int) -> np.ndarray:
    """Normalized 1D Gaussian sampled at integer offsets [-radius, radius]."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return k / k.sum()


def to_unit_gray(img: np.ndarray) -> np.ndarray:
    """Any uint8/float, gray or RGB image -> float64 grayscale in [0, 1]."""
    arr = np.asarray(img)
    if arr.ndim == 3:
        if arr.shape[2] not in (3, 4):
            raise ValueError(f"expected 3 or 4 channels, got {arr.shape[2]}")
        rgb = arr[..., :3].astype(np.float64)
        arr = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
        if np.issubdtype(np.asarray(img).dtype, np.integer):
            arr = arr / 255.0
        return arr
    if arr.ndim != 2:
        raise ValueError(f"expected a 2D or 3D image, got ndim={arr.ndim}")
    if np.issubdtype(arr.dtype, np.integer):
        return arr.astype(np.float64) / 255.0
    return arr.astype(np.float64)


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample with half-pixel-centered sample positions.

    Output position i maps to input coordinate (i + 0.5) * in/out - 0.5, so
    the operation commutes with horizontal mirroring (the sample grid is
    symmetric about the image center).
    """
    height, width = img.shape
    if (out_h, out_w) == (height, width):
        return img.astype(np.float64, copy=True)
    if out_h < 1 or out_w < 1:
        raise ValueError("output dimensions must be >= 1")

    def axis_coords(n_out: int, n_in: int):
        pos = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
        lo = np.floor(pos)
        frac = pos - lo
        lo = lo.astype(np.int64)
        lo0 = np.clip(lo, 0, n_in - 1)
        lo1 = np.clip(lo + 1, 0, n_in - 1)
        return lo0, lo1, frac

    y0, y1, fy = axis_coords(out_h, height)
    x0, x1, fx = axis_coords(out_w, width)
    img = np.ascontiguousarray(img, dtype=np.float64)
    top = img[y0][:, x0] * (1.0 - fx)[None, :] + img[y0][:, x1] * fx[None, :]
    bot = img[y1][:, x0] * (1.0 - fx)[None, :] + img[y1][:, x1] * fx[None, :]
    return top * (1.0 - fy)[:, None] + bot * fy[:, None]


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian low-pass with replicate edges (numpy path)."""
    from . import kernels_np

    radius = max(1, int(np.ceil(2.5 * sigma)))
    k = gaussian_kernel(sigma, radius)
    return kernels_np.correlate1d(kernels_np.correlate1d(img, k, 0), k, 1)
