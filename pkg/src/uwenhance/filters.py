"""Spatial kernels: windowed min/max, Gaussian blur, box mean, guided filter.

Every kernel pads borders by replicating the edge pixels.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d


def _extremum_axis(a: np.ndarray, r: int, op, axis: int) -> np.ndarray:
    # van Herk / Gil-Werman: prefix and suffix running extrema inside blocks of
    # width 2r+1, combined so each output needs one comparison.
    w = 2 * r + 1
    a = np.moveaxis(a, axis, -1)
    n = a.shape[-1]
    total = -(-(n + 2 * r) // w) * w
    pad = [(0, 0)] * (a.ndim - 1) + [(r, total - n - r)]
    p = np.pad(a, pad, mode="edge")
    blocks = p.reshape(p.shape[:-1] + (total // w, w))
    prefix = op.accumulate(blocks, axis=-1).reshape(p.shape)
    suffix = op.accumulate(blocks[..., ::-1], axis=-1)[..., ::-1].reshape(p.shape)
    out = op(suffix[..., :n], prefix[..., w - 1:w - 1 + n])
    return np.moveaxis(out, -1, axis)


def window_extremum(values: np.ndarray, radius: int, mode: str = "min") -> np.ndarray:
    """Min or max over the (2r+1) x (2r+1) window around each pixel."""
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    if mode not in ("min", "max"):
        raise ValueError(f"mode must be 'min' or 'max', got {mode!r}")
    values = np.asarray(values, dtype=np.float64)
    if radius == 0:
        return values.copy()
    op = np.minimum if mode == "min" else np.maximum
    return _extremum_axis(_extremum_axis(values, radius, op, 1), radius, op, 0)


def min_filter(values: np.ndarray, radius: int) -> np.ndarray:
    return window_extremum(values, radius, "min")


def max_filter(values: np.ndarray, radius: int) -> np.ndarray:
    return window_extremum(values, radius, "max")


def gaussian_kernel(kernel_size: int, sigma: float) -> np.ndarray:
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise ValueError(f"kernel_size must be odd and >= 1, got {kernel_size}")
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    x = np.arange(kernel_size) - kernel_size // 2
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(values: np.ndarray, kernel_size: int, sigma: float) -> np.ndarray:
    """Separable Gaussian convolution with a normalized ``kernel_size`` kernel."""
    k = gaussian_kernel(kernel_size, sigma)
    values = np.asarray(values, dtype=np.float64)
    tmp = correlate1d(values, k, axis=1, mode="nearest")
    return correlate1d(tmp, k, axis=0, mode="nearest")


def box_mean(values: np.ndarray, radius: int) -> np.ndarray:
    """Mean over the (2r+1)^2 window via an integral image."""
    values = np.asarray(values, dtype=np.float64)
    if radius == 0:
        return values.copy()
    h, w = values.shape
    side = 2 * radius + 1
    p = np.pad(values, radius, mode="edge")
    s = np.zeros((p.shape[0] + 1, p.shape[1] + 1))
    np.cumsum(np.cumsum(p, axis=0), axis=1, out=s[1:, 1:])
    total = s[side:side + h, side:side + w] - s[:h, side:side + w] - s[side:side + h, :w] + s[:h, :w]
    return total / (side * side)


def guided_filter(guide: np.ndarray, src: np.ndarray, radius: int = 16,
                  eps: float = 1e-3) -> np.ndarray:
    """Edge-preserving smoothing of ``src`` as a local linear function of ``guide``.

    Args:
        guide: guidance plane, same shape as ``src``.
        src: plane to filter.
        radius: window radius; windows are (2r+1) x (2r+1).
        eps: regularization added to the guide variance.

    Returns:
        The filtered plane ``mean(a) * guide + mean(b)``.
    """
    guide = np.asarray(guide, dtype=np.float64)
    src = np.asarray(src, dtype=np.float64)
    if guide.shape != src.shape:
        raise ValueError(f"guide shape {guide.shape} != input shape {src.shape}")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    mean_i = box_mean(guide, radius)
    mean_p = box_mean(src, radius)
    cov_ip = box_mean(guide * src, radius) - mean_i * mean_p
    var_i = box_mean(guide * guide, radius) - mean_i * mean_i
    a = cov_ip / (var_i + eps)
    b = mean_p - a * mean_i
    return box_mean(a, radius) * guide + box_mean(b, radius)
