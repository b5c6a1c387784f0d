"""Image quality metrics: RMSE, SSIM, entropy and UCIQE."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.ndimage import correlate1d
from skimage.color import rgb2lab

from .filters import gaussian_kernel
from .imgcore import ImageBuf, to_grayscale

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

UCIQE_WEIGHTS = (0.4680, 0.2745, 0.2576)
# Largest CIELab chroma reachable in sRGB (D65); attained by pure blue.
SRGB_MAX_CHROMA = 133.80416666129122

METRIC_ASSUMPTIONS = {
    "ssim": {"window": SSIM_WINDOW, "sigma": SSIM_SIGMA, "K1": SSIM_K1, "K2": SSIM_K2,
             "data_range": 1.0, "domain": "grayscale", "borders": "valid"},
    "uciqe": {"weights": list(UCIQE_WEIGHTS), "chroma_norm": SRGB_MAX_CHROMA,
              "contrast": "L 99th - 1st percentile / 100"},
    "rmse": {"scale": "0-255"},
    "entropy": {"bins": 256, "base": 2},
}


@dataclass
class QualityReport:
    rmse: float
    ssim: float
    entropy: float
    uciqe: float
    runtime_s: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _check_same(a: ImageBuf, b: ImageBuf) -> None:
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")


def rmse(a: ImageBuf, b: ImageBuf) -> float:
    """Root mean squared difference over all pixels and channels, 0-255 scale."""
    _check_same(a, b)
    diff = (a.to_array() - b.to_array()) * 255.0
    return float(np.sqrt(np.mean(diff * diff)))


def _valid_gaussian(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    half = k.size // 2
    y = correlate1d(x, k, axis=0, mode="nearest")[half:-half]
    return correlate1d(y, k, axis=1, mode="nearest")[:, half:-half]


def ssim_planes(x: np.ndarray, y: np.ndarray, data_range: float = 1.0) -> float:
    if x.shape != y.shape:
        raise ValueError(f"plane shapes differ: {x.shape} vs {y.shape}")
    if min(x.shape) < SSIM_WINDOW:
        raise ValueError(f"SSIM needs both dimensions >= {SSIM_WINDOW}, got {x.shape}")
    k = gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    mx = _valid_gaussian(x, k)
    my = _valid_gaussian(y, k)
    vx = _valid_gaussian(x * x, k) - mx * mx
    vy = _valid_gaussian(y * y, k) - my * my
    cxy = _valid_gaussian(x * y, k) - mx * my
    num = (2 * mx * my + c1) * (2 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(np.mean(num / den))


def ssim(a: ImageBuf, b: ImageBuf) -> float:
    """Mean SSIM of the grayscale pair (11x11 Gaussian window, sigma 1.5)."""
    _check_same(a, b)
    return ssim_planes(to_grayscale(a), to_grayscale(b))


def gray_levels(img: ImageBuf) -> np.ndarray:
    return np.floor(np.clip(to_grayscale(img), 0.0, 1.0) * 255.0 + 0.5).astype(np.intp)


def entropy(img: ImageBuf) -> float:
    """Shannon entropy in bits of the 256-level grayscale histogram."""
    counts = np.bincount(gray_levels(img).ravel(), minlength=256)
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log2(p)).sum())


def hsv_saturation(img: ImageBuf) -> np.ndarray:
    hi = np.maximum.reduce(img.planes)
    lo = np.minimum.reduce(img.planes)
    sat = np.zeros_like(hi)
    np.divide(hi - lo, hi, out=sat, where=hi > 0)
    return sat


def uciqe_terms(img: ImageBuf) -> tuple[float, float, float]:
    """Chroma spread, lightness contrast and mean saturation."""
    lab = rgb2lab(img.to_array())
    chroma = np.hypot(lab[..., 1], lab[..., 2]) / SRGB_MAX_CHROMA
    lo, hi = np.percentile(lab[..., 0], [1.0, 99.0])
    return float(chroma.std()), float(hi - lo) / 100.0, float(hsv_saturation(img).mean())


def uciqe(img: ImageBuf) -> float:
    sigma_c, con_l, mu_s = uciqe_terms(img)
    w_c, w_l, w_s = UCIQE_WEIGHTS
    return w_c * sigma_c + w_l * con_l + w_s * mu_s


def quality_report(output: ImageBuf, reference: ImageBuf,
                   runtime_s: dict[str, float] | None = None) -> QualityReport:
    """Full-reference metrics against ``reference``, no-reference metrics on ``output``."""
    return QualityReport(
        rmse=rmse(output, reference),
        ssim=ssim(output, reference),
        entropy=entropy(output),
        uciqe=uciqe(output),
        runtime_s=dict(runtime_s or {}),
    )
