"""Background-light estimators.

The statistical estimator predicts each channel's background light from
trimmed channel statistics with fixed regression coefficients. The other
estimators (dark channel, maximum intensity, quad-tree, blurriness) are the
usual baselines and pick or blend colors found in the image.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass

import numpy as np
from skimage.morphology import reconstruction

from .filters import gaussian_blur, guided_filter, max_filter, min_filter
from .imgcore import ImageBuf, to_grayscale, trimmed_channel_stats

# Regression constants on the 0-255 scale.
GB_AVG_COEF = 1.13
GB_STD_COEF = 1.11
GB_OFFSET = -25.6
RED_CEIL = 140.0
RED_SCALE = 14.4
RED_RATE = -0.034
BL_MIN_255 = 5.0
BL_MAX_255 = 250.0
STATS_TRIM = 0.10

BLUR_RADIUS = 2  # 5x5 max filter on the initial blurriness map
BLUR_SCALES = 4
TOP_BLURRY_FRACTION = 0.001


class BlMethod(str, enum.Enum):
    STATISTICAL = "statistical"
    DCP = "dcp"
    UDCP = "udcp"
    MIP = "mip"
    QUADTREE = "quadtree"
    BLURRINESS = "blurriness"


@dataclass(frozen=True)
class BackgroundLight:
    """Global background light, one normalized value per channel."""

    r: float
    g: float
    b: float

    def __post_init__(self):
        for name in "rgb":
            v = getattr(self, name)
            if not (math.isfinite(v) and 0.0 <= v <= 1.0):
                raise ValueError(f"background light component {name}={v!r} outside [0, 1]")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.r, self.g, self.b)

    def to_255(self) -> tuple[int, int, int]:
        """Round-half-up integer levels."""
        return tuple(int(math.floor(v * 255.0 + 0.5)) for v in self.as_tuple())

    @classmethod
    def from_255(cls, r, g, b) -> "BackgroundLight":
        return cls(r / 255.0, g / 255.0, b / 255.0)

    @property
    def max(self) -> float:
        return max(self.as_tuple())


def _pixel_color(img: ImageBuf, flat_index: int) -> BackgroundLight:
    y, x = divmod(int(flat_index), img.width)
    return BackgroundLight(float(img.r[y, x]), float(img.g[y, x]), float(img.b[y, x]))


# ---------------------------------------------------------------------------
# Statistical model
# ---------------------------------------------------------------------------

def gb_model(avg: float, std: float) -> float:
    """Linear green/blue model, 0-255 scale, unclamped."""
    return GB_AVG_COEF * avg + GB_STD_COEF * std + GB_OFFSET


def red_model(med: float) -> float:
    """Logistic red model of the trimmed median, 0-255 scale, unclamped."""
    return RED_CEIL / (1.0 + RED_SCALE * math.exp(RED_RATE * med))


def clamp_bl_255(v: float) -> float:
    return min(max(v, BL_MIN_255), BL_MAX_255)


def estimate_bl_statistical(img: ImageBuf, trim: float = STATS_TRIM) -> BackgroundLight:
    r_stats = trimmed_channel_stats(img.r, trim)
    g_stats = trimmed_channel_stats(img.g, trim)
    b_stats = trimmed_channel_stats(img.b, trim)
    r = clamp_bl_255(red_model(r_stats.med))
    g = clamp_bl_255(gb_model(g_stats.avg, g_stats.std))
    b = clamp_bl_255(gb_model(b_stats.avg, b_stats.std))
    return BackgroundLight(r / 255.0, g / 255.0, b / 255.0)


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

def dark_channel(img: ImageBuf, radius: int = 4, gb_only: bool = False) -> np.ndarray:
    lowest = np.minimum(img.g, img.b)
    if not gb_only:
        lowest = np.minimum(lowest, img.r)
    return min_filter(lowest, radius)


def estimate_bl_dcp(img: ImageBuf, radius: int = 4, gb_only: bool = False) -> BackgroundLight:
    """Color at the brightest dark-channel pixel (first in row-major order on ties)."""
    return _pixel_color(img, np.argmax(dark_channel(img, radius, gb_only)))


def mip_score(r: np.ndarray, g: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.maximum(np.abs(r - g), np.abs(r - b))


def estimate_bl_mip(img: ImageBuf) -> BackgroundLight:
    return _pixel_color(img, np.argmax(mip_score(*img.planes)))


def _quadrants(y0, y1, x0, x1):
    ym = y0 + (y1 - y0) // 2
    xm = x0 + (x1 - x0) // 2
    return [(y0, ym, x0, xm), (y0, ym, xm, x1), (ym, y1, x0, xm), (ym, y1, xm, x1)]


def quadtree_descend(score_fn, shape: tuple[int, int], min_area_frac: float):
    """Follow the best-scoring quadrant until the region is small enough.

    ``score_fn(y0, y1, x0, x1)`` scores a region; ties keep the earliest
    quadrant (top-left, top-right, bottom-left, bottom-right).
    """
    if not 0.0 < min_area_frac <= 1.0:
        raise ValueError(f"min_area_frac must lie in (0, 1], got {min_area_frac}")
    h, w = shape
    limit = min_area_frac * h * w
    region = (0, h, 0, w)
    while True:
        y0, y1, x0, x1 = region
        if (y1 - y0) * (x1 - x0) <= limit or y1 - y0 < 2 or x1 - x0 < 2:
            return region
        best, best_score = None, -np.inf
        for quad in _quadrants(y0, y1, x0, x1):
            s = score_fn(*quad)
            if best is None or s > best_score:
                best, best_score = quad, s
        region = best


def estimate_bl_quadtree(img: ImageBuf, min_area_frac: float = 0.01) -> BackgroundLight:
    """Descend to the flattest bright quadrant, then apply the MIP rule inside it."""
    gray = to_grayscale(img)

    def score(y0, y1, x0, x1):
        patch = gray[y0:y1, x0:x1]
        return patch.mean() - patch.std()

    y0, y1, x0, x1 = quadtree_descend(score, gray.shape, min_area_frac)
    sub = [p[y0:y1, x0:x1] for p in img.planes]
    iy, ix = divmod(int(np.argmax(mip_score(*sub))), x1 - x0)
    return BackgroundLight(*(float(p[iy, ix]) for p in sub))


def fill_holes(values: np.ndarray) -> np.ndarray:
    """Grayscale hole filling by reconstruction-by-erosion from the border."""
    seed = np.full_like(values, values.max())
    seed[0, :] = values[0, :]
    seed[-1, :] = values[-1, :]
    seed[:, 0] = values[:, 0]
    seed[:, -1] = values[:, -1]
    return reconstruction(seed, values, method="erosion")


def blurriness_map(img: ImageBuf, gf_radius: int = 16, gf_eps: float = 1e-3) -> np.ndarray:
    gray = to_grayscale(img)
    p_init = np.zeros_like(gray)
    for i in range(1, BLUR_SCALES + 1):
        size = 2 ** i * BLUR_SCALES + 1
        p_init += np.abs(gray - gaussian_blur(gray, size, size / 6.0))
    p_init /= BLUR_SCALES
    rough = max_filter(p_init, BLUR_RADIUS)
    return guided_filter(gray, fill_holes(rough), gf_radius, gf_eps)


def blurriness_candidates(img: ImageBuf, min_area_frac: float = 0.01) -> list[np.ndarray]:
    """The three candidate colors blended by :func:`estimate_bl_blurriness`."""
    blur = blurriness_map(img)
    stack = img.to_array()
    flat = stack.reshape(-1, 3)

    n_top = max(1, int(np.floor(TOP_BLURRY_FRACTION * blur.size)))
    top = np.argsort(-blur, axis=None, kind="stable")[:n_top]
    candidates = [flat[top].mean(axis=0)]

    gray = to_grayscale(img)
    flat_region = quadtree_descend(
        lambda y0, y1, x0, x1: -gray[y0:y1, x0:x1].var(), gray.shape, min_area_frac)
    blurry_region = quadtree_descend(
        lambda y0, y1, x0, x1: blur[y0:y1, x0:x1].mean(), gray.shape, min_area_frac)
    for y0, y1, x0, x1 in (flat_region, blurry_region):
        candidates.append(stack[y0:y1, x0:x1].reshape(-1, 3).mean(axis=0))
    return candidates


def estimate_bl_blurriness(img: ImageBuf, alpha: float = 0.5,
                           min_area_frac: float = 0.01) -> BackgroundLight:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    cands = np.array(blurriness_candidates(img, min_area_frac))
    hi = cands.max(axis=0)
    lo = cands.min(axis=0)
    out = np.clip(alpha * hi + (1.0 - alpha) * lo, 0.0, 1.0)
    return BackgroundLight(*(float(v) for v in out))


_DISPATCH = {
    BlMethod.STATISTICAL: estimate_bl_statistical,
    BlMethod.DCP: estimate_bl_dcp,
    BlMethod.UDCP: lambda img: estimate_bl_dcp(img, gb_only=True),
    BlMethod.MIP: estimate_bl_mip,
    BlMethod.QUADTREE: estimate_bl_quadtree,
    BlMethod.BLURRINESS: estimate_bl_blurriness,
}


def estimate_bl(img: ImageBuf, method: BlMethod | str = BlMethod.STATISTICAL):
    """Run one estimator and time it.

    Returns:
        ``(BackgroundLight, elapsed_seconds)``; the time covers estimation only.
    """
    method = BlMethod(method)
    fn = _DISPATCH[method]
    start = time.perf_counter()
    bl = fn(img)
    return bl, time.perf_counter() - start
