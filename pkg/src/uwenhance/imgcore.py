"""Image buffers, 8-bit file I/O, resizing, channel statistics and stretching.

Intensities are stored as float64 planes normalized to [0, 1]. The 0-255
scale only appears in :class:`ChannelStats` and in metric conventions.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit
from PIL import Image

SUPPORTED_FORMATS = {"PNG", "PPM"}
DEFAULT_SIZE = (600, 400)  # (width, height)
GRAY_WEIGHTS = (0.299, 0.587, 0.114)


class ImageFormatError(ValueError):
    """Raised for unreadable or unsupported image files."""


def _frozen_plane(a, name: str) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"plane {name} must be a non-empty 2-D array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ImageBuf:
    """An RGB image as three equally-sized planes in [0, 1].

    Planes are copied on construction and marked read-only.
    """

    r: np.ndarray
    g: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        planes = []
        for name in "rgb":
            p = _frozen_plane(getattr(self, name), name)
            object.__setattr__(self, name, p)
            planes.append(p)
        if not (planes[0].shape == planes[1].shape == planes[2].shape):
            raise ValueError(
                f"plane shapes differ: {[p.shape for p in planes]}"
            )
        for name, p in zip("rgb", planes):
            if not np.isfinite(p).all():
                raise ValueError(f"plane {name} contains non-finite values")
            if p.min() < 0.0 or p.max() > 1.0:
                raise ValueError(f"plane {name} has values outside [0, 1]")

    @property
    def height(self) -> int:
        return self.r.shape[0]

    @property
    def width(self) -> int:
        return self.r.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.r.shape

    @property
    def planes(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (self.r, self.g, self.b)

    @classmethod
    def from_array(cls, arr) -> "ImageBuf":
        """Build from an ``(H, W, 3)`` array of normalized values."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) array, got {arr.shape}")
        return cls(arr[..., 0], arr[..., 1], arr[..., 2])

    @classmethod
    def from_clipped(cls, r, g, b) -> "ImageBuf":
        """Build from planes that may stray outside [0, 1]; values are clamped."""
        return cls(np.clip(r, 0.0, 1.0), np.clip(g, 0.0, 1.0), np.clip(b, 0.0, 1.0))

    @classmethod
    def constant(cls, color, width: int, height: int) -> "ImageBuf":
        return cls(*(np.full((height, width), float(c)) for c in color))

    def to_array(self) -> np.ndarray:
        return np.stack(self.planes, axis=-1)

    def equals(self, other: "ImageBuf") -> bool:
        """Bit-exact plane equality."""
        return all(np.array_equal(a, b) for a, b in zip(self.planes, other.planes))


@dataclass(frozen=True)
class ChannelStats:
    """Mean, median and population standard deviation on the 0-255 scale."""

    avg: float
    med: float
    std: float


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

def load_image(path) -> ImageBuf:
    """Read an 8-bit PNG or binary PPM into a normalized :class:`ImageBuf`.

    Grayscale inputs are replicated to three planes and alpha is dropped.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            fmt = im.format
            if fmt not in SUPPORTED_FORMATS:
                raise ImageFormatError(f"{path}: unsupported format {fmt!r} (need PNG or PPM)")
            mode = im.mode
            if mode in ("L", "LA"):
                data = np.asarray(im.convert("L"))
                data = np.repeat(data[..., None], 3, axis=2)
            elif mode in ("RGB", "RGBA", "P", "PA"):
                data = np.asarray(im.convert("RGB"))
            else:
                raise ImageFormatError(
                    f"{path}: unsupported pixel mode {mode!r}; only 8-bit/channel images are accepted"
                )
    except ImageFormatError:
        raise
    except (OSError, ValueError) as exc:
        raise ImageFormatError(f"{path}: cannot read image ({exc})") from exc
    if data.dtype != np.uint8:
        raise ImageFormatError(f"{path}: expected 8-bit samples, got {data.dtype}")
    return ImageBuf.from_array(data / 255.0)


def to_bytes(values: np.ndarray) -> np.ndarray:
    """Scale [0, 1] values to uint8 with round-half-up."""
    v = np.floor(np.clip(values, 0.0, 1.0) * 255.0 + 0.5)
    return v.astype(np.uint8)


def _pil_format(path: Path) -> str:
    ext = path.suffix.lower()
    if ext == ".png":
        return "PNG"
    if ext in (".ppm", ".pnm"):
        return "PPM"
    raise ImageFormatError(f"{path}: cannot infer format from extension {ext!r} (use .png or .ppm)")


def save_image(img: ImageBuf, path) -> None:
    """Write ``img`` as 8-bit PNG or PPM, chosen by file extension."""
    path = Path(path)
    fmt = _pil_format(path)
    Image.fromarray(to_bytes(img.to_array())).save(path, format=fmt)


def save_scalar_map(values: np.ndarray, path) -> None:
    """Write a [0, 1] map as an 8-bit grayscale image (values clamped)."""
    path = Path(path)
    fmt = _pil_format(path)
    Image.fromarray(to_bytes(np.asarray(values, dtype=np.float64))).save(path, format=fmt)


# ---------------------------------------------------------------------------
# Geometry and color
# ---------------------------------------------------------------------------

def _linear_axis(n_in: int, n_out: int):
    # half-pixel centre convention; identity when n_in == n_out
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    frac = src - i0
    return i0, i1, frac


def resize_plane(plane: np.ndarray, w: int, h: int) -> np.ndarray:
    H, W = plane.shape
    if (W, H) == (w, h):
        return np.array(plane, copy=True)
    y0, y1, fy = _linear_axis(H, h)
    x0, x1, fx = _linear_axis(W, w)
    rows = plane[y0] * (1.0 - fy)[:, None] + plane[y1] * fy[:, None]
    return rows[:, x0] * (1.0 - fx) + rows[:, x1] * fx


def resize_to_standard(img: ImageBuf, w: int = DEFAULT_SIZE[0], h: int = DEFAULT_SIZE[1]) -> ImageBuf:
    """Bilinear resample to exactly ``w`` x ``h`` (default 600x400)."""
    if w < 1 or h < 1:
        raise ValueError(f"target size must be positive, got {w}x{h}")
    return ImageBuf.from_clipped(*(resize_plane(p, w, h) for p in img.planes))


def to_grayscale(img: ImageBuf) -> np.ndarray:
    wr, wg, wb = GRAY_WEIGHTS
    return wr * img.r + wg * img.g + wb * img.b


# ---------------------------------------------------------------------------
# Channel statistics
# ---------------------------------------------------------------------------

@njit(cache=True)
def _byte_histogram(x):
    # Counts per 8-bit level; exact is False as soon as a value is not k/255.
    cnt = np.zeros(256, np.int64)
    for i in range(x.size):
        v = x[i] * 255.0
        j = int(v + 0.5)
        if j < 0 or j > 255 or v != j:
            return cnt, False
        cnt[j] += 1
    return cnt, True


def _stats_from_histogram(cnt: np.ndarray, k: int) -> ChannelStats:
    n = int(cnt.sum())
    hi = n - k
    edges = np.concatenate(([0], np.cumsum(cnt)))
    # number of trimmed-set samples taken from each level
    taken = np.clip(np.minimum(edges[1:], hi) - np.maximum(edges[:-1], k), 0, None)
    m = n - 2 * k
    levels = np.arange(256, dtype=np.float64)
    avg = float(np.dot(taken, levels)) / m
    std = float(np.sqrt(np.dot(taken, (levels - avg) ** 2) / m))
    lo_rank = k + (m - 1) // 2
    hi_rank = k + m // 2
    lo_level = int(np.searchsorted(edges, lo_rank, side="right") - 1)
    hi_level = int(np.searchsorted(edges, hi_rank, side="right") - 1)
    return ChannelStats(avg, 0.5 * (lo_level + hi_level), std)


def _stats_by_sort(x: np.ndarray, k: int) -> ChannelStats:
    s = np.sort(x, axis=None)
    mid = s[k:s.size - k] * 255.0
    m = mid.size
    med = 0.5 * (mid[(m - 1) // 2] + mid[m // 2])
    return ChannelStats(float(mid.mean()), float(med), float(mid.std()))


def trimmed_channel_stats(plane: np.ndarray, trim: float = 0.10) -> ChannelStats:
    """Mean, median and std of the central ``1 - 2*trim`` share of pixels.

    ``floor(trim * N)`` of the sorted values are dropped at each end. Planes
    holding exact 8-bit levels go through a single-pass histogram; anything
    else is sorted. Both routes give the same statistics.
    """
    x = np.ascontiguousarray(plane, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("cannot compute statistics of an empty plane")
    if not 0.0 <= trim < 0.5:
        raise ValueError(f"trim must lie in [0, 0.5), got {trim}")
    k = int(np.floor(trim * x.size))
    cnt, exact = _byte_histogram(x)
    if exact:
        return _stats_from_histogram(cnt, k)
    return _stats_by_sort(x, k)


def linear_quantiles(values: np.ndarray, qs) -> list[float]:
    """Quantiles by linear interpolation between order statistics.

    Position ``q * (n - 1)`` in the sorted sample; same definition as
    numpy's default method, written out so it is reproducible term by term.
    """
    s = np.sort(np.asarray(values, dtype=np.float64), axis=None)
    if s.size == 0:
        raise ValueError("cannot take quantiles of an empty array")
    out = []
    for q in qs:
        h = q * (s.size - 1)
        i = int(np.floor(h))
        j = min(i + 1, s.size - 1)
        out.append(float(s[i] + (s[j] - s[i]) * (h - i)))
    return out


def histogram_stretch(values: np.ndarray, clip: float = 0.002, out_lo: float = 0.1,
                      out_hi: float = 0.9) -> np.ndarray:
    """Linearly map the [clip, 1-clip] quantile range onto [out_lo, out_hi].

    Values beyond the quantiles are clamped. A map with no spread becomes the
    constant midpoint of the output range.
    """
    if not out_lo < out_hi:
        raise ValueError(f"need out_lo < out_hi, got {out_lo}, {out_hi}")
    values = np.asarray(values, dtype=np.float64)
    i_min, i_max = linear_quantiles(values, (clip, 1.0 - clip))
    if i_max <= i_min:
        return np.full_like(values, 0.5 * (out_lo + out_hi))
    out = (values - i_min) * ((out_hi - out_lo) / (i_max - i_min)) + out_lo
    return np.clip(out, out_lo, out_hi)
