"""Transmission-map construction.

The red-channel map starts from a dark-channel estimate with a non-zero
clear-water prior, is capped by a depth-based map from the light-attenuation
prior, and is lifted in low-saturation (artificially lit) regions. Green and
blue maps follow from the red one through per-channel residual energy ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backlight import BackgroundLight
from .filters import guided_filter, max_filter, min_filter
from .imgcore import ImageBuf, histogram_stretch, to_grayscale

TM_EPS = 1e-3  # lower clamp of refined maps; keeps them strictly positive
BASELINE_FLOOR = 0.05

_NRER_BANDS = {"r": (0.80, 0.85), "g": (0.93, 0.97), "b": (0.95, 0.99)}


@dataclass(frozen=True)
class AttenuationProfile:
    """Residual energy fraction per unit depth for each channel."""

    nrer_r: float = 0.83
    nrer_g: float = 0.95
    nrer_b: float = 0.97

    def __post_init__(self):
        vals = (self.nrer_r, self.nrer_g, self.nrer_b)
        if not 0.0 < vals[0] <= vals[1] <= vals[2] < 1.0:
            raise ValueError(f"need 0 < nrer_r <= nrer_g <= nrer_b < 1, got {vals}")
        for ch, v in zip("rgb", vals):
            lo, hi = _NRER_BANDS[ch]
            if not lo <= v <= hi:
                raise ValueError(f"nrer_{ch}={v} outside the clear-ocean band [{lo}, {hi}]")


@dataclass(frozen=True)
class TmParams:
    patch_radius: int = 4
    dark_prior: float = 0.1
    lambda_arsm: float = 0.7
    d_inf: float = 10.0
    stretch_clip: float = 0.002
    stretch_lo: float = 0.1
    stretch_hi: float = 0.9
    mu0: float = 0.53214829
    mu1: float = 0.51309827
    mu2: float = -0.91066194
    gf_radius: int = 16
    gf_eps: float = 1e-3

    def __post_init__(self):
        if self.patch_radius < 0:
            raise ValueError("patch_radius must be >= 0")
        if not 0.0 <= self.lambda_arsm <= 1.0:
            raise ValueError(f"lambda_arsm must lie in [0, 1], got {self.lambda_arsm}")
        if self.d_inf <= 0:
            raise ValueError(f"d_inf must be positive, got {self.d_inf}")
        if not self.stretch_lo < self.stretch_hi:
            raise ValueError("stretch_lo must be below stretch_hi")
        if not 0.0 <= self.stretch_clip < 0.5:
            raise ValueError("stretch_clip must lie in [0, 0.5)")
        if self.gf_eps <= 0 or self.gf_radius < 0:
            raise ValueError("guided filter needs radius >= 0 and eps > 0")


@dataclass(frozen=True)
class TransmissionSet:
    t_r: np.ndarray
    t_g: np.ndarray
    t_b: np.ndarray

    def __post_init__(self):
        if not (self.t_r.shape == self.t_g.shape == self.t_b.shape):
            raise ValueError("transmission maps must share one shape")
        for name in ("t_r", "t_g", "t_b"):
            t = getattr(self, name)
            if not (np.isfinite(t).all() and t.min() > 0.0 and t.max() <= 1.0):
                raise ValueError(f"{name} values must lie in (0, 1]")

    @property
    def maps(self):
        return (self.t_r, self.t_g, self.t_b)

    @classmethod
    def uniform(cls, t: np.ndarray) -> "TransmissionSet":
        return cls(t, t, t)

    @classmethod
    def constant(cls, values, shape) -> "TransmissionSet":
        return cls(*(np.full(shape, float(v)) for v in values))


@dataclass(frozen=True)
class TmStages:
    """Intermediate maps of :func:`transmission_stages`."""

    t_nudcp: np.ndarray
    depth: np.ndarray
    d0: float
    t_ulap: np.ndarray
    t_cps: np.ndarray
    rsm: np.ndarray
    arsm: np.ndarray
    t_fused: np.ndarray
    tms: TransmissionSet


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def _check_bl(bl: BackgroundLight) -> None:
    if min(bl.as_tuple()) <= 0.0:
        raise ValueError(f"background light must be positive in every channel, got {bl.as_tuple()}")


def normalized_dark_channel(img: ImageBuf, bl: BackgroundLight, radius: int,
                            channels: str = "rgb") -> np.ndarray:
    ratios = [getattr(img, c) / getattr(bl, c) for c in channels]
    return min_filter(np.minimum.reduce(ratios), radius)


def nudcp_raw_tm(img: ImageBuf, bl: BackgroundLight, p: TmParams = TmParams()) -> np.ndarray:
    """Unstretched red transmission, clamped to [0, 1]."""
    _check_bl(bl)
    dark = normalized_dark_channel(img, bl, p.patch_radius)
    raw = (1.0 - dark) / (1.0 - p.dark_prior / bl.max)
    return np.clip(raw, 0.0, 1.0)


def nudcp_red_tm(img: ImageBuf, bl: BackgroundLight, p: TmParams = TmParams()) -> np.ndarray:
    return histogram_stretch(nudcp_raw_tm(img, bl, p), p.stretch_clip, p.stretch_lo, p.stretch_hi)


def ulap_depth_raw(img: ImageBuf, p: TmParams = TmParams()) -> np.ndarray:
    d = p.mu0 + p.mu1 * np.maximum(img.g, img.b) + p.mu2 * img.r
    return np.clip(d, 0.0, 1.0)


def ulap_depth(img: ImageBuf, p: TmParams = TmParams()) -> np.ndarray:
    """Relative depth from the attenuation prior, guided-filter refined."""
    refined = guided_filter(to_grayscale(img), ulap_depth_raw(img, p), p.gf_radius, p.gf_eps)
    return np.clip(refined, 0.0, 1.0)


def base_depth(img: ImageBuf, bl: BackgroundLight) -> float:
    """Distance of the closest scene point, from the largest deviation from the BL."""
    worst = 0.0
    for plane, b in zip(img.planes, bl.as_tuple()):
        worst = max(worst, float(np.abs(b - plane).max()) / max(1.0 - b, b))
    return min(max(1.0 - worst, 0.0), 1.0)


def tm_from_depth(depth: np.ndarray, d0: float, nrer: float, p: TmParams = TmParams()) -> np.ndarray:
    if not 0.0 < nrer < 1.0:
        raise ValueError(f"nrer must lie in (0, 1), got {nrer}")
    return np.power(nrer, p.d_inf * (np.asarray(depth) + d0))


def compensate_tm(t_nudcp: np.ndarray, t_ulap: np.ndarray) -> np.ndarray:
    _same_shape(t_nudcp, t_ulap)
    return np.minimum(t_nudcp, t_ulap)


def saturation_map(img: ImageBuf) -> np.ndarray:
    """HSV-style saturation; black pixels count as fully saturated."""
    hi = np.maximum.reduce(img.planes)
    lo = np.minimum.reduce(img.planes)
    sat = np.ones_like(hi)
    np.divide(hi - lo, hi, out=sat, where=hi > 0)
    return sat


def arsm(img: ImageBuf, lam: float = 0.7) -> np.ndarray:
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    return lam * (1.0 - saturation_map(img))


def fuse_tm(t_cps: np.ndarray, arsm_map: np.ndarray) -> np.ndarray:
    _same_shape(t_cps, arsm_map)
    return np.maximum(t_cps, arsm_map)


def derive_gb_tms(t_r: np.ndarray, prof: AttenuationProfile = AttenuationProfile()) -> TransmissionSet:
    """Invert the red map to depth and re-attenuate with the green/blue ratios."""
    t_r = np.asarray(t_r, dtype=np.float64)
    if not (t_r > 0).all():
        raise ValueError("red transmission must be strictly positive")
    depth = np.log(t_r) / math.log(prof.nrer_r)
    return TransmissionSet(t_r, np.power(prof.nrer_g, depth), np.power(prof.nrer_b, depth))


def refine_tm(img: ImageBuf, t: np.ndarray, p: TmParams, floor: float = TM_EPS) -> np.ndarray:
    return np.clip(guided_filter(to_grayscale(img), t, p.gf_radius, p.gf_eps), floor, 1.0)


def baseline_tm(img: ImageBuf, bl: BackgroundLight, method: str = "dcp", radius: int = 4) -> np.ndarray:
    """Single transmission map from the DCP, UDCP or MIP priors, floored at 0.05."""
    if method in ("dcp", "udcp"):
        _check_bl(bl)
        t = 1.0 - normalized_dark_channel(img, bl, radius, "rgb" if method == "dcp" else "gb")
    elif method == "mip":
        diff = max_filter(img.r, radius) - max_filter(np.maximum(img.g, img.b), radius)
        t = diff + 1.0 - diff.max()
    else:
        raise ValueError(f"unknown baseline transmission method {method!r}")
    return np.clip(t, BASELINE_FLOOR, 1.0)


def transmission_stages(img: ImageBuf, bl: BackgroundLight, p: TmParams = TmParams(),
                        prof: AttenuationProfile = AttenuationProfile()) -> TmStages:
    t_nudcp = nudcp_red_tm(img, bl, p)
    depth = ulap_depth(img, p)
    d0 = base_depth(img, bl)
    t_ulap = tm_from_depth(depth, d0, prof.nrer_r, p)
    t_cps = compensate_tm(t_nudcp, t_ulap)
    rsm = 1.0 - saturation_map(img)
    lifted = arsm(img, p.lambda_arsm)
    t_fused = fuse_tm(t_cps, lifted)
    # G/B maps are derived from the refined red map; the power law keeps
    # t_r <= t_g <= t_b, which a second per-channel filtering would not.
    tms = derive_gb_tms(refine_tm(img, t_fused, p), prof)
    return TmStages(t_nudcp, depth, d0, t_ulap, t_cps, rsm, lifted, t_fused, tms)


def build_transmission(img: ImageBuf, bl: BackgroundLight, p: TmParams = TmParams(),
                       prof: AttenuationProfile = AttenuationProfile()) -> TransmissionSet:
    return transmission_stages(img, bl, p, prof).tms


def build_baseline_transmission(img: ImageBuf, bl: BackgroundLight, method: str,
                                p: TmParams = TmParams()) -> TransmissionSet:
    t = refine_tm(img, baseline_tm(img, bl, method, p.patch_radius), p, BASELINE_FLOOR)
    return TransmissionSet.uniform(t)
