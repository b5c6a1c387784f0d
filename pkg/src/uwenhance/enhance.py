"""Image restoration by model inversion, white-balance correction, and the pipeline."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .backlight import BackgroundLight, BlMethod, estimate_bl
from .imgcore import ImageBuf
from .transmission import (
    AttenuationProfile,
    TmParams,
    TmStages,
    TransmissionSet,
    build_baseline_transmission,
    transmission_stages,
)

TM_METHODS = ("nudcp", "dcp", "udcp", "mip")


class PipelineError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class EnhanceParams:
    t_floor: float = 0.2
    t_ceil: float = 0.9
    lambda_v: float = 0.25
    color_correction: bool = True

    def __post_init__(self):
        if not 0.0 < self.t_floor < self.t_ceil <= 1.0:
            raise ValueError(f"need 0 < t_floor < t_ceil <= 1, got {self.t_floor}, {self.t_ceil}")
        if not 0.0 < self.lambda_v < 0.5:
            raise ValueError(f"lambda_v must lie in (0, 0.5), got {self.lambda_v}")


@dataclass
class PipelineResult:
    restored: ImageBuf
    enhanced: ImageBuf
    bl: BackgroundLight
    tms: TransmissionSet
    depth: np.ndarray
    stage_timings: dict[str, float]
    total_time: float
    stages: TmStages | None = field(default=None, repr=False)


def restore_ifm(img: ImageBuf, bl: BackgroundLight, tms: TransmissionSet,
                p: EnhanceParams = EnhanceParams()) -> ImageBuf:
    """Invert the haze model channel by channel with the transmission clamped."""
    if tms.t_r.shape != img.shape:
        raise ValueError(f"transmission shape {tms.t_r.shape} != image shape {img.shape}")
    out = []
    for plane, b, t in zip(img.planes, bl.as_tuple(), tms.maps):
        out.append((plane - b) / np.clip(t, p.t_floor, p.t_ceil) + b)
    return ImageBuf.from_clipped(*out)


def color_correct(img: ImageBuf, p: EnhanceParams = EnhanceParams()) -> ImageBuf:
    """White balance with per-channel gains set by the channel means.

    Each channel is divided by ``peak * mean_c / |means| + lambda_v``. An
    all-black image has no usable means and is returned unchanged.
    """
    means = [float(plane.mean()) for plane in img.planes]
    ref = math.sqrt(sum(m * m for m in means))
    if ref == 0.0:
        warnings.warn("color correction skipped: image is entirely black", RuntimeWarning, stacklevel=2)
        return img
    peak = max(float(plane.max()) for plane in img.planes)
    return ImageBuf.from_clipped(
        *(plane / (peak * (m / ref) + p.lambda_v) for plane, m in zip(img.planes, means))
    )


def scene_depth(tms: TransmissionSet, prof: AttenuationProfile) -> np.ndarray:
    return np.log(tms.t_r) / math.log(prof.nrer_r)


def enhance_pipeline(
    img: ImageBuf,
    bl_method: BlMethod | str = BlMethod.STATISTICAL,
    tm_method: str = "nudcp",
    tm_params: TmParams = TmParams(),
    profile: AttenuationProfile = AttenuationProfile(),
    params: EnhanceParams = EnhanceParams(),
    bl: BackgroundLight | None = None,
    tms: TransmissionSet | None = None,
) -> PipelineResult:
    """Estimate BL, build transmissions, restore, then color-correct.

    ``bl`` and ``tms`` bypass their estimation stages when given.
    """
    if tm_method not in TM_METHODS:
        raise ValueError(f"unknown tm_method {tm_method!r}; choose from {TM_METHODS}")
    bl_method = BlMethod(bl_method)
    timings: dict[str, float] = {}
    start = time.perf_counter()

    t0 = time.perf_counter()
    try:
        if bl is None:
            bl, _ = estimate_bl(img, bl_method)
    except Exception as exc:
        raise PipelineError("bl", exc) from exc
    timings["bl"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    stages = None
    try:
        if tms is None:
            if tm_method == "nudcp":
                stages = transmission_stages(img, bl, tm_params, profile)
                tms = stages.tms
            else:
                tms = build_baseline_transmission(img, bl, tm_method, tm_params)
    except Exception as exc:
        raise PipelineError("tm", exc) from exc
    timings["tm"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        restored = restore_ifm(img, bl, tms, params)
    except Exception as exc:
        raise PipelineError("restore", exc) from exc
    timings["restore"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        enhanced = color_correct(restored, params) if params.color_correction else restored
    except Exception as exc:
        raise PipelineError("cc", exc) from exc
    timings["cc"] = time.perf_counter() - t0

    total = time.perf_counter() - start
    depth = scene_depth(tms, profile)
    return PipelineResult(restored, enhanced, bl, tms, depth, timings, total, stages)
