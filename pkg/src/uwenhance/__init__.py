"""Underwater image restoration with a statistical background-light model."""

from .backlight import BackgroundLight, BlMethod, estimate_bl, estimate_bl_statistical
from .enhance import EnhanceParams, PipelineResult, color_correct, enhance_pipeline, restore_ifm
from .imgcore import ImageBuf, load_image, save_image
from .transmission import AttenuationProfile, TmParams, TransmissionSet, build_transmission

__all__ = [
    "AttenuationProfile",
    "BackgroundLight",
    "BlMethod",
    "EnhanceParams",
    "ImageBuf",
    "PipelineResult",
    "TmParams",
    "TransmissionSet",
    "build_transmission",
    "color_correct",
    "enhance_pipeline",
    "estimate_bl",
    "estimate_bl_statistical",
    "load_image",
    "restore_ifm",
    "save_image",
]

__version__ = "0.1.0"
