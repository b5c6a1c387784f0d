"""Evaluation tooling: annotations, BL accuracy, synthetic haze, benchmarks, corpus runs."""

from __future__ import annotations

import csv
import json
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .backlight import BackgroundLight, BlMethod, estimate_bl
from .enhance import EnhanceParams, enhance_pipeline
from .imgcore import ImageBuf, ImageFormatError, load_image
from .metrics import METRIC_ASSUMPTIONS, quality_report
from .transmission import AttenuationProfile, TmParams, TransmissionSet

log = logging.getLogger(__name__)

ANNOTATION_FIELDS = ("image_id", "b_r", "b_g", "b_b")
IMAGE_SUFFIXES = {".png", ".ppm", ".pnm"}
TOL_R = 30
TOL_GB = 40


class AnnotationError(ValueError):
    pass


@dataclass(frozen=True)
class AnnotationRecord:
    image_id: str
    b_r: int
    b_g: int
    b_b: int

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.b_r, self.b_g, self.b_b)


@dataclass
class AccuracySummary:
    n_images: int
    n_accurate: int
    accuracy: float
    mae: dict[str, float]


def load_annotations(path) -> list[AnnotationRecord]:
    """Parse an ``image_id,b_r,b_g,b_b`` CSV of 0-255 background lights."""
    records: list[AnnotationRecord] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return records
        if tuple(h.strip() for h in header) != ANNOTATION_FIELDS:
            raise AnnotationError(f"{path}: header must be {','.join(ANNOTATION_FIELDS)}, got {header}")
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 4:
                raise AnnotationError(f"{path}: row {row_no}: expected 4 fields, got {len(row)}")
            image_id = row[0].strip()
            if not image_id:
                raise AnnotationError(f"{path}: row {row_no}: empty image_id")
            values = []
            for name, cell in zip(ANNOTATION_FIELDS[1:], row[1:]):
                try:
                    v = int(cell.strip())
                except ValueError:
                    raise AnnotationError(
                        f"{path}: row {row_no}, field {name}: not an integer: {cell!r}") from None
                if not 0 <= v <= 255:
                    raise AnnotationError(f"{path}: row {row_no}, field {name}: {v} outside 0-255")
                values.append(v)
            if image_id in seen:
                raise AnnotationError(f"{path}: row {row_no}: duplicate image_id {image_id!r}")
            seen.add(image_id)
            records.append(AnnotationRecord(image_id, *values))
    return records


def bl_accuracy(est: BackgroundLight, truth: AnnotationRecord, tol_r: int = TOL_R,
                tol_gb: int = TOL_GB) -> bool:
    """True when every channel of ``est`` lies within tolerance of the annotation."""
    er, eg, eb = est.to_255()
    return (abs(er - truth.b_r) <= tol_r and abs(eg - truth.b_g) <= tol_gb
            and abs(eb - truth.b_b) <= tol_gb)


def summarize_accuracy(pairs, tol_r: int = TOL_R, tol_gb: int = TOL_GB) -> AccuracySummary:
    """Aggregate ``(estimate, annotation)`` pairs."""
    pairs = list(pairs)
    n = len(pairs)
    hits = sum(bl_accuracy(e, t, tol_r, tol_gb) for e, t in pairs)
    mae = {}
    for i, ch in enumerate("rgb"):
        errs = [abs(e.to_255()[i] - t.as_tuple()[i]) for e, t in pairs]
        mae[ch] = float(np.mean(errs)) if errs else 0.0
    return AccuracySummary(n, hits, hits / n if n else 0.0, mae)


def synth_haze(clear: ImageBuf, bl: BackgroundLight, tms: TransmissionSet) -> ImageBuf:
    """Forward haze model: ``I = J * t + (1 - t) * B`` per channel."""
    if tms.t_r.shape != clear.shape:
        raise ValueError(f"transmission shape {tms.t_r.shape} != image shape {clear.shape}")
    out = [j * t + (1.0 - t) * b for j, t, b in zip(clear.planes, tms.maps, bl.as_tuple())]
    return ImageBuf.from_clipped(*out)


def tms_from_depth(depth: np.ndarray, prof: AttenuationProfile = AttenuationProfile(),
                   d_inf: float = TmParams().d_inf) -> TransmissionSet:
    """Per-channel transmissions for a relative depth map in [0, 1]."""
    d = d_inf * np.asarray(depth, dtype=np.float64)
    return TransmissionSet(*(np.power(n, d) for n in (prof.nrer_r, prof.nrer_g, prof.nrer_b)))


def random_scene(rng: np.random.Generator, width: int, height: int, smooth: float = 4.0) -> ImageBuf:
    """Smooth random color texture quantized to 8-bit levels."""
    planes = []
    for _ in range(3):
        field_ = gaussian_filter(rng.random((height, width)), smooth, mode="reflect")
        lo, hi = field_.min(), field_.max()
        field_ = (field_ - lo) / (hi - lo) if hi > lo else np.zeros_like(field_)
        planes.append(np.floor(field_ * 255.0 + 0.5) / 255.0)
    return ImageBuf(*planes)


def synthetic_hazy_image(rng: np.random.Generator, bl: BackgroundLight, width: int = 160,
                         height: int = 120, depth_range=(40.0, 100.0),
                         prof: AttenuationProfile = AttenuationProfile()):
    """An underwater image with known background light and transmissions.

    Scene depth (in the units of the residual energy ratios) rises linearly
    from the bottom row to the top row across ``depth_range``; each channel's
    transmission is ``nrer_c ** depth``. The default range leaves every
    channel below 0.3 transmission, so the veiling light dominates the
    histogram. Output is quantized to 8-bit levels like a decoded file.

    Returns:
        ``(hazy, clear, transmissions)``
    """
    clear = random_scene(rng, width, height)
    d_near, d_far = depth_range
    depth = np.linspace(d_far, d_near, height)[:, None] * np.ones((1, width))
    tms = TransmissionSet(*(np.power(n, depth) for n in (prof.nrer_r, prof.nrer_g, prof.nrer_b)))
    hazy = synth_haze(clear, bl, tms)
    hazy = ImageBuf(*(np.floor(p * 255.0 + 0.5) / 255.0 for p in hazy.planes))
    return hazy, clear, tms


def underwater_bl_255(rng: np.random.Generator, lo: int = 40, hi: int = 220) -> tuple[int, int, int]:
    """Draw three levels in [lo, hi]; the smallest goes to red, the rest to green/blue."""
    v = sorted(int(x) for x in rng.integers(lo, hi + 1, size=3))
    g, b = (v[1], v[2]) if rng.random() < 0.5 else (v[2], v[1])
    return (v[0], g, b)


# ---------------------------------------------------------------------------
# Benchmark
# ---------------------------------------------------------------------------

def bench_image(width: int, height: int, seed: int = 0) -> ImageBuf:
    rng = np.random.default_rng(seed)
    data = rng.integers(0, 256, size=(height, width, 3)) / 255.0
    return ImageBuf.from_array(data)


def bench_bl(sizes, methods, reps: int = 5, seed: int = 0) -> list[dict]:
    """Median wall-clock time of each BL estimator per image size.

    Runs strictly serially. One untimed warm-up call per (size, method)
    excludes JIT compilation from the measurement.
    """
    if reps < 3:
        raise ValueError(f"reps must be >= 3, got {reps}")
    rows = []
    for width, height in sizes:
        img = bench_image(width, height, seed)
        for method in methods:
            method = BlMethod(method)
            estimate_bl(img, method)
            times, outputs = [], set()
            for _ in range(reps):
                bl, elapsed = estimate_bl(img, method)
                times.append(elapsed)
                outputs.add(bl.as_tuple())
            rows.append({
                "width": width,
                "height": height,
                "method": method.value,
                "reps": reps,
                "median_s": statistics.median(times),
                "min_s": min(times),
                "bl": list(next(iter(outputs))),
                "deterministic": len(outputs) == 1,
            })
    return rows


# ---------------------------------------------------------------------------
# Corpus evaluation
# ---------------------------------------------------------------------------

@dataclass
class CorpusReport:
    meta: dict
    per_image: list[dict] = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)
    accuracy: AccuracySummary | None = None

    def to_dict(self) -> dict:
        agg = dict(self.aggregate)
        if self.accuracy is not None:
            agg["accuracy"] = asdict(self.accuracy)
        return {"meta": self.meta, "per_image": self.per_image, "aggregate": agg}

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def list_images(directory) -> list[Path]:
    return sorted(p for p in Path(directory).iterdir()
                  if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def _evaluate_one(path: Path, bl_method: str, tm_method: str, tm_params: TmParams,
                  profile: AttenuationProfile, params: EnhanceParams) -> dict:
    img = load_image(path)
    result = enhance_pipeline(img, bl_method, tm_method, tm_params, profile, params)
    report = quality_report(result.enhanced, img, result.stage_timings)
    return {
        "image_id": path.stem,
        "file": path.name,
        "rmse": report.rmse,
        "ssim": report.ssim,
        "entropy": report.entropy,
        "uciqe": report.uciqe,
        "bl": list(result.bl.as_tuple()),
        "bl_255": list(result.bl.to_255()),
        "timings": dict(result.stage_timings, total=result.total_time),
    }


def evaluate_corpus(directory, annotations=None, bl_method: str = "statistical",
                    tm_method: str = "nudcp", tm_params: TmParams = TmParams(),
                    profile: AttenuationProfile = AttenuationProfile(),
                    params: EnhanceParams = EnhanceParams(), jobs: int = 1,
                    tol_r: int = TOL_R, tol_gb: int = TOL_GB) -> CorpusReport:
    """Enhance every image in ``directory`` and score it.

    Full-reference metrics compare the enhanced output with its own input.
    Unreadable files are skipped and listed in ``meta['skipped']``.
    """
    paths = list_images(directory)
    truth = None
    if annotations is not None:
        truth = {rec.image_id: rec for rec in load_annotations(annotations)}
    args = (bl_method, tm_method, tm_params, profile, params)

    rows: list[dict] = []
    skipped: list[dict] = []
    if jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_evaluate_one, p, *args) for p in paths]
            outcomes = []
            for p, fut in zip(paths, futures):
                try:
                    outcomes.append((p, fut.result(), None))
                except Exception as exc:
                    outcomes.append((p, None, exc))
    else:
        outcomes = []
        for p in paths:
            try:
                outcomes.append((p, _evaluate_one(p, *args), None))
            except Exception as exc:
                outcomes.append((p, None, exc))

    pairs = []
    for path, row, exc in outcomes:
        if exc is not None:
            if not isinstance(exc, (ImageFormatError, OSError, ValueError, RuntimeError)):
                raise exc
            log.warning("skipping %s: %s", path, exc)
            skipped.append({"file": path.name, "error": str(exc)})
            continue
        if truth is not None:
            rec = truth.get(row["image_id"])
            if rec is None:
                row["accurate"] = None
            else:
                est = BackgroundLight(*row["bl"])
                row["accurate"] = bl_accuracy(est, rec, tol_r, tol_gb)
                pairs.append((est, rec))
        rows.append(row)

    aggregate: dict = {"n_images": len(rows)}
    for key in ("rmse", "ssim", "entropy", "uciqe"):
        if rows:
            aggregate[key] = float(np.mean([r[key] for r in rows]))
    meta = {
        "directory": str(directory),
        "bl_method": BlMethod(bl_method).value,
        "tm_method": tm_method,
        "tm_params": asdict(tm_params),
        "profile": asdict(profile),
        "enhance_params": asdict(params),
        "reference": "input image",
        "metrics": METRIC_ASSUMPTIONS,
        "skipped": skipped,
        "annotations": str(annotations) if annotations is not None else None,
        "tolerance": {"r": tol_r, "gb": tol_gb},
    }
    accuracy = summarize_accuracy(pairs, tol_r, tol_gb) if truth is not None else None
    return CorpusReport(meta, rows, aggregate, accuracy)
