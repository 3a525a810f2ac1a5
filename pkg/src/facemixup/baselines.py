"""General-purpose augmentations used as comparison baselines.

Mixup, CutMix, Cutout and Random Erasing, all over :class:`FaceImage`.
Soft labels are float64 vectors that sum to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from facemixup.dataset import Manifest, load_manifest, write_jsonl
from facemixup.errors import DimensionMismatch, RectOutOfBounds, SamplingFailure
from facemixup.landmarks import FaceImage, save_image

Rect = tuple[int, int, int, int]  # x0, y0, x1, y1, exclusive upper bounds


@dataclass(frozen=True)
class AugmentedSample:
    image: FaceImage
    label: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.label, dtype=np.float64)
        if np.any(lab < 0) or abs(lab.sum() - 1.0) > 1e-9:
            raise ValueError("label must be non-negative and sum to 1")


def one_hot(k: int, num_classes: int) -> np.ndarray:
    y = np.zeros(num_classes)
    y[k] = 1.0
    return y


def _same_dims(a: FaceImage, b: FaceImage):
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")


def sample_lambda(rng: np.random.Generator, alpha: float | None = None) -> float:
    """Uniform(0, 1) by default, Beta(alpha, alpha) when alpha is given."""
    if alpha is None:
        return float(rng.uniform())
    return float(rng.beta(alpha, alpha))


def mixup_images(a: FaceImage, y_a, b: FaceImage, y_b, lam: float) -> AugmentedSample:
    _same_dims(a, b)
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    px = lam * a.pixels.astype(np.float64) + (1.0 - lam) * b.pixels.astype(np.float64)
    px = np.clip(np.rint(px), 0, 255).astype(np.uint8)
    label = lam * np.asarray(y_a, float) + (1.0 - lam) * np.asarray(y_b, float)
    return AugmentedSample(a.with_pixels(px), label)


def rect_area_fraction(rect: Rect, width: int, height: int) -> Fraction:
    x0, y0, x1, y1 = rect
    return Fraction(max(0, x1 - x0) * max(0, y1 - y0), width * height)


def random_cutmix_rect(width: int, height: int, rng: np.random.Generator, lam: float | None = None) -> Rect:
    """Box covering about ``1 - lam`` of the image, centred uniformly and clipped."""
    lam = float(rng.uniform()) if lam is None else lam
    cut = math.sqrt(1.0 - lam)
    cw, ch = int(width * cut), int(height * cut)
    cx, cy = int(rng.integers(0, width)), int(rng.integers(0, height))
    x0, x1 = np.clip([cx - cw // 2, cx + cw - cw // 2], 0, width)
    y0, y1 = np.clip([cy - ch // 2, cy + ch - ch // 2], 0, height)
    return int(x0), int(y0), int(x1), int(y1)


def cutmix_images(
    a: FaceImage, y_a, b: FaceImage, y_b,
    rect: Rect | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[AugmentedSample, Fraction]:
    """Paste ``b[rect]`` into ``a``; label weight on ``y_b`` is the exact area fraction.

    Returns the sample and the area fraction as a :class:`Fraction`.
    """
    _same_dims(a, b)
    if rect is None:
        rect = random_cutmix_rect(a.width, a.height, rng if rng is not None else np.random.default_rng())
    x0, y0, x1, y1 = rect
    if not (0 <= x0 <= x1 <= a.width and 0 <= y0 <= y1 <= a.height):
        raise RectOutOfBounds(f"{rect} not inside {a.width}x{a.height}")
    px = np.array(a.pixels, copy=True)
    px[y0:y1, x0:x1] = b.pixels[y0:y1, x0:x1]
    frac = rect_area_fraction(rect, a.width, a.height)
    f = float(frac)
    label = (1.0 - f) * np.asarray(y_a, float) + f * np.asarray(y_b, float)
    return AugmentedSample(a.with_pixels(px), label), frac


def cutout_rect(width: int, height: int, side: int, center: tuple[int, int]) -> Rect:
    cx, cy = center
    x0, y0 = cx - side // 2, cy - side // 2
    x0, x1 = np.clip([x0, x0 + side], 0, width)
    y0, y1 = np.clip([y0, y0 + side], 0, height)
    return int(x0), int(y0), int(x1), int(y1)


def cutout(
    img: FaceImage,
    square_side: int,
    center: tuple[int, int] | None = None,
    rng: np.random.Generator | None = None,
    fill: int = 0,
) -> FaceImage:
    """Mask a square (clamped at the borders) with ``fill``."""
    if square_side <= 0:
        raise ValueError("square_side must be positive")
    if center is None:
        rng = rng if rng is not None else np.random.default_rng()
        center = int(rng.integers(0, img.width)), int(rng.integers(0, img.height))
    x0, y0, x1, y1 = cutout_rect(img.width, img.height, square_side, center)
    px = np.array(img.pixels, copy=True)
    px[y0:y1, x0:x1] = fill
    return img.with_pixels(px)


def sample_erase_rect(
    width: int, height: int,
    area_range: tuple[float, float],
    aspect_range: tuple[float, float],
    rng: np.random.Generator,
    max_attempts: int = 100,
) -> Rect:
    lo, hi = area_range
    if not (0 < lo <= hi <= 1):
        raise ValueError("area_range must satisfy 0 < lo <= hi <= 1")
    alo, ahi = aspect_range
    if not (0 < alo <= ahi):
        raise ValueError("aspect_range must satisfy 0 < lo <= hi")
    for _ in range(max_attempts):
        area = rng.uniform(lo, hi) * width * height
        aspect = rng.uniform(alo, ahi)
        h = int(round(math.sqrt(area * aspect)))
        w = int(round(math.sqrt(area / aspect)))
        if 0 < w <= width and 0 < h <= height:
            x0 = int(rng.integers(0, width - w + 1))
            y0 = int(rng.integers(0, height - h + 1))
            return x0, y0, x0 + w, y0 + h
    raise SamplingFailure(f"no erase rectangle fit after {max_attempts} attempts")


def random_erase(
    img: FaceImage,
    area_range: tuple[float, float] = (0.02, 0.4),
    aspect_range: tuple[float, float] = (0.3, 3.3),
    rng: np.random.Generator | None = None,
    max_attempts: int = 100,
) -> FaceImage:
    """Erase one sampled rectangle with i.i.d. uniform intensities in [0, 255]."""
    rng = rng if rng is not None else np.random.default_rng()
    x0, y0, x1, y1 = sample_erase_rect(img.width, img.height, area_range, aspect_range, rng, max_attempts)
    px = np.array(img.pixels, copy=True)
    px[y0:y1, x0:x1] = rng.integers(0, 256, size=(y1 - y0, x1 - x0, img.channels), dtype=np.uint8)
    return img.with_pixels(px)


BASELINE_METHODS = ("mixup", "cutmix", "cutout", "random_erasing")


def generate_baseline_dataset(
    manifest: Manifest | str | Path,
    method: str,
    count: int,
    seed: int = 0,
    out_dir: str | Path = "augmented",
    mixup_alpha: float | None = None,
    cutout_side: int = 32,
) -> list[dict]:
    """Offline counterpart of the trainer's on-the-fly baselines.

    Two-source methods draw a random ordered pair; single-source methods
    draw one image.  Every record carries a soft ``label`` vector.
    """
    if method not in BASELINE_METHODS:
        raise ValueError(f"unknown baseline method {method!r}")
    if not isinstance(manifest, Manifest):
        manifest = load_manifest(manifest)
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    k = manifest.num_classes
    rng = np.random.default_rng(seed)
    cache: dict[int, FaceImage] = {}

    def get(i):
        if i not in cache:
            cache[i] = manifest.load_image(i)
        return cache[i]

    rows = []
    width = max(6, len(str(max(count - 1, 0))))
    for n in range(count):
        rec_id = f"{method}_{n:0{width}d}"
        rel = f"images/{rec_id}.png"
        i = int(rng.integers(0, len(manifest)))
        y_i = one_hot(manifest[i].label, k)
        row = {"mixed_id": rec_id, "mixed_path": rel, "method": method}
        if method in ("mixup", "cutmix"):
            j = int(rng.integers(0, len(manifest)))
            y_j = one_hot(manifest[j].label, k)
            if method == "mixup":
                lam = sample_lambda(rng, mixup_alpha)
                s = mixup_images(get(i), y_i, get(j), y_j, lam)
                row["lambda"] = lam
            else:
                s, frac = cutmix_images(get(i), y_i, get(j), y_j, rng=rng)
                row["area_frac"] = [frac.numerator, frac.denominator]
            row["sources"] = [manifest[i].path, manifest[j].path]
            img, label = s.image, s.label
        else:
            if method == "cutout":
                img = cutout(get(i), cutout_side, rng=rng)
            else:
                img = random_erase(get(i), rng=rng)
            row["sources"] = [manifest[i].path]
            label = y_i
        row["label"] = [float(v) for v in label]
        save_image(img, out_dir / rel)
        rows.append(row)
    write_jsonl(out_dir / "metadata.jsonl", rows)
    return rows
