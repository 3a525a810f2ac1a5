"""Procedural schematic faces with landmarks known by construction.

A face is an ellipse head with two arc eyebrows, two ellipse eyes, a
triangle nose and a quadratic-curve mouth.  Expression classes differ only
in mouth curvature/opening and eyebrow tilt/lift, so all class evidence
lives inside the mouth and eyebrow components.  Every random draw
(jitter, shading, pixel noise) is taken before the class is consulted,
which makes two faces rendered from the same seed identical outside the
class-bearing components.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from facemixup.dataset import ManifestEntry, write_manifest
from facemixup.landmarks import (
    FaceImage,
    FacialComponent,
    LandmarkSet,
    derive_region,
    save_image,
    save_landmarks,
)

# mouth_curv > 0 lifts the mouth corners; brow_tilt > 0 raises the inner brow ends
CLASS_PARAMS = {
    "happy": dict(mouth_curv=5.0, mouth_open=0.0, brow_tilt=0.0, brow_lift=0.0),
    "sad": dict(mouth_curv=-5.0, mouth_open=0.0, brow_tilt=4.0, brow_lift=0.0),
    "angry": dict(mouth_curv=0.0, mouth_open=0.0, brow_tilt=-4.0, brow_lift=0.0),
    "neutral": dict(mouth_curv=0.0, mouth_open=0.0, brow_tilt=0.0, brow_lift=0.0),
    "surprised": dict(mouth_curv=0.0, mouth_open=5.0, brow_tilt=0.0, brow_lift=5.0),
    "fear": dict(mouth_curv=-2.5, mouth_open=3.0, brow_tilt=4.0, brow_lift=3.0),
}
DEFAULT_CLASSES = ("happy", "sad", "angry")

STROKE = 3.0  # eyebrow stroke width in pixels at 128x128
LIP = 3.0  # half thickness of the closed mouth band
BACKGROUND = 40
N_NOISE = 12
DEFAULT_NOISE = 20.0


@dataclass(frozen=True)
class SchematicFaceSpec:
    class_id: str = "happy"
    jitter: float = 0.0
    size: int = 128
    seed: int = 0
    noise: float = 0.0  # std of additive Gaussian pixel noise, intensity units

    def __post_init__(self):
        if self.class_id not in CLASS_PARAMS:
            raise ValueError(f"unknown class {self.class_id!r}; choose from {sorted(CLASS_PARAMS)}")
        if not 0.0 <= self.jitter <= 1.0:
            raise ValueError("jitter must lie in [0, 1]")
        if self.size < 32:
            raise ValueError("size must be at least 32")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")


def _grid(size: int):
    c = np.arange(size) + 0.5
    return np.meshgrid(c, c)  # X, Y pixel centres


def _ellipse(X, Y, cx, cy, rx, ry):
    return ((X - cx) / rx) ** 2 + ((Y - cy) / ry) ** 2 <= 1.0


def _polyline_dist(X, Y, pts: np.ndarray) -> np.ndarray:
    """Distance from every pixel centre to a densely sampled polyline."""
    d = np.full(X.shape, np.inf)
    for x, y in pts:
        np.minimum(d, np.hypot(X - x, Y - y), out=d)
    return d


def _triangle(X, Y, a, b, c):
    def side(p, q):
        return (X - q[0]) * (p[1] - q[1]) - (p[0] - q[0]) * (Y - q[1])

    d1, d2, d3 = side(a, b), side(b, c), side(c, a)
    neg = (d1 < 0) | (d2 < 0) | (d3 < 0)
    pos = (d1 > 0) | (d2 > 0) | (d3 > 0)
    return ~(neg & pos)


def _ellipse_ring(cx, cy, rx, ry, n, start):
    t = start + 2 * math.pi * np.arange(n) / n
    return np.stack([cx + rx * np.cos(t), cy + ry * np.sin(t)], axis=1)


def render_face(spec: SchematicFaceSpec) -> tuple[FaceImage, LandmarkSet, int]:
    """Render one grayscale face; returns ``(image, landmarks, class index)``.

    The class index is the position of ``spec.class_id`` in
    :data:`CLASS_PARAMS` order.
    """
    img, lms, label, _ = render_layers(spec)
    return img, lms, label


def render_layers(spec: SchematicFaceSpec):
    """:func:`render_face` plus the boolean masks of the drawn shapes."""
    s = spec.size / 128.0
    j = spec.jitter
    rng = np.random.default_rng(spec.seed)
    z = np.clip(rng.standard_normal(N_NOISE), -2.0, 2.0)
    head_shade = 170 + 15 * j * z[0]
    feat_shade = 60 + 15 * j * z[1]
    pixel_noise = rng.standard_normal((spec.size, spec.size)) * spec.noise

    cx = 64 * s + 5 * s * j * z[2]
    cy = 66 * s + 5 * s * j * z[3]
    rx = 44 * s * (1 + 0.06 * j * z[4])
    ry = 54 * s * (1 + 0.06 * j * z[5])
    eye_dx = 0.38 * rx
    eye_y = cy - 0.18 * ry + 2 * s * j * z[6]
    brow_y = cy - 0.42 * ry + 2 * s * j * z[7]
    mouth_y = cy + 0.52 * ry + 2 * s * j * z[8]
    mouth_hw = 16 * s * (1 + 0.1 * j * z[9])

    p = CLASS_PARAMS[spec.class_id]
    label = list(CLASS_PARAMS).index(spec.class_id)
    curv = (p["mouth_curv"] + 2.0 * j * z[10]) * s
    tilt = (p["brow_tilt"] + 1.5 * j * z[11]) * s
    lift = p["brow_lift"] * s
    mouth_open = p["mouth_open"] * s

    X, Y = _grid(spec.size)
    img = np.full((spec.size, spec.size), float(BACKGROUND))
    masks = {"head": _ellipse(X, Y, cx, cy, rx, ry)}
    img[masks["head"]] = head_shade

    pts = np.zeros((68, 2))
    # jaw: image-left temple, down around the chin, to image-right temple
    theta = math.pi - np.arange(17) * math.pi / 16
    pts[0:17, 0] = cx + rx * np.cos(theta)
    pts[0:17, 1] = cy + ry * np.sin(theta)

    # nose: bridge 27-30 top to tip, base 31-35 left to right
    n_top, n_tip = cy - 0.14 * ry, cy + 0.16 * ry
    n_hw = 7 * s
    pts[27:31, 0] = cx
    pts[27:31, 1] = np.linspace(n_top, n_tip, 4)
    pts[31:36, 0] = cx + np.linspace(-n_hw, n_hw, 5)
    pts[31:36, 1] = n_tip + 3 * s * (1 - np.abs(np.linspace(-1, 1, 5)))
    nose = _triangle(X, Y, (cx, n_top), (cx - n_hw, n_tip + 3 * s), (cx + n_hw, n_tip + 3 * s))
    img[nose] = head_shade - 45
    masks["nose"] = nose

    # eyes: left corner, two upper-lid, right corner, two lower-lid points
    erx, ery = 8 * s, 4.5 * s
    for start, sign in ((36, -1), (42, 1)):
        ex = cx + sign * eye_dx
        img[_ellipse(X, Y, ex, eye_y, erx, ery)] = feat_shade
        pts[start:start + 6] = _ellipse_ring(ex, eye_y, erx, ery, 6, math.pi)

    # eyebrows: arcs, 17-21 left outer to inner, 22-26 right inner to outer
    t = np.linspace(0.0, 1.0, 41)  # 0 = outer end, 1 = inner end
    brow_hw = 11 * s
    bulge = 2.5 * s
    brow_mask = np.zeros_like(img, dtype=bool)
    for start, sign in ((17, -1), (22, 1)):
        bx = cx + sign * eye_dx
        xs = bx + sign * brow_hw * (1 - 2 * t)
        ys = brow_y - lift - tilt * t + 0.5 * tilt - bulge * np.sin(math.pi * t)
        line = np.stack([xs, ys], axis=1)
        brow_mask |= _polyline_dist(X, Y, line) <= STROKE * s / 2
        idx = np.linspace(0, 40, 5).astype(int)
        bp = line[idx]
        pts[start:start + 5] = bp if sign < 0 else bp[::-1]
    img[brow_mask] = feat_shade
    masks["brows"] = brow_mask

    # mouth: centre line y(u) = mouth_y + curv * (0.5 - u^2), u in [-1, 1]
    def centre(u):
        return mouth_y + curv * (0.5 - u ** 2)

    u_pix = (X - cx) / mouth_hw
    inside = np.abs(u_pix) <= 1.0
    half = LIP * s + mouth_open / 2
    band = inside & (np.abs(Y - centre(u_pix)) <= half)
    img[band] = feat_shade - 20
    masks["mouth"] = band
    if mouth_open > 0:
        gap = inside & (np.abs(Y - centre(u_pix)) <= mouth_open / 2)
        img[gap] = 15

    u_out_top = np.array([-2 / 3, -1 / 3, 0.0, 1 / 3, 2 / 3])
    outer = [(-1.0, 0.0)]
    outer += [(u, -half) for u in u_out_top]
    outer += [(1.0, 0.0)]
    outer += [(u, half) for u in u_out_top[::-1]]
    inner = [(-0.8, 0.0)] + [(u, -half / 3) for u in (-0.4, 0.0, 0.4)]
    inner += [(0.8, 0.0)] + [(u, half / 3) for u in (0.4, 0.0, -0.4)]
    for k, (u, dy) in enumerate(outer + inner):
        pts[48 + k] = (cx + u * mouth_hw, centre(u) + dy)

    img = np.clip(np.rint(img + pixel_noise), 0, 255).astype(np.uint8)
    image_id = f"{spec.class_id}-{spec.seed}"
    return FaceImage(img, image_id), LandmarkSet(image_id, tuple(map(tuple, pts))), label, masks


def class_index(name: str) -> int:
    return list(CLASS_PARAMS).index(name)


def face_seed(seed: int, split: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, split, index]).generate_state(1, np.uint64)[0] >> 1)


def render_dataset(
    n_per_class: int,
    classes: Sequence[str] = DEFAULT_CLASSES,
    jitter: float = 0.2,
    seed: int = 0,
    size: int = 128,
    noise: float = DEFAULT_NOISE,
    split: int = 0,
    threads: int = 1,
) -> list[tuple[FaceImage, LandmarkSet, int]]:
    """Balanced in-memory dataset; labels are positions within ``classes``.

    Samples interleave classes (``i % len(classes)``); each face draws its own
    seed from ``(seed, split, i)``.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    classes = list(classes)
    k = len(classes)
    specs = [
        SchematicFaceSpec(classes[i % k], jitter, size, face_seed(seed, split, i), noise)
        for i in range(n_per_class * k)
    ]

    def one(sp):
        img, lms, _ = render_face(sp)
        return img, lms, classes.index(sp.class_id)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(one, specs))
    return [one(sp) for sp in specs]


def generate_synth_dataset(
    n_per_class: int,
    classes: Sequence[str] = DEFAULT_CLASSES,
    jitter: float = 0.2,
    seed: int = 0,
    out_dir: str | Path = "synth",
    size: int = 128,
    noise: float = DEFAULT_NOISE,
    split: int = 0,
    manifest_name: str = "manifest.jsonl",
    threads: int = 1,
) -> Path:
    """Write PNGs, landmark sidecars and a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    prefix = Path(manifest_name).stem
    img_dir, lm_dir = out_dir / "images", out_dir / "landmarks"
    img_dir.mkdir(parents=True, exist_ok=True)
    lm_dir.mkdir(parents=True, exist_ok=True)
    faces = render_dataset(n_per_class, classes, jitter, seed, size, noise, split, threads)
    entries = []
    for i, (img, lms, label) in enumerate(faces):
        name = f"{prefix}_{i:05d}"
        rel_img, rel_lm = f"images/{name}.png", f"landmarks/{name}.json"
        save_image(img, out_dir / rel_img)
        save_landmarks(LandmarkSet(rel_img, lms.points), out_dir / rel_lm)
        entries.append(ManifestEntry(rel_img, label, rel_lm))
    path = out_dir / manifest_name
    write_manifest(path, entries)
    return path


def component_mask(lms: LandmarkSet, shape: tuple[int, int], components: Sequence[FacialComponent], pad_frac: float = 0.0, dilate: int = 0) -> np.ndarray:
    """Boolean mask of the union of component regions, grown by ``dilate`` pixels."""
    h, w = shape
    m = np.zeros(shape, dtype=bool)
    for comp in components:
        r = derive_region(lms, comp, pad_frac, (h, w))
        m[max(0, r.y0 - dilate):min(h, r.y1 + dilate), max(0, r.x0 - dilate):min(w, r.x1 + dilate)] = True
    return m
