"""Face images, 68-point landmark sidecars and per-component pixel regions.

Landmark sidecar format (one JSON file per image)::

    {"image": "<id>", "points": [[x, y], ... 68 entries]}

Coordinates are sub-pixel floats with the origin at the top-left corner,
x growing rightward and y downward.  A point is in bounds when
``0 <= x < width`` and ``0 <= y < height``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from facemixup.errors import (
    DegenerateRegion,
    InvalidImage,
    MalformedJson,
    NonFinitePoint,
    WrongPointCount,
)

N_POINTS = 68
DEFAULT_PAD_FRAC = 0.15


class FacialComponent(enum.Enum):
    """The six mixable components; left/right are in image coordinates."""

    LeftEyebrow = range(17, 22)
    RightEyebrow = range(22, 27)
    LeftEye = range(36, 42)
    RightEye = range(42, 48)
    Nose = range(27, 36)
    Mouth = range(48, 68)

    @property
    def indices(self) -> range:
        return self.value

    @classmethod
    def from_name(cls, name: str) -> "FacialComponent":
        try:
            return cls[name]
        except KeyError:
            raise ValueError(f"unknown facial component {name!r}") from None


# canonical order, also the paste order used by the mixer
COMPONENTS: tuple[FacialComponent, ...] = tuple(FacialComponent)


@dataclass(frozen=True, eq=False)
class FaceImage:
    """An H x W x C uint8 pixel grid (C in {1, 3})."""

    pixels: np.ndarray
    id: str = ""

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 3):
            raise InvalidImage(f"expected HxWx1 or HxWx3 pixels, got shape {px.shape}")
        if px.shape[0] == 0 or px.shape[1] == 0:
            raise InvalidImage("image has zero width or height")
        if px.dtype != np.uint8:
            if not np.all(np.isfinite(px)) or px.min() < 0 or px.max() > 255:
                raise InvalidImage("intensities must lie in [0, 255]")
            if not np.array_equal(px, np.round(px)):
                raise InvalidImage("intensities must be integers")
            px = px.astype(np.uint8)
        px = np.array(px, dtype=np.uint8, copy=True)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.pixels.shape

    def __eq__(self, other):
        if not isinstance(other, FaceImage):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.pixels, other.pixels)

    def with_pixels(self, pixels: np.ndarray, id: str | None = None) -> "FaceImage":
        return FaceImage(pixels, self.id if id is None else id)


@dataclass(frozen=True)
class LandmarkSet:
    image_id: str
    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.points)
        if len(pts) != N_POINTS:
            raise WrongPointCount(f"expected {N_POINTS} points, got {len(pts)}")
        for i, (x, y) in enumerate(pts):
            if not (math.isfinite(x) and math.isfinite(y)):
                raise NonFinitePoint(f"point {i} is not finite: ({x}, {y})")
        object.__setattr__(self, "points", pts)

    def as_array(self) -> np.ndarray:
        return np.array(self.points, dtype=np.float64)

    def component_points(self, comp: FacialComponent) -> np.ndarray:
        return self.as_array()[list(comp.indices)]


@dataclass(frozen=True)
class ComponentRegion:
    """Pixel rectangle ``[x0, x1) x [y0, y1)`` covering one component."""

    component: FacialComponent
    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def slices(self) -> tuple[slice, slice]:
        return slice(self.y0, self.y1), slice(self.x0, self.x1)

    def contains(self, x: float, y: float) -> bool:
        return self.x0 <= x < self.x1 and self.y0 <= y < self.y1


def _coerce_coord(v) -> float:
    if isinstance(v, bool):
        raise MalformedJson(f"coordinate must be a number, got {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            raise MalformedJson(f"coordinate must be a number, got {v!r}") from None
    raise MalformedJson(f"coordinate must be a number, got {v!r}")


def parse_landmark_file(data: bytes | str) -> LandmarkSet:
    """Parse a sidecar JSON document into a validated :class:`LandmarkSet`.

    Non-finite coordinates, including the strings ``"NaN"`` or ``"Infinity"``,
    raise :class:`NonFinitePoint`.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedJson(f"sidecar is not UTF-8: {e}") from None
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as e:
        raise MalformedJson(str(e)) from None
    if not isinstance(doc, dict) or "points" not in doc:
        raise MalformedJson("sidecar must be an object with a 'points' key")
    raw = doc["points"]
    if not isinstance(raw, list):
        raise MalformedJson("'points' must be a list")
    pts = []
    for i, p in enumerate(raw):
        if not isinstance(p, (list, tuple)) or len(p) != 2:
            raise MalformedJson(f"point {i} must be an [x, y] pair")
        pts.append((_coerce_coord(p[0]), _coerce_coord(p[1])))
    if len(pts) != N_POINTS:
        raise WrongPointCount(f"expected {N_POINTS} points, got {len(pts)}")
    image_id = doc.get("image", "")
    if not isinstance(image_id, str):
        raise MalformedJson("'image' must be a string")
    return LandmarkSet(image_id, tuple(pts))


def serialize_landmarks(lms: LandmarkSet) -> bytes:
    doc = {"image": lms.image_id, "points": [[x, y] for x, y in lms.points]}
    return json.dumps(doc).encode("utf-8")


def load_landmarks(path: str | Path) -> LandmarkSet:
    return parse_landmark_file(Path(path).read_bytes())


def save_landmarks(lms: LandmarkSet, path: str | Path) -> None:
    Path(path).write_bytes(serialize_landmarks(lms))


def load_image(path: str | Path, id: str | None = None) -> FaceImage:
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        px = np.asarray(im)
    return FaceImage(px, str(path) if id is None else id)


def save_image(img: FaceImage, path: str | Path) -> None:
    px = img.pixels[:, :, 0] if img.channels == 1 else img.pixels
    Image.fromarray(np.ascontiguousarray(px)).save(path, format="PNG", compress_level=6)


def landmark_bbox(lms: LandmarkSet, comp: FacialComponent) -> tuple[float, float, float, float]:
    pts = lms.component_points(comp)
    return pts[:, 0].min(), pts[:, 1].min(), pts[:, 0].max(), pts[:, 1].max()


def derive_region(
    lms: LandmarkSet,
    comp: FacialComponent,
    pad_frac: float,
    img: FaceImage | tuple[int, int],
) -> ComponentRegion:
    """Padded bounding box of a component's landmarks, clamped to the image.

    The raw box ``[xmin, xmax] x [ymin, ymax]`` grows by ``pad_frac`` times
    its width (height) on each side.  Lower bounds are floored, upper bounds
    become ``floor(max) + 1`` so the pixel holding the extreme point is
    included.  ``img`` may be a FaceImage or a ``(height, width)`` pair.
    """
    if not math.isfinite(pad_frac) or pad_frac < 0:
        raise ValueError(f"pad_frac must be finite and >= 0, got {pad_frac}")
    h, w = (img.height, img.width) if isinstance(img, FaceImage) else img
    xmin, ymin, xmax, ymax = landmark_bbox(lms, comp)
    bw, bh = xmax - xmin, ymax - ymin
    if bw <= 0 or bh <= 0:
        raise DegenerateRegion(f"{comp.name}: landmarks span zero width or height")
    x0 = max(0, math.floor(xmin - pad_frac * bw))
    y0 = max(0, math.floor(ymin - pad_frac * bh))
    x1 = min(w, math.floor(xmax + pad_frac * bw) + 1)
    y1 = min(h, math.floor(ymax + pad_frac * bh) + 1)
    if x1 <= x0 or y1 <= y0:
        raise DegenerateRegion(f"{comp.name}: region is empty after clamping")
    return ComponentRegion(comp, x0, y0, x1, y1)


@dataclass
class ValidationReport:
    ok: bool = True
    out_of_bounds: list[int] = field(default_factory=list)
    degenerate: list[FacialComponent] = field(default_factory=list)
    messages: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "out_of_bounds": self.out_of_bounds,
            "degenerate": [c.name for c in self.degenerate],
            "messages": self.messages,
        }


def validate_pair(img: FaceImage, lms: LandmarkSet, pad_frac: float = DEFAULT_PAD_FRAC) -> ValidationReport:
    rep = ValidationReport()
    for i, (x, y) in enumerate(lms.points):
        if not (0 <= x < img.width and 0 <= y < img.height):
            rep.out_of_bounds.append(i)
            rep.messages.append(f"point {i} at ({x:g}, {y:g}) outside {img.width}x{img.height}")
    for comp in COMPONENTS:
        try:
            derive_region(lms, comp, pad_frac, img)
        except DegenerateRegion as e:
            rep.degenerate.append(comp)
            rep.messages.append(f"DegenerateRegion: {e}")
    rep.ok = not rep.out_of_bounds and not rep.degenerate
    return rep
