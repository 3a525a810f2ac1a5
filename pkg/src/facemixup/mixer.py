"""Cross-class pair sampling, component selection and mixed-face composition.

A mixed face takes ``gamma`` components from a *supplier* image and pastes
them over the matching components of a *receiver* image whose class differs.
Each supplier crop is resampled to the receiver's region geometry.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import comb
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from facemixup.dataset import Manifest, load_manifest, write_jsonl
from facemixup.errors import DegenerateRegion, FaceMixupError, InsufficientClasses
from facemixup.landmarks import (
    COMPONENTS,
    DEFAULT_PAD_FRAC,
    FaceImage,
    FacialComponent,
    LandmarkSet,
    derive_region,
    save_image,
    validate_pair,
)
from facemixup.resample import resize_bilinear

log = logging.getLogger(__name__)

N_COMPONENTS = len(COMPONENTS)
# number of non-empty subsets of the six components
N_SUBSETS = sum(comb(N_COMPONENTS, k) for k in range(1, N_COMPONENTS + 1))
PAPER_SUBSET_FACTOR = 62
UNIFORM_GAMMA = (1 / 6,) * 6


@dataclass(frozen=True)
class MixPlan:
    supplier_id: str
    receiver_id: str
    supplier_label: int
    receiver_label: int
    gamma: int
    components: tuple[FacialComponent, ...]
    seed: int = 0

    def __post_init__(self):
        if self.supplier_label == self.receiver_label:
            raise FaceMixupError("supplier and receiver must belong to different classes")
        comps = tuple(c for c in COMPONENTS if c in set(self.components))
        if len(comps) != len(self.components):
            raise FaceMixupError("duplicate components in plan")
        if not 1 <= self.gamma <= N_COMPONENTS or self.gamma != len(comps):
            raise FaceMixupError(f"gamma={self.gamma} does not match {len(comps)} components")
        object.__setattr__(self, "components", comps)


@dataclass(frozen=True)
class MixedFaceRecord:
    mixed_id: str
    plan: MixPlan
    output_path: str
    duplicate: bool = False

    def to_dict(self) -> dict:
        p = self.plan
        return {
            "mixed_id": self.mixed_id,
            "mixed_path": self.output_path,
            "supplier": p.supplier_id,
            "receiver": p.receiver_id,
            "gamma": p.gamma,
            "components": [c.name for c in p.components],
            "label_supplier": p.supplier_label,
            "label_receiver": p.receiver_label,
            "seed": p.seed,
            "duplicate": self.duplicate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MixedFaceRecord":
        comps = tuple(FacialComponent.from_name(n) for n in d["components"])
        plan = MixPlan(
            d["supplier"], d["receiver"], d["label_supplier"], d["label_receiver"],
            d["gamma"], comps, d.get("seed", 0),
        )
        return cls(d.get("mixed_id", ""), plan, d["mixed_path"], d.get("duplicate", False))


def count_possible_mixes(n: int, subset_factor: int = N_SUBSETS) -> int:
    """Ordered (supplier, receiver) pairs times non-empty component subsets.

    ``subset_factor=62`` reproduces the figure printed in the original
    method description, which undercounts the true sum of 63.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    return n * (n - 1) * subset_factor


def _labels_of(dataset) -> tuple[list, list[int]]:
    if isinstance(dataset, Mapping):
        items = list(dataset.keys())
        return items, [int(dataset[k]) for k in items]
    items = list(dataset)
    return items, [int(getattr(e, "label", e)) for e in items]


def sample_pair_indices(labels: Sequence[int], rng: np.random.Generator) -> tuple[int, int]:
    """Uniform ordered pair ``(supplier, receiver)`` with different labels."""
    n = len(labels)
    if n < 2 or len(set(labels)) < 2:
        raise InsufficientClasses("need at least two entries with distinct labels")
    while True:
        i, j = (int(v) for v in rng.integers(0, n, size=2))
        if labels[i] != labels[j]:
            return i, j


def sample_pair(dataset, rng: np.random.Generator):
    """Sample a (supplier, receiver) pair of entries from different classes.

    ``dataset`` is either a mapping ``id -> label`` (ids are returned) or a
    sequence of objects with a ``label`` attribute (objects are returned).
    """
    items, labels = _labels_of(dataset)
    i, j = sample_pair_indices(labels, rng)
    return items[i], items[j]


def _check_gamma_dist(gamma_dist: Sequence[float]) -> np.ndarray:
    p = np.asarray(gamma_dist, dtype=np.float64)
    if p.shape != (N_COMPONENTS,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("gamma_dist must be 6 non-negative probabilities summing to 1")
    return p


def sample_components(
    gamma_dist: Sequence[float] = UNIFORM_GAMMA, rng: np.random.Generator | None = None
) -> tuple[int, tuple[FacialComponent, ...]]:
    p = _check_gamma_dist(gamma_dist)
    rng = rng if rng is not None else np.random.default_rng()
    gamma = int(rng.choice(N_COMPONENTS, p=p)) + 1
    picked = sorted(int(k) for k in rng.choice(N_COMPONENTS, size=gamma, replace=False))
    return gamma, tuple(COMPONENTS[k] for k in picked)


def paste_regions(
    receiver: FaceImage,
    receiver_lms: LandmarkSet,
    supplier_lms: LandmarkSet,
    components: Sequence[FacialComponent],
    pad_frac: float,
    supplier_shape: tuple[int, int],
):
    """Yield ``(supplier_region, receiver_region)`` in paste order."""
    for comp in COMPONENTS:
        if comp not in components:
            continue
        src = derive_region(supplier_lms, comp, pad_frac, supplier_shape)
        dst = derive_region(receiver_lms, comp, pad_frac, receiver)
        yield src, dst


def compose_mixed_face(
    supplier: tuple[FaceImage, LandmarkSet],
    receiver: tuple[FaceImage, LandmarkSet],
    plan: MixPlan | Sequence[FacialComponent],
    pad_frac: float = DEFAULT_PAD_FRAC,
    id: str | None = None,
) -> FaceImage:
    """Paste the planned supplier components onto the receiver.

    Components are pasted in canonical order, so where padded regions overlap
    the later component wins.  Pixels outside every selected receiver region
    are copied from the receiver unchanged.
    """
    s_img, s_lms = supplier
    r_img, r_lms = receiver
    comps = plan.components if isinstance(plan, MixPlan) else tuple(plan)
    if not comps:
        raise FaceMixupError("plan selects no components")
    if s_img.channels != r_img.channels:
        raise FaceMixupError("supplier and receiver channel counts differ")
    out = np.array(r_img.pixels, copy=True)
    for src, dst in paste_regions(r_img, r_lms, s_lms, comps, pad_frac, (s_img.height, s_img.width)):
        crop = s_img.pixels[src.slices]
        out[dst.slices] = resize_bilinear(crop, dst.height, dst.width)
    return FaceImage(out, r_img.id if id is None else id)


def unique_plan_space(labels: Sequence[int]) -> int:
    n = len(labels)
    counts = np.bincount(np.asarray(labels, dtype=np.int64)) if n else np.zeros(0, np.int64)
    legal_pairs = n * n - int((counts.astype(object) ** 2).sum())
    return legal_pairs * N_SUBSETS


def plan_mixes(
    ids: Sequence[str],
    labels: Sequence[int],
    count: int,
    gamma_dist: Sequence[float] = UNIFORM_GAMMA,
    seed: int = 0,
) -> list[tuple[int, int, MixPlan, bool]]:
    """Draw ``count`` plans sequentially from one seeded generator.

    Returns ``(supplier_index, receiver_index, plan, duplicate)`` tuples.
    Plans are unique on (supplier, receiver, component set) until the space
    is exhausted; after that draws repeat and are flagged as duplicates.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    if count == 0:
        return []
    _check_gamma_dist(gamma_dist)
    rng = np.random.default_rng(seed)
    space = unique_plan_space(labels)
    if space == 0:
        raise InsufficientClasses("need at least two entries with distinct labels")
    if count > space:
        log.warning("requested %d mixes but only %d unique plans exist; duplicates will be flagged", count, space)
    seen: set = set()
    out = []
    for _ in range(count):
        while True:
            i, j = sample_pair_indices(labels, rng)
            gamma, comps = sample_components(gamma_dist, rng)
            key = (i, j, comps)
            if key not in seen or len(seen) >= space:
                break
        dup = key in seen
        seen.add(key)
        plan_seed = int(rng.integers(0, 2**63 - 1))
        plan = MixPlan(ids[i], ids[j], int(labels[i]), int(labels[j]), gamma, comps, plan_seed)
        out.append((i, j, plan, dup))
    return out


def generate_dataset(
    manifest: Manifest | str | Path,
    landmarks_dir: str | Path | None,
    count: int,
    gamma_dist: Sequence[float] = UNIFORM_GAMMA,
    seed: int = 0,
    out_dir: str | Path = "mixed",
    pad_frac: float = DEFAULT_PAD_FRAC,
    threads: int = 1,
) -> list[MixedFaceRecord]:
    """Write ``count`` mixed PNGs plus ``metadata.jsonl`` under ``out_dir``.

    Plans are drawn sequentially; composition and PNG encoding run on up to
    ``threads`` workers, which does not change any output byte.
    """
    if not isinstance(manifest, Manifest):
        manifest = load_manifest(manifest)
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    ids = [e.path for e in manifest]
    plans = plan_mixes(ids, manifest.labels, count, gamma_dist, seed)
    lm_dir = Path(landmarks_dir) if landmarks_dir is not None else None

    needed = sorted({k for i, j, _, _ in plans for k in (i, j)})
    faces: dict[int, tuple[FaceImage, LandmarkSet]] = {}
    for k in needed:
        try:
            img = manifest.load_image(k)
            lms = manifest.load_landmarks(k, lm_dir)
        except OSError as e:
            raise FaceMixupError(f"cannot read {manifest[k].path}: {e}") from e
        rep = validate_pair(img, lms, pad_frac)
        if not rep.ok:
            raise DegenerateRegion(f"{manifest[k].path}: " + "; ".join(rep.messages))
        faces[k] = (img, lms)

    width = max(6, len(str(max(count - 1, 0))))

    def work(n_item):
        n, (i, j, plan, dup) = n_item
        mixed_id = f"mixed_{n:0{width}d}"
        rel = f"images/{mixed_id}.png"
        img = compose_mixed_face(faces[i], faces[j], plan, pad_frac, id=mixed_id)
        try:
            save_image(img, out_dir / rel)
        except OSError as e:
            raise FaceMixupError(f"cannot write {out_dir / rel}: {e}") from e
        return MixedFaceRecord(mixed_id, plan, rel, dup)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            records = list(ex.map(work, enumerate(plans)))
    else:
        records = [work(x) for x in enumerate(plans)]
    write_jsonl(out_dir / "metadata.jsonl", (r.to_dict() for r in records))
    return records
