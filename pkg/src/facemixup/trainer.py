"""Desk-scale training harness: softmax linear classifier, momentum SGD.

Every method's per-sample loss is a sum of cross-entropy terms on soft
labels, so one analytic gradient (``p - y`` w.r.t. logits) serves all eight
methods.  :func:`reference_loss` evaluates the same objective element by
element through :mod:`facemixup.loss` and is what the finite-difference
checks differentiate.
"""

from __future__ import annotations

import json
import logging
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from facemixup import baselines
from facemixup.errors import ConfigError, DimensionMismatch, EmptyDataset
from facemixup.landmarks import DEFAULT_PAD_FRAC, FaceImage, LandmarkSet
from facemixup.loss import (
    EPS,
    MixWeights,
    cross_entropy,
    facemixup_loss,
    facemixup_rs_loss,
    mixaugment_loss,
    mixup_loss,
)
from facemixup.mixer import UNIFORM_GAMMA, compose_mixed_face, plan_mixes

log = logging.getLogger(__name__)

METHODS = (
    "vanilla",
    "vanilla_mixedfaces",
    "mixup",
    "cutmix",
    "mixaugment",
    "random_erasing",
    "facemixup",
    "facemixup_rs",
)
MIXED_METHODS = ("vanilla_mixedfaces", "facemixup", "facemixup_rs")
# mixed-set size relative to the real training set in the FACES setup (5678 / 1032)
DEFAULT_MIXED_RATIO = 5678 / 1032

# element kinds inside a batch
REAL, FACEMIX, FACEMIX_RS, MIXUP, CUTMIX, MIXAUG = range(6)


@dataclass
class TrainConfig:
    method: str = "vanilla"
    lr: float = 1e-2
    momentum: float = 0.9
    weight_decay: float = 1e-4
    batch_size: int = 64
    epochs: int = 30
    seed: int = 0
    W: float = 7.9
    gamma_dist: tuple[float, ...] = UNIFORM_GAMMA
    downsample: tuple[int, int] = (32, 32)
    pad_frac: float = DEFAULT_PAD_FRAC
    mixed_ratio: float = DEFAULT_MIXED_RATIO
    mixup_alpha: float | None = None
    erase_prob: float = 0.5
    cutout_side: int = 0  # > 0 applies Cutout to every training input, after mixing
    swap_weights: bool = False
    allow_small_w: bool = False

    def __post_init__(self):
        self.gamma_dist = tuple(float(v) for v in self.gamma_dist)
        self.downsample = tuple(int(v) for v in self.downsample)

    def validate(self) -> "TrainConfig":
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be non-negative")
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epochs >= 0")
        if len(self.downsample) != 2 or min(self.downsample) < 1:
            raise ConfigError("downsample must be a (w, h) pair of positive ints")
        if len(self.gamma_dist) != 6 or min(self.gamma_dist) < 0 or abs(sum(self.gamma_dist) - 1) > 1e-9:
            raise ConfigError("gamma_dist must be 6 probabilities summing to 1")
        if self.method in ("facemixup", "facemixup_rs"):
            for g in range(1, 7):
                if self.gamma_dist[g - 1] > 0:
                    MixWeights(g, self.W, self.allow_small_w)
        if not 0 <= self.erase_prob <= 1:
            raise ConfigError("erase_prob must lie in [0, 1]")
        if self.cutout_side < 0:
            raise ConfigError("cutout_side must be non-negative")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gamma_dist"] = list(self.gamma_dist)
        d["downsample"] = list(self.downsample)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path: str | Path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class LinearModel:
    weights: np.ndarray  # K x D
    bias: np.ndarray  # K

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "LinearModel":
        return LinearModel(self.weights.copy(), self.bias.copy())

    @classmethod
    def init(cls, num_classes: int, feature_dim: int, seed: int, scale: float = 0.01) -> "LinearModel":
        rng = np.random.default_rng(seed)
        return cls(rng.normal(0.0, scale, (num_classes, feature_dim)), np.zeros(num_classes))


# ---------------------------------------------------------------- features

def _area_matrix(n_src: int, n_dst: int) -> np.ndarray:
    """Row i averages source cells overlapping ``[i, i+1) * n_src / n_dst``."""
    m = np.zeros((n_dst, n_src))
    for i in range(n_dst):
        lo, hi = i * n_src / n_dst, (i + 1) * n_src / n_dst
        for k in range(int(np.floor(lo)), int(np.ceil(hi))):
            m[i, k] = min(hi, k + 1) - max(lo, k)
    return m / m.sum(axis=1, keepdims=True)


_AREA_CACHE: dict = {}


def featurize(img: FaceImage, downsample: tuple[int, int] = (32, 32)) -> np.ndarray:
    """Luma grayscale, area-averaged to ``(w, h)``, scaled to [0, 1], flattened."""
    w, h = downsample
    px = img.pixels.astype(np.float64)
    if img.channels == 3:
        gray = px @ np.array([0.299, 0.587, 0.114])
    else:
        gray = px[:, :, 0]
    key = (img.height, img.width, h, w)
    if key not in _AREA_CACHE:
        _AREA_CACHE[key] = (_area_matrix(img.height, h), _area_matrix(img.width, w))
    ay, ax = _AREA_CACHE[key]
    return (ay @ gray @ ax.T / 255.0).ravel()


def featurize_all(images: Sequence[FaceImage], downsample, threads: int = 1) -> np.ndarray:
    if threads > 1 and len(images) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(lambda im: featurize(im, downsample), images))
    else:
        rows = [featurize(im, downsample) for im in images]
    if not rows:
        return np.zeros((0, downsample[0] * downsample[1]))
    return np.stack(rows)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(model: LinearModel, x: np.ndarray) -> np.ndarray:
    """Class probabilities for one feature vector or a batch of rows."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.feature_dim:
        raise DimensionMismatch(f"feature dim {x.shape[-1]} != model dim {model.feature_dim}")
    return softmax(x @ model.weights.T + model.bias)


# ---------------------------------------------------------------- data

@dataclass
class LabeledFaces:
    images: list[FaceImage]
    labels: np.ndarray
    landmarks: list[LandmarkSet] | None = None
    ids: list[str] | None = None

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.ids is None:
            self.ids = [im.id or str(i) for i, im in enumerate(self.images)]

    def __len__(self):
        return len(self.images)


@dataclass
class MixedFaces:
    images: list[FaceImage]
    supplier: np.ndarray  # indices into the real training set
    receiver: np.ndarray
    gamma: np.ndarray
    label_supplier: np.ndarray
    label_receiver: np.ndarray

    def __len__(self):
        return len(self.images)


def build_mixed_faces(
    train: LabeledFaces,
    count: int,
    gamma_dist: Sequence[float] = UNIFORM_GAMMA,
    seed: int = 0,
    pad_frac: float = DEFAULT_PAD_FRAC,
    threads: int = 1,
) -> MixedFaces:
    """In-memory equivalent of :func:`facemixup.mixer.generate_dataset`."""
    if train.landmarks is None:
        raise ConfigError("mixed faces need landmarks for the training set")
    plans = plan_mixes(train.ids, train.labels.tolist(), count, gamma_dist, seed)

    def one(t):
        i, j, plan, _ = t
        return compose_mixed_face(
            (train.images[i], train.landmarks[i]), (train.images[j], train.landmarks[j]), plan, pad_frac
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            imgs = list(ex.map(one, plans))
    else:
        imgs = [one(t) for t in plans]
    return MixedFaces(
        imgs,
        np.array([t[0] for t in plans], dtype=np.int64),
        np.array([t[1] for t in plans], dtype=np.int64),
        np.array([t[2].gamma for t in plans], dtype=np.int64),
        np.array([t[2].supplier_label for t in plans], dtype=np.int64),
        np.array([t[2].receiver_label for t in plans], dtype=np.int64),
    )


@dataclass
class Batch:
    """Per-element loss: ``w*CE(p(x), y1) + (1-w)*CE(p(x), y2)``, plus
    ``CE(p(xa), ya) + CE(p(xb), yb)`` when ``kind`` is FACEMIX_RS or MIXAUG.
    """

    kind: np.ndarray
    x: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    w: np.ndarray
    gamma: np.ndarray
    xa: np.ndarray
    ya: np.ndarray
    xb: np.ndarray
    yb: np.ndarray

    def __len__(self):
        return len(self.kind)

    @property
    def has_real_terms(self) -> np.ndarray:
        return (self.kind == FACEMIX_RS) | (self.kind == MIXAUG)


def _empty_batch(n: int, d: int, k: int) -> Batch:
    return Batch(
        np.zeros(n, np.int64), np.zeros((n, d)), np.zeros((n, k)), np.zeros((n, k)),
        np.ones(n), np.zeros(n, np.int64),
        np.zeros((n, d)), np.zeros((n, k)), np.zeros((n, d)), np.zeros((n, k)),
    )


# ---------------------------------------------------------------- losses

def reference_loss(model: LinearModel, batch: Batch, config: TrainConfig) -> float:
    """Mean per-element method loss plus ``weight_decay/2 * ||W||^2``.

    Routed through :mod:`facemixup.loss` one element at a time.
    """
    total = 0.0
    for i in range(len(batch)):
        kind = batch.kind[i]
        p = forward(model, batch.x[i])
        if kind == REAL:
            total += cross_entropy(p, batch.y1[i])
        elif kind == FACEMIX:
            mw = MixWeights(int(batch.gamma[i]), config.W, config.allow_small_w)
            total += facemixup_loss(p, batch.y1[i], batch.y2[i], mw, config.swap_weights)
        elif kind == FACEMIX_RS:
            mw = MixWeights(int(batch.gamma[i]), config.W, config.allow_small_w)
            total += facemixup_rs_loss(
                p, batch.y1[i], batch.y2[i], mw,
                forward(model, batch.xa[i]), forward(model, batch.xb[i]), config.swap_weights,
            )
        elif kind in (MIXUP, CUTMIX):
            total += mixup_loss(p, batch.y1[i], batch.y2[i], float(batch.w[i]))
        elif kind == MIXAUG:
            total += mixaugment_loss(
                p, batch.y1[i], batch.y2[i], float(batch.w[i]),
                forward(model, batch.xa[i]), forward(model, batch.xb[i]),
            )
        else:
            raise ValueError(f"unknown element kind {kind}")
    return total / len(batch) + 0.5 * config.weight_decay * float((model.weights ** 2).sum())


def loss_and_gradient(model: LinearModel, batch: Batch, weight_decay: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Vectorised objective and its gradient ``(loss, dW, db)``."""
    n = len(batch)
    soft = batch.w[:, None] * batch.y1 + (1.0 - batch.w[:, None]) * batch.y2
    p = forward(model, batch.x)
    loss = -(soft * np.log(np.maximum(p, EPS))).sum()
    g = p * soft.sum(axis=1, keepdims=True) - soft
    dw = g.T @ batch.x
    db = g.sum(axis=0)
    m = batch.has_real_terms
    if m.any():
        for xr, yr in ((batch.xa[m], batch.ya[m]), (batch.xb[m], batch.yb[m])):
            pr = forward(model, xr)
            loss += -(yr * np.log(np.maximum(pr, EPS))).sum()
            gr = pr * yr.sum(axis=1, keepdims=True) - yr
            dw += gr.T @ xr
            db += gr.sum(axis=0)
    loss = loss / n + 0.5 * weight_decay * float((model.weights ** 2).sum())
    return float(loss), dw / n + weight_decay * model.weights, db / n


def gradient(model: LinearModel, batch: Batch, config: TrainConfig) -> tuple[np.ndarray, np.ndarray]:
    _, dw, db = loss_and_gradient(model, batch, config.weight_decay)
    return dw, db


class MomentumSGD:
    """``v <- momentum * v + g``; ``theta <- theta - lr * v``."""

    def __init__(self, lr: float, momentum: float):
        self.lr = lr
        self.momentum = momentum
        self.vw = None
        self.vb = None

    def step(self, model: LinearModel, dw: np.ndarray, db: np.ndarray) -> None:
        if self.vw is None:
            self.vw, self.vb = np.zeros_like(dw), np.zeros_like(db)
        self.vw = self.momentum * self.vw + dw
        self.vb = self.momentum * self.vb + db
        model.weights -= self.lr * self.vw
        model.bias -= self.lr * self.vb


# ---------------------------------------------------------------- batches

class BatchAssembler:
    """Turns an epoch's shuffled item list into method-specific batches."""

    def __init__(self, config: TrainConfig, train: LabeledFaces, mixed: MixedFaces | None,
                 num_classes: int, threads: int = 1):
        self.cfg = config
        self.train = train
        self.mixed = mixed
        self.k = num_classes
        self.eye = np.eye(num_classes)
        self.feats = featurize_all(train.images, config.downsample, threads)
        self.mixed_feats = featurize_all(mixed.images, config.downsample, threads) if mixed is not None else None
        self.d = self.feats.shape[1]

    def items(self) -> list[tuple[int, int]]:
        """``(source, index)`` pairs; source 0 = real, 1 = mixed."""
        out = [(0, i) for i in range(len(self.train))]
        if self.cfg.method in MIXED_METHODS and self.mixed is not None:
            out += [(1, i) for i in range(len(self.mixed))]
        return out

    def _input(self, img: FaceImage, cached, rng: np.random.Generator) -> np.ndarray:
        if self.cfg.cutout_side > 0:
            img = baselines.cutout(img, self.cfg.cutout_side, rng=rng)
        elif cached is not None:
            return cached
        return featurize(img, self.cfg.downsample)

    def build(self, chunk: Sequence[tuple[int, int]], rng: np.random.Generator) -> Batch:
        cfg, eye = self.cfg, self.eye
        b = _empty_batch(len(chunk), self.d, self.k)
        ys = self.train.labels
        for n, (src, i) in enumerate(chunk):
            if src == 1:
                mf = self.mixed
                b.x[n] = self._input(mf.images[i], self.mixed_feats[i], rng)
                ls, lr = mf.label_supplier[i], mf.label_receiver[i]
                if cfg.method == "vanilla_mixedfaces":
                    b.kind[n], b.y1[n], b.y2[n] = REAL, eye[lr], eye[lr]
                    continue
                b.kind[n] = FACEMIX_RS if cfg.method == "facemixup_rs" else FACEMIX
                b.gamma[n] = mf.gamma[i]
                ws = mf.gamma[i] / cfg.W
                b.y1[n], b.y2[n] = eye[ls], eye[lr]
                b.w[n] = 1.0 - ws if cfg.swap_weights else ws
                if cfg.method == "facemixup_rs":
                    si, ri = mf.supplier[i], mf.receiver[i]
                    b.xa[n], b.ya[n] = self.feats[si], eye[ys[si]]
                    b.xb[n], b.yb[n] = self.feats[ri], eye[ys[ri]]
                continue

            y_i = eye[ys[i]]
            if cfg.method in ("mixup", "cutmix", "mixaugment"):
                j = int(rng.integers(0, len(self.train)))
                y_j = eye[ys[j]]
                a_img, b_img = self.train.images[i], self.train.images[j]
                if cfg.method == "cutmix":
                    s, frac = baselines.cutmix_images(a_img, y_i, b_img, y_j, rng=rng)
                    b.kind[n], b.w[n] = CUTMIX, 1.0 - float(frac)
                else:
                    lam = baselines.sample_lambda(rng, cfg.mixup_alpha)
                    s = baselines.mixup_images(a_img, y_i, b_img, y_j, lam)
                    b.kind[n], b.w[n] = (MIXAUG if cfg.method == "mixaugment" else MIXUP), lam
                b.x[n] = self._input(s.image, None, rng)
                b.y1[n], b.y2[n] = y_i, y_j
                if cfg.method == "mixaugment":
                    b.xa[n], b.ya[n] = self.feats[i], y_i
                    b.xb[n], b.yb[n] = self.feats[j], y_j
            else:
                b.kind[n], b.y1[n], b.y2[n] = REAL, y_i, y_i
                if cfg.method == "random_erasing" and rng.uniform() < cfg.erase_prob:
                    b.x[n] = self._input(baselines.random_erase(self.train.images[i], rng=rng), None, rng)
                else:
                    b.x[n] = self._input(self.train.images[i], self.feats[i], rng)
        return b


# ---------------------------------------------------------------- train / eval

@dataclass
class EvalReport:
    accuracy: float
    per_class_accuracy: list[float]
    confusion: list[list[int]]
    loss_curve: list[float] = field(default_factory=list)
    accuracy_curve: list[float] = field(default_factory=list)

    @property
    def best_accuracy(self) -> float:
        return max(self.accuracy_curve) if self.accuracy_curve else self.accuracy

    def to_dict(self) -> dict:
        d = asdict(self)
        d["final_accuracy"] = self.accuracy
        d["best_accuracy"] = self.best_accuracy
        return d


def _predict(model: LinearModel, feats: np.ndarray) -> np.ndarray:
    # argmax returns the lowest class index on ties
    return np.argmax(feats @ model.weights.T + model.bias, axis=1)


def _report(model: LinearModel, feats: np.ndarray, labels: np.ndarray) -> EvalReport:
    if len(labels) == 0:
        raise EmptyDataset("cannot evaluate on an empty dataset")
    k = model.num_classes
    if labels.max() >= k:
        raise DimensionMismatch(f"label {labels.max()} outside model's {k} classes")
    pred = _predict(model, feats)
    conf = np.zeros((k, k), dtype=np.int64)
    np.add.at(conf, (labels, pred), 1)
    rows = conf.sum(axis=1)
    per_class = [float(conf[c, c] / rows[c]) if rows[c] else 0.0 for c in range(k)]
    acc = float(np.trace(conf) / conf.sum())
    return EvalReport(acc, per_class, conf.tolist())


def evaluate(model: LinearModel, test: LabeledFaces, downsample=(32, 32), threads: int = 1) -> EvalReport:
    if len(test) == 0:
        raise EmptyDataset("cannot evaluate on an empty dataset")
    return _report(model, featurize_all(test.images, downsample, threads), test.labels)


def train(
    config: TrainConfig,
    train_data: LabeledFaces,
    test_data: LabeledFaces | None = None,
    mixed: MixedFaces | None = None,
    num_classes: int | None = None,
    threads: int = 1,
) -> tuple[LinearModel, EvalReport]:
    """Train for ``config.epochs`` passes; returns the model and a test report.

    Methods that need a mixed set build one in memory (``mixed_ratio`` times
    the training-set size) when ``mixed`` is not supplied.  The report is
    computed on ``test_data`` if given, else on the training data, and carries
    one accuracy and one mean training loss per epoch.
    """
    config.validate()
    if len(train_data) == 0:
        raise EmptyDataset("training set is empty")
    k = num_classes or int(train_data.labels.max()) + 1
    if test_data is not None and len(test_data):
        k = max(k, int(test_data.labels.max()) + 1)
    if config.method in MIXED_METHODS and mixed is None:
        count = int(round(config.mixed_ratio * len(train_data)))
        mixed = build_mixed_faces(train_data, count, config.gamma_dist, config.seed, config.pad_frac, threads)

    asm = BatchAssembler(config, train_data, mixed, k, threads)
    eval_set = test_data if test_data is not None and len(test_data) else train_data
    eval_feats = asm.feats if eval_set is train_data else featurize_all(eval_set.images, config.downsample, threads)

    model = LinearModel.init(k, asm.d, config.seed)
    opt = MomentumSGD(config.lr, config.momentum)
    rng = np.random.default_rng([config.seed, 1])
    items = asm.items()
    loss_curve, acc_curve = [], []
    for epoch in range(config.epochs):
        order = rng.permutation(len(items))
        total, seen = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            chunk = [items[t] for t in order[start:start + config.batch_size]]
            batch = asm.build(chunk, rng)
            loss, dw, db = loss_and_gradient(model, batch, config.weight_decay)
            opt.step(model, dw, db)
            total += loss * len(chunk)
            seen += len(chunk)
        loss_curve.append(total / seen)
        acc_curve.append(_report(model, eval_feats, eval_set.labels).accuracy)
        log.debug("epoch %d loss %.4f acc %.4f", epoch + 1, loss_curve[-1], acc_curve[-1])
    report = _report(model, eval_feats, eval_set.labels)
    report.loss_curve, report.accuracy_curve = loss_curve, acc_curve
    return model, report


# ---------------------------------------------------------------- persistence

MODEL_MAGIC = b"FMXLIN01"


def save_model(model: LinearModel, path: str | Path, meta: dict | None = None) -> None:
    """Flat binary: 8-byte magic, uint32 K, uint32 D (little-endian), then
    K*D row-major float64 weights and K float64 biases.  ``meta`` goes to a
    ``<path>.json`` header next to it.
    """
    path = Path(path)
    k, d = model.weights.shape
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<II", k, d))
        fh.write(np.ascontiguousarray(model.weights, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.bias, dtype="<f8").tobytes())
    header = {"num_classes": k, "feature_dim": d, "dtype": "float64", "layout": "row-major"}
    header.update(meta or {})
    Path(str(path) + ".json").write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")


def load_model(path: str | Path) -> tuple[LinearModel, dict]:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:8] != MODEL_MAGIC:
        raise ConfigError(f"{path} is not a model file")
    k, d = struct.unpack("<II", raw[8:16])
    body = np.frombuffer(raw[16:], dtype="<f8")
    if body.size != k * d + k:
        raise ConfigError(f"{path} is truncated")
    meta_path = Path(str(path) + ".json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return LinearModel(body[: k * d].reshape(k, d).copy(), body[k * d:].copy()), meta


def write_curve_csv(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("epoch,accuracy,loss\n")
        for e, (a, l) in enumerate(zip(report.accuracy_curve, report.loss_curve), 1):
            fh.write(f"{e},{a!r},{l!r}\n")
