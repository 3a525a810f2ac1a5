"""Cross-entropy and the composite mixed-label losses.

All functions take probability vectors ``p`` (model outputs) and label
vectors ``y`` (one-hot or soft) as 1-D sequences of equal length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from facemixup.errors import InvalidWeights, LengthMismatch, SameClassPair

EPS = 1e-12
MAX_GAMMA = 6


def _vec(v) -> np.ndarray:
    return np.asarray(v, dtype=np.float64)


def cross_entropy(p, y, eps: float = EPS) -> float:
    """``-sum_k y_k * ln(max(p_k, eps))``."""
    p, y = _vec(p), _vec(y)
    if p.shape != y.shape:
        raise LengthMismatch(f"prediction has {p.shape}, label has {y.shape}")
    return float(-(y * np.log(np.maximum(p, eps))).sum())


@dataclass(frozen=True)
class MixWeights:
    """Supplier weight ``gamma / W`` for a mixed face with ``gamma`` components.

    ``W`` must exceed 6 so that the weight stays inside (0, 1) for every legal
    gamma; ``allow_small_w`` relaxes this to ``W > gamma``.
    """

    gamma: int
    W: float
    allow_small_w: bool = False

    def __post_init__(self):
        if not 1 <= self.gamma <= MAX_GAMMA:
            raise InvalidWeights(f"gamma must be in 1..{MAX_GAMMA}, got {self.gamma}")
        bound = self.gamma if self.allow_small_w else MAX_GAMMA
        if not np.isfinite(self.W) or self.W <= bound:
            raise InvalidWeights(f"W must exceed {bound}, got {self.W}")

    @property
    def supplier(self) -> float:
        return self.gamma / self.W

    @property
    def receiver(self) -> float:
        return 1.0 - self.gamma / self.W


def _distinct_classes(y_s, y_r):
    if y_s.shape != y_r.shape:
        raise LengthMismatch("supplier and receiver labels differ in length")
    if int(np.argmax(y_s)) == int(np.argmax(y_r)):
        raise SameClassPair("supplier and receiver labels share a class")


def facemixup_loss(p_mixed, y_supplier, y_receiver, mw: MixWeights, swap: bool = False) -> float:
    """Two-class cross-entropy weighted by the number of pasted components.

    ``swap=True`` puts the ``gamma / W`` weight on the receiver label instead.
    """
    y_s, y_r = _vec(y_supplier), _vec(y_receiver)
    _distinct_classes(y_s, y_r)
    if swap:
        y_s, y_r = y_r, y_s
    w = mw.gamma / mw.W
    return w * cross_entropy(p_mixed, y_s) + (1.0 - w) * cross_entropy(p_mixed, y_r)


def rs_loss(p_i, y_i, p_j, y_j) -> float:
    return cross_entropy(p_i, y_i) + cross_entropy(p_j, y_j)


def facemixup_rs_loss(p_mixed, y_supplier, y_receiver, mw: MixWeights, p_supplier, p_receiver, swap: bool = False) -> float:
    """Mixed-face loss plus plain cross-entropy on both unmodified source faces."""
    return facemixup_loss(p_mixed, y_supplier, y_receiver, mw, swap) + rs_loss(
        p_supplier, y_supplier, p_receiver, y_receiver
    )


def mixup_loss(p_mixed, y_a, y_b, lam: float) -> float:
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    return lam * cross_entropy(p_mixed, y_a) + (1.0 - lam) * cross_entropy(p_mixed, y_b)


def mixaugment_loss(p_mixed, y_a, y_b, lam: float, p_a, p_b) -> float:
    return mixup_loss(p_mixed, y_a, y_b, lam) + cross_entropy(p_a, y_a) + cross_entropy(p_b, y_b)
