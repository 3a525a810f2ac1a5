import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from facemixup.resample import resize_bilinear
from oracles import bilinear_float


def test_identity_size_is_exact(rng):
    src = rng.integers(0, 256, (17, 23, 1), dtype=np.uint8)
    assert np.array_equal(resize_bilinear(src, 17, 23), src)


def test_constant_stays_constant():
    src = np.full((5, 7), 93, np.uint8)
    assert np.all(resize_bilinear(src, 11, 3) == 93)


def test_hand_computed_upsample():
    # 1x2 -> 1x4: taps at -0.25, 0.25, 0.75, 1.25 -> clamp, 1/4, 3/4, clamp
    src = np.array([[0, 100]], np.uint8)
    assert resize_bilinear(src, 1, 4).tolist() == [[0, 25, 75, 100]]


def test_round_half_up():
    # 1x2 -> 1x1 samples x=0.5: (1 + 2) / 2 = 1.5 rounds to 2
    assert resize_bilinear(np.array([[1, 2]], np.uint8), 1, 1).tolist() == [[2]]


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12))),
    st.integers(1, 15),
    st.integers(1, 15),
)
def test_matches_float_oracle_within_rounding(src, oh, ow):
    ours = resize_bilinear(src, oh, ow).astype(np.int64)
    ref = bilinear_float(src, oh, ow)
    assert np.all(np.abs(ours - ref) <= 0.5 + 1e-9)


def test_rejects_empty_output():
    with pytest.raises(ValueError):
        resize_bilinear(np.zeros((2, 2), np.uint8), 0, 3)
