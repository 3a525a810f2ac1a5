from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from facemixup.baselines import (
    AugmentedSample,
    cutmix_images,
    cutout,
    generate_baseline_dataset,
    mixup_images,
    one_hot,
    random_cutmix_rect,
    random_erase,
    sample_erase_rect,
)
from facemixup.errors import DimensionMismatch, RectOutOfBounds, SamplingFailure
from facemixup.landmarks import FaceImage

Y0, Y1 = np.array([1.0, 0.0]), np.array([0.0, 1.0])


def rand_img(rng, h=10, w=10, c=1):
    return FaceImage(rng.integers(0, 256, (h, w, c), dtype=np.uint8))


def test_mixup_endpoints(rng):
    a, b = rand_img(rng, c=3), rand_img(rng, c=3)
    s = mixup_images(a, Y0, b, Y1, 1.0)
    assert s.image == a and np.array_equal(s.label, Y0)
    s = mixup_images(a, Y0, b, Y1, 0.0)
    assert s.image == b and np.array_equal(s.label, Y1)


def test_mixup_half():
    a = FaceImage(np.full((4, 4), 100, np.uint8))
    b = FaceImage(np.full((4, 4), 200, np.uint8))
    s = mixup_images(a, Y0, b, Y1, 0.5)
    assert np.all(s.image.pixels == 150)
    assert s.label.tolist() == [0.5, 0.5]


def test_mixup_dimension_mismatch(rng):
    with pytest.raises(DimensionMismatch):
        mixup_images(rand_img(rng), Y0, rand_img(rng, 9, 10), Y1, 0.3)


def test_cutmix_endpoints(rng):
    a, b = rand_img(rng), rand_img(rng)
    s, f = cutmix_images(a, Y0, b, Y1, rect=(0, 0, 10, 10))
    assert s.image == b and np.array_equal(s.label, Y1) and f == 1
    s, f = cutmix_images(a, Y0, b, Y1, rect=(3, 3, 3, 8))
    assert s.image == a and np.array_equal(s.label, Y0) and f == 0


def test_cutmix_half_area(rng):
    s, f = cutmix_images(rand_img(rng), Y0, rand_img(rng), Y1, rect=(0, 0, 5, 10))
    assert f == Fraction(1, 2)
    assert s.label.tolist() == [0.5, 0.5]


def test_cutmix_out_of_bounds(rng):
    with pytest.raises(RectOutOfBounds):
        cutmix_images(rand_img(rng), Y0, rand_img(rng), Y1, rect=(0, 0, 11, 4))


def test_cutmix_label_is_exact_area_fraction(rng):
    a = FaceImage(np.zeros((37, 53), np.uint8))
    b = FaceImage(np.ones((37, 53), np.uint8))
    for _ in range(1000):
        x0, x1 = sorted(rng.integers(0, 54, 2))
        y0, y1 = sorted(rng.integers(0, 38, 2))
        s, f = cutmix_images(a, Y0, b, Y1, rect=(x0, y0, x1, y1))
        pasted = int(s.image.pixels.sum())
        assert f == Fraction(pasted, 37 * 53)
        assert s.label[1] == float(f)
        assert abs(s.label.sum() - 1) <= 1e-12


def test_cutmix_random_rect_in_bounds(rng):
    for _ in range(200):
        x0, y0, x1, y1 = random_cutmix_rect(31, 17, rng)
        assert 0 <= x0 <= x1 <= 31 and 0 <= y0 <= y1 <= 17


def test_cutout_whole_image(rng):
    img = rand_img(rng)
    out = cutout(img, 40, center=(5, 5), fill=7)
    assert np.all(out.pixels == 7)


def test_cutout_single_pixel():
    img = FaceImage(np.full((6, 6), 255, np.uint8))
    out = cutout(img, 1, center=(0, 0))
    assert (out.pixels == 0).sum() == 1 and out.pixels[0, 0, 0] == 0


def test_cutout_masked_count_matches_geometry(rng):
    h, w = 23, 31
    img = FaceImage(np.full((h, w), 255, np.uint8))
    for _ in range(1000):
        side = int(rng.integers(1, 20))
        cx, cy = int(rng.integers(-5, w + 5)), int(rng.integers(-5, h + 5))
        out = cutout(img, side, center=(cx, cy))
        lo_x, lo_y = cx - side // 2, cy - side // 2
        ox = max(0, min(w, lo_x + side) - max(0, lo_x))
        oy = max(0, min(h, lo_y + side) - max(0, lo_y))
        assert (out.pixels == 0).sum() == ox * oy


def test_cutout_rejects_zero_side(rng):
    with pytest.raises(ValueError):
        cutout(rand_img(rng), 0, center=(1, 1))


def test_random_erase_forced_full():
    img = FaceImage(np.zeros((20, 20), np.uint8))
    out = random_erase(img, (1.0, 1.0), (1.0, 1.0), np.random.default_rng(0))
    rect = sample_erase_rect(20, 20, (1.0, 1.0), (1.0, 1.0), np.random.default_rng(0))
    assert rect == (0, 0, 20, 20)
    assert (out.pixels != 0).mean() > 0.9


def test_random_erase_outside_untouched(rng):
    img = rand_img(rng, 40, 50)
    for seed in range(50):
        out = random_erase(img, rng=np.random.default_rng(seed))
        x0, y0, x1, y1 = sample_erase_rect(50, 40, (0.02, 0.4), (0.3, 3.3), np.random.default_rng(seed))
        mask = np.ones((40, 50), bool)
        mask[y0:y1, x0:x1] = False
        assert np.array_equal(out.pixels[mask], img.pixels[mask])


def test_random_erase_deterministic(rng):
    img = rand_img(rng, 30, 30)
    a = random_erase(img, rng=np.random.default_rng(4))
    b = random_erase(img, rng=np.random.default_rng(4))
    assert a == b


def test_random_erase_values_uniform():
    img = FaceImage(np.zeros((317, 317), np.uint8))
    out = random_erase(img, (1.0, 1.0), (1.0, 1.0), np.random.default_rng(2024))
    counts = np.bincount(out.pixels.ravel(), minlength=256)
    assert counts.sum() >= 10**5
    assert stats.chisquare(counts).pvalue > 0.05


def test_random_erase_sampling_failure():
    with pytest.raises(SamplingFailure):
        # aspect 100 on a square image never fits at this area
        random_erase(FaceImage(np.zeros((10, 10), np.uint8)), (0.9, 1.0), (100, 100), np.random.default_rng(0))


def test_soft_label_validation():
    with pytest.raises(ValueError):
        AugmentedSample(FaceImage(np.zeros((2, 2), np.uint8)), [0.7, 0.7])


def test_one_hot():
    assert one_hot(2, 4).tolist() == [0, 0, 1, 0]


@pytest.mark.parametrize("method", ["mixup", "cutmix", "cutout", "random_erasing"])
def test_generate_baseline_records(tmp_path, method):
    from facemixup.synthfaces import generate_synth_dataset

    man = generate_synth_dataset(2, seed=1, out_dir=tmp_path / "s")
    rows = generate_baseline_dataset(man, method, 6, seed=3, out_dir=tmp_path / "o")
    assert len(rows) == 6
    for r in rows:
        assert abs(sum(r["label"]) - 1) < 1e-9 and min(r["label"]) >= 0
        assert (tmp_path / "o" / r["mixed_path"]).exists()
        if method == "cutmix":
            num, den = r["area_frac"]
            assert (128 * 128 * num) % den == 0
