
import numpy as np
import pytest

from facemixup.errors import ConfigError, DimensionMismatch, EmptyDataset
from facemixup.landmarks import FaceImage
from facemixup.trainer import (
    FACEMIX,
    METHODS,
    REAL,
    BatchAssembler,
    LabeledFaces,
    LinearModel,
    MomentumSGD,
    TrainConfig,
    build_mixed_faces,
    evaluate,
    featurize,
    forward,
    gradient,
    load_model,
    loss_and_gradient,
    reference_loss,
    save_model,
    train,
)
from oracles import central_difference

SMALL = (8, 8)


@pytest.fixture(scope="module")
def small_set(faces):
    return LabeledFaces([f[0] for f in faces], [f[2] for f in faces], [f[1] for f in faces])


@pytest.fixture(scope="module")
def small_mixed(small_set):
    return build_mixed_faces(small_set, 10, seed=4)


# ---- featurize / forward


def test_featurize_white_rgb():
    img = FaceImage(np.full((16, 16, 3), 255, np.uint8))
    assert np.allclose(featurize(img, (4, 4)), 1.0, atol=1e-12)


def test_featurize_black():
    assert np.all(featurize(FaceImage(np.zeros((16, 16), np.uint8)), (4, 4)) == 0)


def test_featurize_checker_average():
    img = FaceImage(np.array([[0, 255], [255, 0]], np.uint8))
    v = featurize(img, (1, 1))
    assert v.shape == (1,) and abs(v[0] - 0.5) <= 1 / 255


def test_featurize_non_divisible_area():
    # 3 -> 2 columns: weights (1, .5) and (.5, 1) over 1.5 width
    img = FaceImage(np.array([[0, 255, 255]], np.uint8))
    v = featurize(img, (2, 1))
    assert np.allclose(v, [(0 + 0.5) / 1.5, 1.0])


def test_featurize_row_major():
    px = np.zeros((4, 4), np.uint8)
    px[:2, 2:] = 255  # top-right block
    assert featurize(FaceImage(px), (2, 2)).tolist() == [0.0, 1.0, 0.0, 0.0]


def test_forward_zero_model_uniform():
    m = LinearModel(np.zeros((4, 5)), np.zeros(4))
    assert np.allclose(forward(m, np.ones(5)), 0.25)


def test_forward_sums_to_one_and_shift_invariant(rng):
    m = LinearModel(rng.normal(0, 3, (5, 7)), rng.normal(0, 3, 5))
    for _ in range(50):
        x = rng.normal(0, 2, 7)
        p = forward(m, x)
        assert abs(p.sum() - 1) <= 1e-9
        shifted = LinearModel(m.weights, m.bias + 123.4)
        assert np.allclose(forward(shifted, x), p, atol=1e-9)


def test_forward_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        forward(LinearModel(np.zeros((2, 3)), np.zeros(2)), np.zeros(4))


# ---- gradients


def make_batch(method, small_set, small_mixed, seed=0, n=8):
    cfg = TrainConfig(method=method, downsample=SMALL, seed=seed, W=7.9, weight_decay=1e-3)
    asm = BatchAssembler(cfg, small_set, small_mixed, 3)
    items = asm.items()
    rng = np.random.default_rng(seed)
    # make sure batches of mixed methods contain mixed elements
    mixed_items = [it for it in items if it[0] == 1]
    real_items = [it for it in items if it[0] == 0]
    chunk = real_items[: n // 2] + (mixed_items[: n // 2] if mixed_items else real_items[n // 2: n])
    return cfg, asm.build(chunk, rng)


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


@pytest.mark.parametrize("method", METHODS)
def test_gradient_matches_finite_differences(method, small_set, small_mixed):
    cfg, batch = make_batch(method, small_set, small_mixed)
    rng = np.random.default_rng(METHODS.index(method))
    for _ in range(5):
        model = LinearModel(rng.normal(0, 0.5, (3, 64)), rng.normal(0, 0.5, 3))
        dw, db = gradient(model, batch, cfg)
        f = lambda: reference_loss(model, batch, cfg)
        fd_w = central_difference(f, model.weights)
        fd_b = central_difference(f, model.bias)
        assert rel_err(dw, fd_w) < 1e-4
        assert rel_err(db, fd_b) < 1e-4


@pytest.mark.parametrize("method", METHODS)
def test_vectorised_loss_matches_reference(method, small_set, small_mixed, rng):
    cfg, batch = make_batch(method, small_set, small_mixed, seed=3)
    model = LinearModel(rng.normal(0, 0.5, (3, 64)), rng.normal(0, 0.5, 3))
    loss, _, _ = loss_and_gradient(model, batch, cfg.weight_decay)
    assert loss == pytest.approx(reference_loss(model, batch, cfg), rel=1e-12)


def test_batch_kinds(small_set, small_mixed):
    _, b = make_batch("facemixup", small_set, small_mixed)
    assert set(b.kind.tolist()) == {REAL, FACEMIX}
    _, b = make_batch("vanilla_mixedfaces", small_set, small_mixed)
    assert set(b.kind.tolist()) == {REAL}
    mixed_rows = [i for i in range(len(b))][4:]
    for n, i in zip(mixed_rows, range(4)):
        assert np.argmax(b.y1[n]) == small_mixed.label_receiver[i]


def test_perfect_prediction_has_no_data_gradient(small_set, small_mixed):
    from facemixup.trainer import Batch

    cfg, batch = make_batch("vanilla", small_set, small_mixed)
    cfg.weight_decay = 0.0
    # keep one class, then a large bias on it drives p -> y
    target = batch.y1[0]
    idx = [i for i in range(len(batch)) if np.array_equal(batch.y1[i], target)]
    sub = Batch(*(getattr(batch, f)[idx] for f in Batch.__dataclass_fields__))
    model = LinearModel(np.zeros((3, 64)), np.where(target > 0, 60.0, 0.0))
    dw, db = gradient(model, sub, cfg)
    assert np.abs(dw).max() < 1e-20 and np.abs(db).max() < 1e-20


def test_facemixup_gradient_is_weighted_sum(small_set, small_mixed, rng):
    cfg, batch = make_batch("facemixup", small_set, small_mixed)
    cfg.weight_decay = 0.0
    model = LinearModel(rng.normal(0, 0.3, (3, 64)), rng.normal(0, 0.3, 3))
    dw, db = gradient(model, batch, cfg)
    # recompute each element's gradient as gamma/W * grad CE(y_s) + (1 - gamma/W) * grad CE(y_r)
    ew, eb = np.zeros_like(dw), np.zeros_like(db)
    for i in range(len(batch)):
        p = forward(model, batch.x[i])
        if batch.kind[i] == FACEMIX:
            w = batch.gamma[i] / cfg.W
            g = w * (p - batch.y1[i]) + (1 - w) * (p - batch.y2[i])
        else:
            g = p - batch.y1[i]
        ew += np.outer(g, batch.x[i])
        eb += g
    assert np.allclose(dw, ew / len(batch), atol=1e-14)
    assert np.allclose(db, eb / len(batch), atol=1e-14)


def test_momentum_zero_is_plain_gradient_descent(rng):
    m = LinearModel(rng.normal(size=(3, 4)), rng.normal(size=3))
    before = m.copy()
    opt = MomentumSGD(0.1, 0.0)
    grads = [(rng.normal(size=(3, 4)), rng.normal(size=3)) for _ in range(5)]
    for dw, db in grads:
        expected_w, expected_b = m.weights - 0.1 * dw, m.bias - 0.1 * db
        opt.step(m, dw, db)
        assert np.array_equal(m.weights, expected_w) and np.array_equal(m.bias, expected_b)
    assert not np.array_equal(m.weights, before.weights)


def test_momentum_accumulates():
    m = LinearModel(np.zeros((1, 1)), np.zeros(1))
    opt = MomentumSGD(1.0, 0.5)
    opt.step(m, np.ones((1, 1)), np.zeros(1))
    opt.step(m, np.ones((1, 1)), np.zeros(1))
    assert m.weights[0, 0] == -(1 + 1.5)


# ---- training


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(method="bogus").validate()
    with pytest.raises(ConfigError):
        TrainConfig(momentum=1.0).validate()
    with pytest.raises(ConfigError):
        TrainConfig.from_dict({"lr": 0.1, "colour": 1})
    cfg = TrainConfig.from_dict(TrainConfig(method="mixup", lr=0.5).to_dict())
    assert cfg.method == "mixup" and cfg.lr == 0.5


def test_config_defaults_follow_protocol():
    cfg = TrainConfig()
    assert (cfg.momentum, cfg.weight_decay, cfg.batch_size, cfg.lr, cfg.W) == (0.9, 1e-4, 64, 1e-2, 7.9)


def test_zero_epochs_returns_init(small_set):
    cfg = TrainConfig(epochs=0, downsample=SMALL, seed=5)
    model, rep = train(cfg, small_set)
    init = LinearModel.init(3, 64, 5)
    assert np.array_equal(model.weights, init.weights) and np.array_equal(model.bias, init.bias)
    assert rep.accuracy == evaluate(init, small_set, SMALL).accuracy
    assert rep.accuracy_curve == [] and rep.loss_curve == []


@pytest.mark.parametrize("method", METHODS)
def test_training_is_deterministic(method, small_set):
    cfg = TrainConfig(method=method, epochs=2, downsample=SMALL, seed=2, batch_size=5, mixed_ratio=1.0)
    m1, r1 = train(cfg, small_set)
    m2, r2 = train(cfg, small_set, threads=4)
    assert np.array_equal(m1.weights, m2.weights) and np.array_equal(m1.bias, m2.bias)
    assert r1.to_dict() == r2.to_dict()
    assert len(r1.accuracy_curve) == len(r1.loss_curve) == 2


def test_linearly_separable_vanilla():
    rng = np.random.default_rng(0)
    imgs, labels = [], []
    for i in range(80):
        c = i % 2
        px = rng.integers(0, 60, (8, 8), dtype=np.uint8)
        if c:
            px[:, 4:] += 150
        else:
            px[:, :4] += 150
        imgs.append(FaceImage(px))
        labels.append(c)
    data = LabeledFaces(imgs, labels)
    _, rep = train(TrainConfig(epochs=50, downsample=(8, 8), batch_size=16), data)
    assert rep.accuracy >= 0.95


def test_train_empty():
    with pytest.raises(EmptyDataset):
        train(TrainConfig(), LabeledFaces([], []))


# ---- evaluation


def test_evaluate_perfect_model():
    imgs = [FaceImage(np.full((2, 2), v, np.uint8)) for v in (0, 255, 0, 255)]
    data = LabeledFaces(imgs, [0, 1, 0, 1])
    model = LinearModel(np.array([[-10.0], [10.0]]), np.array([5.0, 0.0]))
    rep = evaluate(model, data, (1, 1))
    assert rep.accuracy == 1.0 and rep.confusion == [[2, 0], [0, 2]]


@pytest.mark.parametrize("k", [2, 3, 5])
def test_evaluate_constant_model(k):
    imgs = [FaceImage(np.zeros((2, 2), np.uint8))] * (4 * k)
    labels = [i % k for i in range(4 * k)]
    model = LinearModel(np.zeros((k, 1)), np.zeros(k))  # all ties -> class 0
    rep = evaluate(model, LabeledFaces(imgs, labels), (1, 1))
    assert rep.accuracy == 1 / k
    assert [sum(r) for r in rep.confusion] == [4] * k
    assert rep.accuracy == np.trace(rep.confusion) / np.sum(rep.confusion)


def test_evaluate_empty():
    with pytest.raises(EmptyDataset):
        evaluate(LinearModel(np.zeros((2, 1)), np.zeros(2)), LabeledFaces([], []), (1, 1))


def test_model_round_trip(tmp_path, rng):
    m = LinearModel(rng.normal(size=(3, 10)), rng.normal(size=3))
    save_model(m, tmp_path / "m.bin", {"method": "vanilla"})
    raw = (tmp_path / "m.bin").read_bytes()
    assert raw[:8] == b"FMXLIN01" and len(raw) == 16 + 8 * 33
    m2, meta = load_model(tmp_path / "m.bin")
    assert np.array_equal(m.weights, m2.weights) and np.array_equal(m.bias, m2.bias)
    assert meta["method"] == "vanilla" and meta["num_classes"] == 3


@pytest.mark.parametrize("method", ["vanilla", "facemixup", "mixup"])
def test_cutout_applies_after_mixing(method, small_set, small_mixed):
    # a square larger than the image blanks every training input
    cfg = TrainConfig(method=method, downsample=SMALL, cutout_side=1000)
    asm = BatchAssembler(cfg.validate(), small_set, small_mixed, 3)
    batch = asm.build(asm.items()[-6:], np.random.default_rng(0))
    assert not batch.x.any()
    if method == "facemixup":
        assert set(batch.kind) == {FACEMIX}


def test_cutout_off_uses_cached_features(small_set):
    cfg = TrainConfig(method="vanilla", downsample=SMALL)
    asm = BatchAssembler(cfg, small_set, None, 3)
    batch = asm.build(asm.items()[:4], np.random.default_rng(0))
    np.testing.assert_array_equal(batch.x, asm.feats[:4])
