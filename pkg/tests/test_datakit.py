import cv2
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tinymask import datakit
from tinymask.datakit import (
    METHODS,
    DatasetManifest,
    Entry,
    augment_interpolation,
    augment_manifest,
    augment_standard,
    augmented_count,
    load_dataset,
    resize,
    split,
    synth_dataset,
    write_image,
)
from tinymask.datakit.resize import weight_matrix
from tinymask.errors import DataError

CV2_FLAGS = {
    "nearest": cv2.INTER_NEAREST_EXACT,
    "bilinear": cv2.INTER_LINEAR,
    "bicubic": cv2.INTER_CUBIC,
    "area": cv2.INTER_AREA,
    "lanczos4": cv2.INTER_LANCZOS4,
}


def test_resize_examples():
    img = np.random.default_rng(0).integers(0, 256, (32, 32, 3), dtype=np.uint8)
    assert np.array_equal(resize(img, (32, 32), "bilinear"), img)
    block = np.array([[10, 20], [30, 40]], np.uint8)[:, :, None]
    assert resize(block, (1, 1), "area").item() == 25
    assert (resize(np.full((1, 1, 1), 7, np.uint8), (2, 2), "nearest") == 7).all()


@pytest.mark.parametrize("method", METHODS)
def test_resize_identity_all_methods(method):
    img = np.random.default_rng(1).integers(0, 256, (32, 32, 3), dtype=np.uint8)
    assert np.array_equal(resize(img, (32, 32), method), img)


@pytest.mark.parametrize("method", METHODS)
def test_weight_rows_sum_to_one(method):
    for n_in, n_out in [(64, 32), (20, 32), (7, 3), (1, 5)]:
        np.testing.assert_allclose(weight_matrix(n_in, n_out, method).sum(axis=1), 1.0)


@pytest.mark.parametrize("method", METHODS)
@pytest.mark.parametrize("shape", [(64, 64, 3), (48, 80, 3), (20, 24, 3), (96, 40, 1), (100, 70, 3)])
def test_resize_matches_opencv(method, shape):
    # OpenCV uses fixed-point weights for uint8, hence the 1-level tolerance
    img = np.random.default_rng(sum(shape)).integers(0, 256, shape, dtype=np.uint8)
    ref = cv2.resize(img, (32, 32), interpolation=CV2_FLAGS[method])
    if ref.ndim == 2:
        ref = ref[:, :, None]
    assert np.abs(resize(img, (32, 32), method).astype(int) - ref).max() <= 1


def test_resize_unknown_method():
    with pytest.raises(ValueError):
        resize(np.zeros((4, 4, 1), np.uint8), (2, 2), "spline")


def test_augment_interpolation_outputs():
    img = np.random.default_rng(0).integers(0, 256, (50, 40, 3), dtype=np.uint8)
    out = augment_interpolation(img)
    assert [m for m, _ in out] == list(METHODS)
    assert all(r.shape == (32, 32, 3) and r.dtype == np.uint8 for _, r in out)


def test_augment_constant_image():
    img = np.full((45, 45, 3), 123, np.uint8)
    for _, r in augment_interpolation(img):
        assert (r == 123).all()


def test_augment_counts():
    assert augmented_count(11_792) == 58_960
    assert augmented_count(1) == 5
    assert augmented_count(10, n_standard=2) == 150
    m = synth_dataset(6, seed=0)
    out = augment_manifest(m)
    assert len(out) == 30
    assert out.counts == (15, 15)
    assert len(augment_manifest(m, n_standard=1, seed=4)) == 60


def test_augment_standard_symmetric_flip():
    rng = np.random.default_rng(0)
    half = rng.integers(0, 256, (8, 4, 3), dtype=np.uint8)
    img = np.concatenate([half, half[:, ::-1]], axis=1)
    for seed in range(10):
        assert np.array_equal(augment_standard(img, seed, 1, ops=("flip",))[0], img)


def test_augment_standard_seeded():
    img = np.random.default_rng(0).integers(0, 256, (32, 32, 3), dtype=np.uint8)
    a = augment_standard(img, seed=5, ops_per_image=3)
    b = augment_standard(img, seed=5, ops_per_image=3)
    assert len(a) == 3 and all(np.array_equal(u, v) for u, v in zip(a, b))
    c = augment_standard(img, seed=6, ops_per_image=3)
    assert not all(np.array_equal(u, v) for u, v in zip(a, c))


def test_augment_brightness_bounds():
    img = np.full((8, 8, 3), 100, np.uint8)
    for seed in range(20):
        (v,) = augment_standard(img, seed, 1, ops=("brightness",))
        assert 80 <= v.min() and v.max() <= 120


def _manifest(n_mask, n_no):
    return DatasetManifest([Entry(1, f"m{i}") for i in range(n_mask)] + [Entry(0, f"n{i}") for i in range(n_no)])


def _check_split(m, frac, seed):
    tr, va = split(m, frac, seed)
    ids_tr = {id(e) for e in tr.entries}
    ids_va = {id(e) for e in va.entries}
    assert not ids_tr & ids_va
    assert ids_tr | ids_va == {id(e) for e in m.entries}
    for cls_idx, count in enumerate(m.counts):
        n_val = va.counts[cls_idx]
        assert 1 <= n_val <= count - 1
        assert abs(n_val - count * frac) < 1 or n_val in (1, count - 1)
    if all(1 < v < c - 1 for v, c in zip(va.counts, m.counts)):
        assert len(va) == int(np.floor(len(m) * frac + 1e-9))
    order = {id(e): i for i, e in enumerate(m.entries)}
    for part in (tr, va):
        pos = [order[id(e)] for e in part.entries]
        assert pos == sorted(pos)


def test_split_1000_random_manifests():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        m = _manifest(int(rng.integers(2, 60)), int(rng.integers(2, 60)))
        _check_split(m, float(rng.uniform(0.05, 0.95)), int(rng.integers(1 << 30)))


@given(st.integers(2, 80), st.integers(2, 80), st.floats(0.01, 0.99), st.integers(0, 2**31))
def test_split_property(n_mask, n_no, frac, seed):
    _check_split(_manifest(n_mask, n_no), frac, seed)


def test_split_examples():
    m = _manifest(65_528, 65_527)
    tr, va = split(m, 0.1, 0)
    assert (len(tr), len(va)) == (117_950, 13_105)
    tr, va = split(_manifest(5, 5), 0.5, 0)
    assert (len(tr), len(va)) == (5, 5)
    assert sorted(va.counts) == [2, 3]
    a, b = split(m, 0.1, 3), split(m, 0.1, 3)
    assert [id(e) for e in a[1].entries] == [id(e) for e in b[1].entries]


def test_split_too_few():
    with pytest.raises(DataError):
        split(_manifest(1, 10), 0.2)
    with pytest.raises(DataError):
        split(_manifest(5, 5), 1.0)


def _write_set(root, n_mask, n_no, size=(10, 12)):
    rng = np.random.default_rng(0)
    for cls, n in (("mask", n_mask), ("no_mask", n_no)):
        (root / cls).mkdir(parents=True, exist_ok=True)
        for i in range(n):
            write_image(root / cls / f"{i}.png", rng.integers(0, 256, (*size, 3), dtype=np.uint8))


def test_load_dataset(tmp_path):
    _write_set(tmp_path, 3, 2)
    (tmp_path / "mask" / "broken.png").write_bytes(b"not an image")
    (tmp_path / "mask" / "notes.txt").write_text("ignored")
    m = load_dataset(tmp_path)
    assert m.counts == (3, 2)
    assert [p.name for p, _ in m.skipped] == ["broken.png"]
    again = load_dataset(tmp_path)
    assert [e.path for e in m.entries] == [e.path for e in again.entries]
    x, y = datakit.to_arrays(m)
    assert x.shape == (5, 32, 32, 3) and x.dtype == np.float32 and 0 <= x.min() and x.max() <= 1
    assert y.tolist() == [1, 1, 1, 0, 0]


def test_load_dataset_errors(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path / "missing")
    _write_set(tmp_path, 2, 0)
    with pytest.raises(DataError):
        load_dataset(tmp_path)
    (tmp_path / "no_mask").mkdir(exist_ok=True)
    with pytest.raises(DataError):
        load_dataset(tmp_path)


def test_png_roundtrip(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, (5, 7, 3), dtype=np.uint8)
    write_image(tmp_path / "a.png", img)
    assert np.array_equal(datakit.read_image(tmp_path / "a.png"), img)
    gray = img[:, :, :1]
    write_image(tmp_path / "g.png", gray)
    assert np.array_equal(datakit.read_image(tmp_path / "g.png"), gray)


def test_synth_balance_and_determinism():
    m = synth_dataset(2000, seed=1)
    assert m.counts == (1000, 1000)
    a = synth_dataset(20, seed=9)
    b = synth_dataset(20, seed=9)
    assert all(np.array_equal(u.load(), v.load()) for u, v in zip(a.entries, b.entries))
    assert a.entries[0].load().shape == (32, 32, 3)


def test_synth_linear_probe():
    """Least-squares probe on raw pixels as a separability oracle."""
    m = synth_dataset(2000, seed=1)
    x, y = datakit.to_arrays(m)
    x = x.reshape(len(x), -1).astype(np.float64)
    x = np.hstack([x, np.ones((len(x), 1))])
    t = 2.0 * y - 1
    w, *_ = np.linalg.lstsq(x[:1400], t[:1400], rcond=None)
    acc = np.mean((x[1400:] @ w > 0) == (y[1400:] == 1))
    assert acc >= 0.95


def test_normalize():
    assert datakit.normalize(np.array([0, 255], np.uint8)).tolist() == [0.0, 1.0]
