import numpy as np
import pytest

from aitvseg.errors import DimensionError, InfeasibleError, ParameterError
from aitvseg.metrics import dice_per_region, match_labels, apply_permutation
from aitvseg.phantoms import two_value_phantom
from aitvseg.segment import (
    ClampWarning,
    Segmentation,
    cluster_means,
    kmeans,
    lift_and_stack,
    piecewise_constant,
    rgb_to_lab,
    sat_pipeline,
    slat_pipeline,
    threshold_grayscale,
    thread_count,
)
from aitvseg.solver import AdmmConfig
from aitvseg.spectral import identity_kernel

from oracles import kmeans_1d_exhaustive


# --------------------------------------------------------------------------- k-means


def test_kmeans_k1_is_mean(rng):
    pts = rng.normal(size=(50, 3))
    c, labels = kmeans(pts, 1)
    np.testing.assert_allclose(c[0], pts.mean(axis=0))
    assert not labels.any()


def test_kmeans_separated_clouds(rng):
    a = rng.uniform(-0.1, 0.1, (40, 2))
    b = 10 + rng.uniform(-0.1, 0.1, (60, 2))
    pts = np.vstack((a, b))
    _, labels = kmeans(pts, 2, seed=3)
    truth = np.r_[np.zeros(40, int), np.ones(60, int)]
    assert (labels == truth).all() or (labels == 1 - truth).all()


def test_kmeans_deterministic(rng):
    pts = rng.normal(size=(200, 2))
    a = kmeans(pts, 4, seed=5)
    b = kmeans(pts, 4, seed=5)
    np.testing.assert_array_equal(a[1], b[1])
    np.testing.assert_array_equal(a[0], b[0])


def test_kmeans_centroids_are_member_means(rng):
    pts = rng.normal(size=(300, 3))
    c, labels = kmeans(pts, 5, seed=1)
    for k in range(5):
        np.testing.assert_allclose(c[k], pts[labels == k].mean(axis=0), atol=1e-12)


def test_kmeans_wcss_non_increasing(rng):
    pts = rng.normal(size=(500, 2))
    _, _, hist = kmeans(pts, 6, seed=2, restarts=1, return_history=True)
    assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))


def test_kmeans_infeasible():
    with pytest.raises(InfeasibleError):
        kmeans(np.array([[1.0], [1.0], [2.0]]), 3)


def test_kmeans_exactly_k_distinct_points():
    _, labels = kmeans(np.array([[0.0], [5.0], [0.0], [9.0]]), 3, seed=0)
    assert len(set(labels.tolist())) == 3
    assert labels[0] == labels[2]


def test_kmeans_bad_k():
    with pytest.raises(ParameterError):
        kmeans(np.zeros((4, 1)), 0)


def test_kmeans_matches_1d_exhaustive(rng):
    vals = np.concatenate([rng.normal(m, 0.3, 15) for m in (0, 2, 3, 7)])
    for K in (2, 3):
        sse_ref, _ = kmeans_1d_exhaustive(vals, K)
        c, labels = kmeans(vals[:, None], K, seed=0)
        sse = float(((vals - c[labels, 0]) ** 2).sum())
        assert sse == pytest.approx(sse_ref, rel=1e-9)


# --------------------------------------------------------------------------- grayscale thresholding


def test_threshold_two_values():
    img, _, _ = two_value_phantom(16, 16)
    seg = threshold_grayscale(img, 2)
    np.testing.assert_array_equal(seg.labels, np.where(img == 0.8, 2, 1))
    np.testing.assert_allclose(seg.centroids[:, 0], [0.2, 0.8])


def test_threshold_merges_nearest_groups():
    img = np.repeat([0.0, 0.1, 1.0], 10).reshape(5, 6)
    seg = threshold_grayscale(img, 2)
    sse_ref, _ = kmeans_1d_exhaustive(img.ravel(), 2)
    assert (seg.labels[img < 0.5] == 1).all() and (seg.labels[img == 1.0] == 2).all()
    fitted = seg.centroids[seg.labels - 1, 0]
    assert float(((img - fitted) ** 2).sum()) == pytest.approx(sse_ref)


def test_threshold_ascending(rng):
    seg = threshold_grayscale(rng.uniform(size=(20, 20)), 5, seed=4)
    assert np.all(np.diff(seg.centroids[:, 0]) > 0)


def test_threshold_constant_image():
    with pytest.raises(InfeasibleError):
        threshold_grayscale(np.full((4, 4), 0.3), 2)
    seg = threshold_grayscale(np.full((4, 4), 0.3), 1)
    assert (seg.labels == 1).all()


# --------------------------------------------------------------------------- Lab


def _rgb(r, g, b):
    return np.array([r, g, b], dtype=float).reshape(3, 1, 1)


def test_lab_white_and_black():
    L, a, b = rgb_to_lab(_rgb(1, 1, 1))[:, 0, 0]
    assert L == pytest.approx(100, abs=1e-9) and abs(a) <= 0.01 and abs(b) <= 0.01
    np.testing.assert_allclose(rgb_to_lab(_rgb(0, 0, 0))[:, 0, 0], 0, atol=1e-12)


def test_lab_neutral_axis():
    levels = np.linspace(0, 1, 16)
    img = np.broadcast_to(levels, (3, 1, 16))
    lab = rgb_to_lab(img)
    assert np.abs(lab[1:]).max() <= 0.01


def test_lab_pure_red():
    L, a, b = rgb_to_lab(_rgb(1, 0, 0))[:, 0, 0]
    assert (L, a, b) == pytest.approx((53.2408, 80.0925, 67.2032), abs=2e-3)


def test_lab_against_skimage(rng):
    skc = pytest.importorskip("skimage.color")
    img = rng.uniform(size=(3, 8, 9))
    ref = np.moveaxis(skc.rgb2lab(np.moveaxis(img, 0, -1)), -1, 0)
    np.testing.assert_allclose(rgb_to_lab(img), ref, atol=0.02)


def test_lab_clamps_with_warning():
    with pytest.warns(ClampWarning, match="2"):
        lab = rgb_to_lab(np.array([1.2, -0.1, 0.5]).reshape(3, 1, 1))
    np.testing.assert_allclose(lab, rgb_to_lab(_rgb(1, 0, 0.5)))


def test_lift_constant_colour():
    six = lift_and_stack(np.broadcast_to(_rgb(0.3, 0.5, 0.7), (3, 4, 5)))
    assert six.shape == (6, 4, 5)
    assert not six.any()


def test_lift_normalises_each_channel(rng):
    six = lift_and_stack(rng.uniform(size=(3, 10, 10)))
    assert six.shape == (6, 10, 10)
    np.testing.assert_allclose(six.reshape(6, -1).min(axis=1), 0)
    np.testing.assert_allclose(six.reshape(6, -1).max(axis=1), 1)


# --------------------------------------------------------------------------- regions


def test_segmentation_validates_labels():
    with pytest.raises(ParameterError):
        Segmentation(np.array([[0, 1]]), np.zeros((2, 1)))
    with pytest.raises(DimensionError):
        Segmentation(np.array([1, 2]), np.zeros((2, 1)))
    seg = Segmentation(np.array([[1, 2], [2, 2]]), [0.1, 0.9])
    assert seg.K == 2 and seg.d == 1
    masks = seg.masks()
    assert sum(m.sum() for m in masks) == 4 and not (masks[0] & masks[1]).any()


def test_piecewise_constant_k1():
    seg = Segmentation(np.ones((3, 4), int), [[0.4]])
    np.testing.assert_array_equal(piecewise_constant(seg), np.full((1, 3, 4), 0.4))


def test_piecewise_values_are_centroids(rng):
    labels = rng.integers(1, 4, (6, 6))
    cents = rng.uniform(size=(3, 2))
    out = piecewise_constant(Segmentation(labels, cents))
    assert out.shape == (2, 6, 6)
    for ch in range(2):
        assert set(np.unique(out[ch])) <= set(cents[:, ch])


def test_repaint_then_recluster_is_fixed_point(rng):
    img = rng.uniform(size=(12, 12))
    seg = threshold_grayscale(img, 3, seed=1)
    again = threshold_grayscale(piecewise_constant(seg)[0], 3, seed=1)
    np.testing.assert_array_equal(again.labels, seg.labels)


def test_cluster_means(rng):
    img = rng.uniform(size=(2, 5, 5))
    labels = rng.integers(1, 3, (5, 5))
    labels[0, 0], labels[0, 1] = 1, 2
    m = cluster_means(img, labels, 2)
    np.testing.assert_allclose(m[1], img[:, labels == 2].mean(axis=1))
    with pytest.raises(InfeasibleError):
        cluster_means(img, np.ones((5, 5), int), 2)


# --------------------------------------------------------------------------- pipelines


def test_sat_noiseless_two_value():
    img, gt, _ = two_value_phantom(32, 32)
    res = sat_pipeline(img, identity_kernel(), AdmmConfig(lam=20, mu=0.1, alpha=0.5), 2)
    assert dice_per_region(res.segmentation.labels, gt, 2) == [1.0, 1.0]
    assert res.f_tilde.shape == (32, 32)


def test_sat_recovers_all_phases():
    img = np.repeat(np.repeat(np.array([[0.1, 0.4], [0.7, 1.0]]), 8, 0), 8, 1)
    gt = np.searchsorted([0.1, 0.4, 0.7, 1.0], img) + 1
    res = sat_pipeline(img, identity_kernel(), AdmmConfig(lam=50, mu=0.1, alpha=0.5), 4)
    np.testing.assert_array_equal(res.segmentation.labels, gt)


def test_sat_deterministic(rng):
    f = rng.poisson(20 * two_value_phantom(24, 24)[0]) / 20.0
    cfg = AdmmConfig(lam=5, mu=1, alpha=0.6)
    a = sat_pipeline(f, identity_kernel(), cfg, 2, seed=3)
    b = sat_pipeline(f, identity_kernel(), cfg, 2, seed=3)
    np.testing.assert_array_equal(a.segmentation.labels, b.segmentation.labels)
    np.testing.assert_array_equal(a.f_tilde, b.f_tilde)


def test_sat_rejects_colour():
    with pytest.raises(DimensionError):
        sat_pipeline(np.ones((3, 4, 4)), identity_kernel(), AdmmConfig(lam=1, mu=1), 2)


def test_slat_constant_colour_k1():
    img = np.broadcast_to(_rgb(0.3, 0.6, 0.2), (3, 8, 8)).copy()
    res = slat_pipeline(img, identity_kernel(), AdmmConfig(lam=1.5, mu=0.05, alpha=0.6), 1)
    assert (res.segmentation.labels == 1).all()
    np.testing.assert_allclose(res.f_tilde, img, atol=1e-3)


def test_slat_two_colours(monkeypatch):
    _, gt, _ = two_value_phantom(24, 24)
    img = np.where(gt == 2, _rgb(0.9, 0.2, 0.1), _rgb(0.1, 0.3, 0.8))
    cfg = AdmmConfig(lam=20, mu=0.05, alpha=0.6)
    res = slat_pipeline(img, identity_kernel(), cfg, 2)
    mapping = match_labels(res.segmentation.labels, gt, 2)
    np.testing.assert_array_equal(apply_permutation(res.segmentation.labels, mapping), gt)
    assert res.f_tilde.shape == (3, 24, 24)
    assert res.segmentation.d == 6

    monkeypatch.setenv("AITVSEG_THREADS", "3")
    threaded = slat_pipeline(img, identity_kernel(), cfg, 2)
    np.testing.assert_array_equal(threaded.segmentation.labels, res.segmentation.labels)
    np.testing.assert_array_equal(threaded.f_tilde, res.f_tilde)


def test_thread_count(monkeypatch):
    monkeypatch.delenv("AITVSEG_THREADS", raising=False)
    assert thread_count() == 1
    monkeypatch.setenv("AITVSEG_THREADS", "0")
    assert thread_count() == 1
    monkeypatch.setenv("AITVSEG_THREADS", "x")
    with pytest.raises(ParameterError):
        thread_count()
