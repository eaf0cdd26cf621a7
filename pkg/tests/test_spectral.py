import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aitvseg.errors import DimensionError, NumericalError, ParameterError
from aitvseg.grid import divergence_adjoint, gradient
from aitvseg.spectral import (
    ConvKernel,
    SpectralKernel,
    circular_convolve,
    gaussian_kernel,
    identity_kernel,
    kernel_spectrum,
    laplacian_spectrum,
    motion_kernel,
    parse_kernel,
)

from oracles import naive_circular_convolve


@pytest.mark.parametrize("shape,sigma", [((3, 3), 0.5), ((10, 10), 2.0), ((4, 7), 1.3), ((1, 1), 1.0)])
def test_gaussian_sums_to_one(shape, sigma):
    k = gaussian_kernel(*shape, sigma)
    assert k.taps.sum() == pytest.approx(1.0, abs=1e-12)
    assert k.taps.shape == shape


def test_gaussian_flat_limit():
    np.testing.assert_allclose(gaussian_kernel(3, 3, 1e6).taps, 1 / 9, atol=1e-9)


def test_gaussian_3x3_half_sigma():
    # edge taps exp(-1/(2*0.25)) = e^-2, corners e^-4
    Z = 1 + 4 * math.exp(-2) + 4 * math.exp(-4)
    t = gaussian_kernel(3, 3, 0.5).taps
    assert t[1, 1] == pytest.approx(1 / Z, rel=1e-14)
    assert t[0, 0] == pytest.approx(math.exp(-4) / Z, rel=1e-14)
    assert t[1, 1] == pytest.approx(0.619347, abs=1e-6)


def test_gaussian_even_size_uses_half_integer_grid():
    t = gaussian_kernel(10, 10, 2.0).taps
    np.testing.assert_allclose(t, t[::-1, ::-1], atol=1e-15)
    # the four central taps sit at (+-0.5, +-0.5) and are equal and largest
    assert t[4, 4] == t[5, 5] == t.max()
    assert t[4, 4] / t[4, 5] == pytest.approx(1.0)
    assert t[4, 4] / t[4, 6] == pytest.approx(math.exp(2 / 8))


def test_gaussian_rejects_bad_sigma():
    with pytest.raises(ParameterError):
        gaussian_kernel(3, 3, 0.0)


def test_motion_horizontal():
    k = motion_kernel(5, 0)
    assert k.taps.shape == (1, 5)
    np.testing.assert_allclose(k.taps, 0.2, atol=1e-15)


def test_motion_length_one_is_identity():
    np.testing.assert_array_equal(motion_kernel(1, 37).taps, [[1.0]])


@pytest.mark.parametrize("angle", [0, 30, 45, 90, 135, 200])
def test_motion_point_symmetric(angle):
    t = motion_kernel(5, angle).taps
    assert t.sum() == pytest.approx(1.0, abs=1e-12)
    assert (t >= 0).all()
    np.testing.assert_allclose(t, t[::-1, ::-1], atol=1e-15)


def test_motion_opposite_angles_agree():
    np.testing.assert_array_equal(motion_kernel(5, 225).taps, motion_kernel(5, 45).taps)


def test_motion_45_runs_along_antidiagonal():
    # counterclockwise 45 degrees with rows pointing down: mass on row + col = const
    t = motion_kernel(5, 45).taps
    r, c = np.indices(t.shape)
    rc, cc = (t.shape[0] - 1) / 2, (t.shape[1] - 1) / 2
    cov = float((t * (r - rc) * (c - cc)).sum())
    assert cov < 0
    assert t.shape == (5, 5)


def test_motion_vertical():
    t = motion_kernel(3, 90).taps
    assert t.shape == (3, 1)
    np.testing.assert_allclose(t.ravel(), 1 / 3, atol=1e-15)


def test_motion_rejects_short_length():
    with pytest.raises(ParameterError):
        motion_kernel(0.5, 0)


def test_identity_convolution_is_bitwise(rng):
    u = rng.normal(size=(7, 9))
    spec = kernel_spectrum(identity_kernel(), 7, 9)
    np.testing.assert_array_equal(spec.multipliers, np.ones((7, 9)))
    np.testing.assert_allclose(circular_convolve(u, spec), u, atol=1e-12)


def test_identity_composes_with_gaussian():
    g = kernel_spectrum(gaussian_kernel(5, 5, 1.0), 16, 16)
    i = kernel_spectrum(identity_kernel(), 16, 16)
    np.testing.assert_allclose(g.multipliers * i.multipliers, g.multipliers, atol=1e-12)


def test_dc_gain_of_blur():
    for k in (gaussian_kernel(10, 10, 2), motion_kernel(5, 225)):
        spec = kernel_spectrum(k, 32, 32)
        assert abs(spec.dc - 1.0) <= 1e-12
        assert np.abs(spec.multipliers).max() <= 1 + 1e-12


def test_random_3x3_on_8x8_matches_naive(rng):
    taps = rng.normal(size=(3, 3))
    k = ConvKernel(taps, (1, 1))
    u = rng.normal(size=(8, 8))
    fast = circular_convolve(u, kernel_spectrum(k, 8, 8))
    np.testing.assert_allclose(fast, naive_circular_convolve(u, taps, (1, 1)), atol=1e-10)


@given(
    st.integers(1, 32),
    st.integers(1, 32),
    st.integers(1, 5),
    st.integers(1, 5),
    st.integers(0, 2**32 - 1),
)
def test_convolution_theorem(M, N, K1, K2, seed):
    if K1 > M or K2 > N:
        return
    r = np.random.default_rng(seed)
    taps = r.normal(size=(K1, K2))
    anchor = (int(r.integers(K1)), int(r.integers(K2)))
    u = r.normal(size=(M, N))
    fast = circular_convolve(u, kernel_spectrum(ConvKernel(taps, anchor), M, N))
    slow = naive_circular_convolve(u, taps, anchor)
    np.testing.assert_allclose(fast, slow, atol=1e-9)


def test_delta_under_box_blur_stamps_kernel_with_wrap():
    u = np.zeros((4, 4))
    u[0, 0] = 1.0
    box = ConvKernel(np.full((3, 3), 1 / 9), (1, 1))
    out = circular_convolve(u, kernel_spectrum(box, 4, 4))
    expected = np.zeros((4, 4))
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            expected[di % 4, dj % 4] = 1 / 9
    np.testing.assert_allclose(out, expected, atol=1e-15)


def test_ones_survive_blur():
    out = circular_convolve(np.ones((12, 9)), kernel_spectrum(gaussian_kernel(5, 4, 1.5), 12, 9))
    np.testing.assert_allclose(out, 1.0, atol=1e-12)


def test_kernel_too_large():
    with pytest.raises(DimensionError):
        kernel_spectrum(gaussian_kernel(10, 10, 2), 8, 64)


def test_non_hermitian_spectrum_rejected(rng):
    spec = SpectralKernel(np.full((4, 4), 1j))
    with pytest.raises(NumericalError):
        circular_convolve(rng.normal(size=(4, 4)), spec)


def test_convolve_shape_mismatch():
    with pytest.raises(DimensionError):
        circular_convolve(np.ones((3, 3)), kernel_spectrum(identity_kernel(), 4, 4))


def test_laplacian_entries():
    assert laplacian_spectrum(7, 5).multipliers[0, 0] == 0
    assert laplacian_spectrum(2, 2).multipliers[1, 1].real == -8.0
    lam = laplacian_spectrum(9, 6).multipliers
    assert np.all(lam.imag == 0)
    off = np.ones(lam.shape, bool)
    off[0, 0] = False
    assert np.all(lam.real[off] < 0)


def test_laplacian_matches_div_grad(rng):
    u = rng.normal(size=(10, 13))
    spectral = circular_convolve(u, laplacian_spectrum(10, 13))
    np.testing.assert_allclose(spectral, -divergence_adjoint(gradient(u)), atol=1e-10)


@pytest.mark.parametrize(
    "spec,shape",
    [("identity", (1, 1)), ("gaussian:10x10:2", (10, 10)), ("motion:5:225", (5, 5)), ("GAUSSIAN:3x5:0.7", (3, 5))],
)
def test_parse_kernel(spec, shape):
    assert parse_kernel(spec).taps.shape == shape


def test_parse_kernel_rejects_garbage():
    with pytest.raises(ParameterError, match="gaussian"):
        parse_kernel("box:3")


def test_kernel_taps_are_read_only():
    k = gaussian_kernel(3, 3, 1.0)
    with pytest.raises(ValueError):
        k.taps[0, 0] = 5
