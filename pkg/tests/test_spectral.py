import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from dispinn.spectral import (fft_convolve, hilbert_line, hilbert_periodic, periodic_kernel,
                              periodic_matrix)


def direct_circular(a, b):
    n = len(a)
    return np.array([sum(a[j] * b[(i - j) % n] for j in range(n)) for i in range(n)])


def direct_periodic(values, L):
    """(1/2N) sum over distinct nodes l != i of cot(pi (x_i - x_l) / 2L) v_l."""
    n_half = (len(values) - 1) // 2
    x = np.arange(-n_half, n_half + 1) * L / n_half
    core = np.concatenate([[0.5 * (values[0] + values[-1])], values[1:-1]])
    xs = x[:-1]
    out = np.zeros(len(xs))
    for i in range(len(xs)):
        for l in range(len(xs)):
            if i != l:
                out[i] += core[l] / np.tan(np.pi * (xs[i] - xs[l]) / (2 * L))
    out /= 2 * n_half
    return np.append(out, out[0])


def direct_line(values):
    n = len(values)
    return np.array([sum(values[l] / (np.pi * (i - l)) for l in range(n) if l != i) for i in range(n)])


def test_impulse_is_identity():
    a = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
    b = np.array([0.3, -1.0, 2.0, 0.5, 4.0])
    np.testing.assert_allclose(fft_convolve(a, b), b, atol=1e-14)


def test_length_four_direct_sum():
    a = np.array([1.0, 2.0, 3.0, 4.0])
    b = np.array([0.5, -1.0, 0.0, 2.0])
    np.testing.assert_allclose(fft_convolve(a, b), direct_circular(a, b), atol=1e-13)


def test_convolution_length_mismatch():
    with pytest.raises(ValueError):
        fft_convolve(np.ones(3), np.ones(4))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(0, 2 ** 31 - 1), st.floats(-3, 3))
def test_convolution_linear_and_matches_direct(n, seed, s):
    rng = np.random.default_rng(seed)
    a, b, c = rng.normal(size=(3, n))
    np.testing.assert_allclose(fft_convolve(a, b), direct_circular(a, b), atol=1e-11)
    np.testing.assert_allclose(fft_convolve(a + s * c, b), fft_convolve(a, b) + s * fft_convolve(c, b),
                               atol=1e-11)


def test_constant_has_zero_transform():
    out = hilbert_periodic(np.full(65, 3.0), 15.0)
    assert np.max(np.abs(out)) < 1e-12


def test_sine_goes_to_minus_cosine():
    N, L = 256, 15.0
    x = np.arange(-N, N + 1) * L / N
    k = np.pi / L
    out = hilbert_periodic(np.sin(k * x), L, k * np.cos(k * x))
    assert np.max(np.abs(out + np.cos(k * x))) < 1e-3


def test_verbatim_sum_has_first_order_defect():
    # without the singular-cell term the sum returns -(1 - 1/N) cos
    N, L = 256, 15.0
    x = np.arange(-N, N + 1) * L / N
    out = hilbert_periodic(np.sin(np.pi * x / L), L)
    np.testing.assert_allclose(out, -(1 - 1 / N) * np.cos(np.pi * x / L), atol=1e-12)


@pytest.mark.parametrize("mode", [1, 3, 17, 100])
def test_corrected_sum_exact_below_nyquist(mode):
    N, L = 128, 7.0
    x = np.arange(-N, N + 1) * L / N
    k = mode * np.pi / L
    out = hilbert_periodic(np.cos(k * x), L, -k * np.sin(k * x))
    np.testing.assert_allclose(out, np.sin(k * x), atol=1e-11)


def test_fft_matches_direct_sum():
    rng = np.random.default_rng(3)
    N, L = 32, 15.0
    v = rng.normal(size=2 * N + 1)
    v[-1] = v[0]
    np.testing.assert_allclose(hilbert_periodic(v, L), direct_periodic(v, L), rtol=0, atol=1e-12)


def test_line_fft_matches_direct_sum():
    rng = np.random.default_rng(4)
    v = rng.normal(size=41)
    np.testing.assert_allclose(hilbert_line(v, 10.0), direct_line(v), rtol=0, atol=1e-12)


def test_antisymmetry():
    A = periodic_matrix(16, 15.0)
    assert np.array_equal(A.T, -A)
    assert np.array_equal(periodic_kernel(16, 15.0)[1:], -periodic_kernel(16, 15.0)[1:][::-1])


def test_matrix_matches_transform():
    rng = np.random.default_rng(5)
    N = 16
    v = rng.normal(size=2 * N)
    full = np.append(v, v[0])
    np.testing.assert_allclose(hilbert_periodic(full, 15.0)[:-1], periodic_matrix(N, 15.0) @ v, atol=1e-13)


def test_line_zero_input():
    assert np.count_nonzero(hilbert_line(np.zeros(33), 10.0)) == 0


def test_line_preserves_oddness():
    # even input gives odd output
    N, L = 512, 20.0
    x = np.arange(-N, N + 1) * L / N
    out = hilbert_line(1 / np.cosh(x) ** 2, L)
    assert np.max(np.abs(out + out[::-1])) < 1e-6


def _line_oracle(f, L, x):
    # scipy's Cauchy weight gives p.v. int f(y) / (y - x) dy
    return np.array([-quad(f, -L, L, weight="cauchy", wvar=xi, limit=200)[0] / np.pi for xi in x])


def test_line_against_pv_quadrature():
    f = lambda y: 1 / (1 + y ** 2)
    df = lambda y: -2 * y / (1 + y ** 2) ** 2
    N, L = 256, 10.0
    x = np.arange(-N, N + 1) * L / N
    ref = _line_oracle(f, L, x[1:-1])
    got = hilbert_line(f(x), L, df(x))[1:-1]
    assert np.max(np.abs(got - ref)) / np.max(np.abs(ref)) < 1e-2


def test_line_first_order_trend():
    f = lambda y: 1 / (1 + y ** 2)
    L = 10.0
    errs = []
    for N in (64, 128):
        x = np.arange(-N, N + 1) * L / N
        ref = _line_oracle(f, L, x[1:-1])
        errs.append(np.max(np.abs(hilbert_line(f(x), L)[1:-1] - ref)))
    assert 1.8 < errs[0] / errs[1] < 2.2


def test_line_extension_too_short():
    with pytest.raises(ValueError):
        hilbert_line(np.zeros(9), 1.0, extension=1)


def test_even_node_count_rejected():
    with pytest.raises(ValueError):
        hilbert_periodic(np.zeros(8), 1.0)


def test_jax_path_matches_numpy():
    rng = np.random.default_rng(6)
    v = rng.normal(size=(3, 65))
    d = rng.normal(size=(3, 65))
    np.testing.assert_allclose(np.asarray(hilbert_periodic(jnp.asarray(v), 15.0, jnp.asarray(d))),
                               hilbert_periodic(v, 15.0, d), atol=1e-13)
    np.testing.assert_allclose(np.asarray(hilbert_line(jnp.asarray(v), 15.0)), hilbert_line(v, 15.0),
                               atol=1e-13)


def test_batched_slices_independent():
    rng = np.random.default_rng(7)
    v = rng.normal(size=(4, 33))
    batched = hilbert_periodic(v, 5.0)
    for i in range(4):
        np.testing.assert_allclose(batched[i], hilbert_periodic(v[i], 5.0), atol=1e-14)
