import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from stratwave.special import bessel_j0, hankel_h1_0


def mp_h0(z):
    with mp.workdps(40):
        return complex(mp.hankel1(0, z))


def test_h0_at_one():
    v = hankel_h1_0(1.0)
    assert v.real == pytest.approx(0.7651976866, abs=1e-10)
    assert v.imag == pytest.approx(0.0882569642, abs=1e-10)


@given(st.floats(1e-3, 500.0))
def test_h0_real_argument_matches_mpmath(x):
    assert abs(hankel_h1_0(x) - mp_h0(x)) <= 1e-12 * abs(mp_h0(x)) + 1e-15


@given(st.floats(1e-3, 600.0))
def test_h0_imaginary_argument_uses_k0(y):
    v = hankel_h1_0(1j * y)
    ref = complex(2 / (1j * mp.pi) * mp.besselk(0, y))
    assert v.real == 0.0
    assert abs(v - ref) <= 1e-12 * abs(ref) + 1e-300


@given(st.floats(0.01, 50.0), st.floats(0.01, 20.0))
def test_h0_general_complex_matches_mpmath(a, b):
    z = complex(a, b)
    assert abs(hankel_h1_0(z) - mp_h0(z)) <= 1e-10 * abs(mp_h0(z))


def test_h0_phase_on_imaginary_axis():
    v = hankel_h1_0(5j)
    assert v.real == 0.0 and v.imag < 0
    assert abs(v) == pytest.approx(2 / np.pi * float(mp.besselk(0, 5)), rel=1e-13)


def test_h0_large_argument_asymptote():
    x = 100.0
    assert abs(hankel_h1_0(x)) == pytest.approx(np.sqrt(2 / (np.pi * x)), rel=1e-3)


def test_h0_rejects_origin_and_left_half_plane():
    with pytest.raises(ZeroDivisionError):
        hankel_h1_0(0.0)
    with pytest.raises(ValueError):
        hankel_h1_0(-1.0 + 0.5j)


def test_vectorized_mixture():
    z = np.array([1.0, 2j, 1 + 1j])
    np.testing.assert_allclose(hankel_h1_0(z), [mp_h0(v) for v in z], rtol=1e-12)


def test_j0_complex():
    assert bessel_j0(1 + 1j) == pytest.approx(complex(mp.besselj(0, 1 + 1j)), rel=1e-13)
