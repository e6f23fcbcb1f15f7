import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from gratingsweep.specfun import (
    DomainError,
    erfc_complex,
    erfcx_complex,
    expint,
    expint_table,
    hankel1,
    lower_gamma,
)

mpmath.mp.dps = 30

finite = st.floats(-6.0, 6.0, allow_nan=False)


def mp_erfc(z):
    return complex(mpmath.erfc(mpmath.mpc(z.real, z.imag)))


@given(finite, finite)
def test_erfc_matches_mpmath(x, y):
    z = complex(x, y)
    ref = mp_erfc(z)
    assert abs(erfc_complex(z) - ref) <= 1e-12 * abs(ref) + 1e-300


@given(st.floats(0.0, 30.0), st.floats(-30.0, 30.0))
def test_erfcx_right_half_plane(x, y):
    z = complex(x, y)
    ref = complex(mpmath.exp(mpmath.mpc(z) ** 2) * mpmath.erfc(mpmath.mpc(z)))
    assert abs(erfcx_complex(z) - ref) <= 1e-12 * abs(ref)


def test_erfcx_large_argument_continued_fraction():
    # |z| > 40 switches to the continued fraction
    z = 50.0 + 10.0j
    ref = complex(mpmath.exp(mpmath.mpc(z) ** 2) * mpmath.erfc(mpmath.mpc(z)))
    assert abs(erfcx_complex(z) - ref) < 1e-13 * abs(ref)


def test_erfc_no_overflow_for_large_negative_imaginary_square():
    # exp(-z^2) alone overflows here but erfc itself is moderate
    z = 2.0 + 25.0j
    ref = mp_erfc(z)
    assert np.isfinite(erfc_complex(z))
    assert abs(erfc_complex(z) - ref) < 1e-11 * abs(ref)


def test_vectorized_shapes():
    z = np.array([[0.1, 1j], [2.0 - 1j, -0.5]])
    out = erfc_complex(z)
    assert out.shape == (2, 2)
    assert isinstance(erfc_complex(0.3), complex)


@pytest.mark.parametrize("u", [1e-6, 0.01, 0.5, 1.0, 1.0001, 3.7, 25.0, 80.0])
def test_expint_table_against_scipy(u):
    jmax = 40
    out = np.zeros(jmax + 2)
    expint_table(u, jmax, out)
    assert out[1] == pytest.approx(math.exp(-u) / u, rel=1e-15)
    assert out[0] == pytest.approx(math.exp(-u) * (u + 1) / u**2, rel=1e-15)
    ref = special.expn(np.arange(1, jmax + 1), u)
    np.testing.assert_allclose(out[2:], ref, rtol=5e-14)


def test_expint_mpmath_high_order():
    for j, x in [(1, 0.3), (5, 2.0), (12, 7.5), (30, 12.0)]:
        assert expint(j, x) == pytest.approx(float(mpmath.expint(j, x)), rel=1e-13)


def test_expint_domain():
    with pytest.raises(DomainError):
        expint(0, 1.0)
    with pytest.raises(DomainError):
        expint(2, -1.0)


def test_hankel1_small_and_large():
    assert hankel1(0, 1.0) == pytest.approx(complex(mpmath.hankel1(0, 1.0)), rel=1e-14)
    assert hankel1(1, 40.0) == pytest.approx(complex(mpmath.hankel1(1, 40.0)), rel=1e-13)
    with pytest.raises(DomainError):
        hankel1(2, 1.0)
    with pytest.raises(DomainError):
        hankel1(0, 0.0)


def test_lower_gamma():
    assert lower_gamma(2.5, 1.3) == pytest.approx(float(mpmath.gammainc(2.5, 0, 1.3)), rel=1e-13)
