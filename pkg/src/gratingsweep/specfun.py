"""Special functions used by the Green-function kernels.

The complex error function family is evaluated through the Faddeeva function
``w(z) = exp(-z^2) erfc(-iz)``, computed with Weideman's rational expansion
(40 terms) in the upper half plane and a Laplace continued fraction for large
arguments.  Working with ``w`` keeps the Gaussian factor separate, so
products like ``exp(-z^2) * erfcx(...)`` never overflow in intermediate steps.

Scalar kernels are compiled with numba so the Ewald kernels can call them
directly; the public functions accept numpy arrays.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, vectorize
from scipy import special as _sp

EULER_GAMMA = 0.5772156649015329
_SQRT_PI = math.sqrt(math.pi)
_INV_SQRT_PI = 1.0 / _SQRT_PI


class DomainError(ValueError):
    """Argument outside the supported domain of a special function."""


def _weideman_coefficients(n_terms: int):
    m = 2 * n_terms
    m2 = 2 * m
    k = np.arange(-m + 1, m)
    ell = math.sqrt(n_terms / math.sqrt(2.0))
    t = ell * np.tan(k * np.pi / (2 * m))
    f = np.concatenate([[0.0], np.exp(-(t**2)) * (ell**2 + t**2)])
    a = np.real(np.fft.fft(np.fft.fftshift(f))) / m2
    return np.ascontiguousarray(a[1 : n_terms + 1][::-1]), ell


_WCOEF, _WL = _weideman_coefficients(40)


@njit(cache=True)
def faddeeva_upper(z):
    """Faddeeva function ``w(z)`` for ``Im z >= 0``."""
    if abs(z) > 40.0:
        # Laplace continued fraction, evaluated bottom-up.
        acc = z
        for n in range(30, 0, -1):
            acc = z - (0.5 * n) / acc
        return 1j * _INV_SQRT_PI / acc
    den = _WL - 1j * z
    zz = (_WL + 1j * z) / den
    p = 0.0 + 0.0j
    for c in _WCOEF:
        p = p * zz + c
    return 2.0 * p / (den * den) + _INV_SQRT_PI / den


@njit(cache=True)
def erfcx_scalar(z):
    """Scaled complementary error function ``exp(z^2) erfc(z)``."""
    if z.real >= 0.0:
        return faddeeva_upper(1j * z)
    return 2.0 * np.exp(z * z) - faddeeva_upper(-1j * z)


@njit(cache=True)
def erfc_scalar(z):
    # combine the Gaussian and w in the exponent so neither factor overflows
    if z.real >= 0.0:
        return np.exp(-z * z + np.log(faddeeva_upper(1j * z)))
    return 2.0 - np.exp(-z * z + np.log(faddeeva_upper(-1j * z)))


@vectorize(["complex128(complex128)"], cache=True)
def _erfc_vec(z):
    return erfc_scalar(z)


@vectorize(["complex128(complex128)"], cache=True)
def _erfcx_vec(z):
    return erfcx_scalar(z)


def erfc_complex(z):
    """Complementary error function of a complex argument.

    Parameters
    ----------
    z : complex or array_like

    Returns
    -------
    complex or ndarray
    """
    out = _erfc_vec(np.asarray(z, dtype=complex))
    return out if np.ndim(out) else complex(out)


def erfcx_complex(z):
    """``exp(z**2) * erfc(z)`` without intermediate overflow for ``Re z >= 0``."""
    out = _erfcx_vec(np.asarray(z, dtype=complex))
    return out if np.ndim(out) else complex(out)


# ---------------------------------------------------------------------------
# exponential integrals


@njit(cache=True)
def _expint_cf(n, x):
    # modified Lentz evaluation of the continued fraction, valid for x > 1
    b = x + n
    c = 1.0e300
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        an = -i * (n - 1.0 + i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x)


@njit(cache=True)
def _expint_series(n, x):
    # power series for 0 < x <= 1, n >= 1
    if n == 1:
        ans = -math.log(x) - EULER_GAMMA
    else:
        ans = 1.0 / (n - 1)
    fact = 1.0
    for i in range(1, 10000):
        fact *= -x / i
        if i != n - 1:
            delta = -fact / (i - n + 1)
        else:
            psi = -EULER_GAMMA
            for ii in range(1, n):
                psi += 1.0 / ii
            delta = fact * (-math.log(x) + psi)
        ans += delta
        if abs(delta) < abs(ans) * 1e-17:
            break
    return ans


@njit(cache=True)
def expint_scalar(n, x):
    if x > 745.0:
        return 0.0
    if x > 1.0:
        return _expint_cf(n, x)
    return _expint_series(n, x)


@njit(cache=True)
def expint_table(u, jmax, out):
    """Fill ``out[j + 1] = E_j(u)`` for ``j = -1 .. jmax``.

    ``E_0(u) = exp(-u)/u`` and ``E_{-1}(u) = exp(-u)(u+1)/u^2`` are the
    derivatives needed for spatial differentiation.  Orders below ``u`` are
    reached by downward recursion and orders above by upward recursion, which
    keeps both directions stable.
    """
    if u > 745.0:
        for i in range(jmax + 2):
            out[i] = 0.0
        return
    eu = math.exp(-u)
    out[0] = eu * (u + 1.0) / (u * u)
    out[1] = eu / u
    if jmax < 1:
        return
    if u <= 1.0:
        out[2] = _expint_series(1, u)
        for j in range(1, jmax):
            out[j + 2] = (eu - u * out[j + 1]) / j
        return
    j0 = int(math.ceil(u))
    if j0 > jmax:
        j0 = jmax
    out[j0 + 1] = _expint_cf(j0, u)
    for j in range(j0 - 1, 0, -1):
        out[j + 1] = (eu - j * out[j + 2]) / u
    for j in range(j0, jmax):
        out[j + 2] = (eu - u * out[j + 1]) / j


def expint(j: int, x):
    """Generalized exponential integral ``E_j(x)`` for ``j >= 1`` and ``x > 0``."""
    j = int(j)
    if j < 1:
        raise DomainError("expint order must be >= 1")
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0):
        raise DomainError("expint requires x > 0")
    out = np.array([expint_scalar(j, float(v)) for v in xa.ravel()]).reshape(xa.shape)
    return out if out.ndim else float(out)


def hankel1(n: int, x):
    """Hankel function of the first kind, orders 0 and 1, positive real argument."""
    if n not in (0, 1):
        raise DomainError("hankel1 supports orders 0 and 1 only")
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0):
        raise DomainError("hankel1 requires x > 0")
    out = _sp.hankel1(n, xa)
    return out if np.ndim(out) else complex(out)


def lower_gamma(a, x):
    """Unregularized lower incomplete gamma function."""
    return _sp.gammainc(a, x) * _sp.gamma(a)
