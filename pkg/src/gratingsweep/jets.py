"""Truncated Taylor series ("jets") in the angular frequency.

A :class:`Jet` carries the scaled Taylor coefficients ``f^(i)(w0) / i!`` of a
complex quantity about a real centre ``w0``.  Coefficient arrays may carry
leading batch dimensions, so a whole matrix of jets is a single object whose
``coeffs`` has shape ``(*batch, order + 1)``; all arithmetic broadcasts over
the batch dimensions.
"""

from __future__ import annotations

import math

import numpy as np

MAX_ORDER = 40


class JetMismatchError(ValueError):
    """Raised when jets with different centres or orders are combined."""


class Jet:
    """Truncated Taylor series with scaled coefficients.

    Parameters
    ----------
    coeffs : array_like
        Scaled Taylor coefficients, last axis is the order axis.
    centre : complex, optional
        Expansion point.  Usually a real angular frequency.
    """

    __slots__ = ("coeffs", "centre")
    __array_priority__ = 100

    def __init__(self, coeffs, centre=0.0):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim == 0:
            c = c.reshape(1)
        if c.shape[-1] - 1 > MAX_ORDER:
            raise ValueError(f"jet order {c.shape[-1] - 1} exceeds MAX_ORDER={MAX_ORDER}")
        self.coeffs = c
        self.centre = centre

    # construction helpers -------------------------------------------------
    @classmethod
    def constant(cls, value, order, centre=0.0):
        value = np.asarray(value, dtype=complex)
        c = np.zeros(value.shape + (order + 1,), dtype=complex)
        c[..., 0] = value
        return cls(c, centre)

    @classmethod
    def variable(cls, centre, order):
        """Jet of the identity map ``w -> w`` about ``centre``."""
        c = np.zeros(order + 1, dtype=complex)
        c[0] = centre
        if order >= 1:
            c[1] = 1.0
        return cls(c, centre)

    @classmethod
    def from_derivatives(cls, derivs, centre=0.0):
        d = np.asarray(derivs, dtype=complex)
        fact = np.array([math.factorial(i) for i in range(d.shape[-1])], dtype=float)
        return cls(d / fact, centre)

    # basic properties -------------------------------------------------------
    @property
    def order(self) -> int:
        return self.coeffs.shape[-1] - 1

    @property
    def shape(self):
        return self.coeffs.shape[:-1]

    @property
    def value(self):
        v = self.coeffs[..., 0]
        return v if v.ndim else complex(v)

    def derivatives(self) -> np.ndarray:
        """Raw derivatives ``f^(i)(centre)``."""
        fact = np.array([math.factorial(i) for i in range(self.order + 1)], dtype=float)
        return self.coeffs * fact

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.coeffs[idx + (slice(None),)], self.centre)

    def __len__(self):
        return self.coeffs.shape[0] if self.coeffs.ndim > 1 else 1

    def __repr__(self):
        return f"Jet(order={self.order}, centre={self.centre!r}, coeffs={self.coeffs!r})"

    def conj(self) -> "Jet":
        """Conjugate jet; valid because the expansion variable is real."""
        return Jet(np.conj(self.coeffs), self.centre)

    def truncate(self, order: int) -> "Jet":
        return Jet(self.coeffs[..., : order + 1], self.centre)

    def evaluate(self, w):
        """Evaluate the truncated polynomial at ``w``."""
        s = np.asarray(w) - self.centre
        out = np.zeros(np.broadcast_shapes(self.shape, np.shape(s)), dtype=complex)
        for i in range(self.order, -1, -1):
            out = out * s + self.coeffs[..., i]
        return out

    # arithmetic -------------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.order != self.order:
                raise JetMismatchError(f"order mismatch: {self.order} vs {other.order}")
            if other.centre != self.centre:
                raise JetMismatchError(f"centre mismatch: {self.centre} vs {other.centre}")
            return other.coeffs
        return None

    def __add__(self, other):
        oc = self._coerce(other)
        if oc is None:
            c = self.coeffs.copy() if np.ndim(other) == 0 else np.broadcast_to(
                self.coeffs, np.broadcast_shapes(self.shape, np.shape(other)) + (self.order + 1,)
            ).copy()
            c[..., 0] += other
            return Jet(c, self.centre)
        return Jet(self.coeffs + oc, self.centre)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.coeffs, self.centre)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        oc = self._coerce(other)
        if oc is None:
            return Jet(self.coeffs * np.asarray(other)[..., None], self.centre)
        return Jet(cauchy(self.coeffs, oc), self.centre)

    __rmul__ = __mul__

    def __truediv__(self, other):
        oc = self._coerce(other)
        if oc is None:
            return Jet(self.coeffs / np.asarray(other)[..., None], self.centre)
        return Jet(_divide(self.coeffs, oc), self.centre)

    def __rtruediv__(self, other):
        num = Jet.constant(other, self.order, self.centre)
        return num / self

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and p >= 0:
            out = Jet.constant(np.ones(self.shape), self.order, self.centre)
            base = self
            while p:
                if p & 1:
                    out = out * base
                p >>= 1
                if p:
                    base = base * base
            return out
        return jet_power(self, p)


# ---------------------------------------------------------------------------
# coefficient-level kernels (shape (..., n+1))


def cauchy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Truncated Cauchy product along the last axis."""
    n1 = a.shape[-1]
    out = np.empty(np.broadcast_shapes(a.shape, b.shape), dtype=complex)
    for k in range(n1):
        out[..., k] = np.sum(a[..., : k + 1] * b[..., k::-1], axis=-1)
    return out


def _divide(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    b0 = b[..., 0]
    if np.any(b0 == 0):
        raise ZeroDivisionError("jet division by a jet with zero value part")
    n1 = a.shape[-1]
    out = np.empty(np.broadcast_shapes(a.shape, b.shape), dtype=complex)
    for k in range(n1):
        acc = a[..., k] - np.sum(b[..., 1 : k + 1] * out[..., k - 1 :: -1][..., :k], axis=-1) if k else a[..., 0]
        out[..., k] = acc / b0
    return out


def _ode_lift(a: np.ndarray, f0: np.ndarray, rhs) -> np.ndarray:
    """Solve ``f' = h(f) a'`` coefficient by coefficient.

    ``rhs(f, l)`` must return coefficient ``l`` of ``h`` using only
    ``f[..., :l+1]``.
    """
    n1 = a.shape[-1]
    f = np.zeros(a.shape, dtype=complex)
    f[..., 0] = f0
    h = np.zeros(a.shape, dtype=complex)
    for k in range(1, n1):
        h[..., k - 1] = rhs(f, h, k - 1)
        j = np.arange(1, k + 1)
        f[..., k] = np.sum(j * a[..., 1 : k + 1] * h[..., k - 1 :: -1][..., :k], axis=-1) / k
    return f


# ---------------------------------------------------------------------------
# module-level operations


def jet_add(a: Jet, b: Jet) -> Jet:
    return a + b


def jet_sub(a: Jet, b: Jet) -> Jet:
    return a - b


def jet_scale(a: Jet, c) -> Jet:
    return a * c


def jet_mul(a: Jet, b: Jet) -> Jet:
    if isinstance(b, Jet):
        a._coerce(b)
    return a * b


def jet_div(a: Jet, b: Jet) -> Jet:
    return a / b


def jet_exp(a: Jet) -> Jet:
    c = a.coeffs
    f0 = np.exp(c[..., 0])
    return Jet(_ode_lift(c, f0, lambda f, h, l: f[..., l]), a.centre)


def jet_log(a: Jet) -> Jet:
    c = a.coeffs
    if np.any(c[..., 0] == 0):
        raise ZeroDivisionError("log of a jet with zero value part")
    inv = _divide(np.broadcast_to(np.eye(1, c.shape[-1], dtype=complex)[0], c.shape), c)
    f0 = np.log(c[..., 0])
    return Jet(_ode_lift(c, f0, lambda f, h, l: inv[..., l]), a.centre)


class BranchPointError(ArithmeticError):
    pass


def jet_sqrt(a: Jet) -> Jet:
    """Principal square root lifted to jets."""
    c = a.coeffs
    a0 = c[..., 0]
    if np.any(a0 == 0):
        raise BranchPointError("sqrt lift at a zero value part")
    n1 = c.shape[-1]
    f = np.zeros(c.shape, dtype=complex)
    f[..., 0] = np.sqrt(a0)
    for k in range(1, n1):
        acc = c[..., k] - np.sum(f[..., 1:k] * f[..., k - 1 : 0 : -1], axis=-1)
        f[..., k] = acc / (2 * f[..., 0])
    return Jet(f, a.centre)


def jet_power(a: Jet, p) -> Jet:
    c = a.coeffs
    a0 = c[..., 0]
    if np.any(a0 == 0):
        raise BranchPointError("power lift at a zero value part")
    n1 = c.shape[-1]
    f = np.zeros(c.shape, dtype=complex)
    f[..., 0] = a0**p
    for k in range(1, n1):
        j = np.arange(1, k + 1)
        f[..., k] = np.sum(((p + 1) * j - k) * c[..., 1 : k + 1] * f[..., k - 1 :: -1][..., :k], axis=-1) / (k * a0)
    return Jet(f, a.centre)


def jet_sincos(a: Jet):
    c = a.coeffs
    n1 = c.shape[-1]
    s = np.zeros(c.shape, dtype=complex)
    co = np.zeros(c.shape, dtype=complex)
    s[..., 0] = np.sin(c[..., 0])
    co[..., 0] = np.cos(c[..., 0])
    for k in range(1, n1):
        j = np.arange(1, k + 1)
        ja = j * c[..., 1 : k + 1]
        s[..., k] = np.sum(ja * co[..., k - 1 :: -1][..., :k], axis=-1) / k
        co[..., k] = -np.sum(ja * s[..., k - 1 :: -1][..., :k], axis=-1) / k
    return Jet(s, a.centre), Jet(co, a.centre)


def jet_sin(a: Jet) -> Jet:
    return jet_sincos(a)[0]


def jet_cos(a: Jet) -> Jet:
    return jet_sincos(a)[1]


def jet_erfc(a: Jet) -> Jet:
    """Complementary error function of a jet, ``erfc' = -2/sqrt(pi) exp(-z^2)``."""
    from .specfun import erfc_complex

    g = jet_exp(-(a * a)).coeffs * (-2.0 / math.sqrt(math.pi))
    f0 = erfc_complex(a.coeffs[..., 0])
    return Jet(_ode_lift(a.coeffs, f0, lambda f, h, l: g[..., l]), a.centre)


def jet_erfcx(a: Jet) -> Jet:
    """Scaled complementary error function ``exp(z^2) erfc(z)`` of a jet."""
    from .specfun import erfcx_complex

    c = a.coeffs
    f0 = erfcx_complex(c[..., 0])
    two_rpi = 2.0 / math.sqrt(math.pi)

    def rhs(f, h, l):
        conv = np.sum(c[..., : l + 1] * f[..., l::-1], axis=-1)
        return 2 * conv - (two_rpi if l == 0 else 0.0)

    return Jet(_ode_lift(c, f0, rhs), a.centre)


_LIFTS = {
    "exp": jet_exp,
    "log": jet_log,
    "sqrt": jet_sqrt,
    "sin": jet_sin,
    "cos": jet_cos,
    "erfc": jet_erfc,
    "erfcx": jet_erfcx,
}


def jet_lift(f, a: Jet, *args) -> Jet:
    """Compose a supported scalar function with a jet.

    ``f`` is one of ``"exp", "log", "sqrt", "sin", "cos", "erfc", "erfcx",
    "power"`` (the last takes the exponent as an extra argument) or one of
    the ``jet_*`` functions of this module.
    """
    if callable(f):
        return f(a, *args)
    if f == "power":
        return jet_power(a, *args)
    try:
        return _LIFTS[f](a)
    except KeyError:
        raise ValueError(f"unsupported lift {f!r}") from None


def stack(jets, axis=0) -> Jet:
    """Stack jets with matching centre and order along a new batch axis."""
    jets = list(jets)
    ref = jets[0]
    for j in jets[1:]:
        ref._coerce(j)
    ax = axis if axis >= 0 else axis - 1
    return Jet(np.stack([j.coeffs for j in jets], axis=ax), ref.centre)
