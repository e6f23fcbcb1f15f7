"""Semi-analytical band average of the transmittance.

For every subband and propagating mode the integral
``I_m = int |C_m(omega)|^2 d_m2(omega) d omega`` of the Padé surrogate is
evaluated in closed form.  ``|C_m|^2`` is itself rational with poles at the
Padé poles and their conjugates.  For ``m != 0`` the square root in ``d_m2``
is removed by ``cos t = a + b/omega`` followed by ``s = tan(t/2)``, which
leaves a rational function of ``s``.  Its partial fractions (Heaviside
cover-up with jet derivatives for repeated poles) integrate to logarithms and
inverse powers.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .jets import Jet
from .pade import PadeModel, _trim

CLUSTER_TOL = 1e-8
SEGMENT_TOL = 1e-10
# largest tolerated ratio between the summed magnitudes of the partial-fraction
# contributions and the result; observed errors stay below 2.2e-13 times it
CANCELLATION_LIMIT = 1e4


class DegenerateDegreeError(ValueError):
    pass


class QuadratureFallbackWarning(RuntimeWarning):
    pass


@dataclass
class RationalIntegrand:
    """``|C|^2 = sum phat_i (omega - omega0)^i / (qhat prod (omega - alphahat_i))``.

    ``a = cos(theta)`` and ``b = 2 m c pi / L`` describe ``d_m2``.
    """

    phat: np.ndarray
    qhat: complex
    alphahat: np.ndarray
    a: float
    b: float
    omega0: float
    m: int = 0
    model: PadeModel | None = None

    @property
    def M(self) -> int:
        return (self.phat.size - 1) // 2

    @property
    def N(self) -> int:
        return self.alphahat.size // 2

    def abs_square(self, omega):
        """The reconstructed ``|C|^2`` at real ``omega``."""
        w = np.asarray(omega, dtype=float)
        s = (w - self.omega0).astype(complex)
        num = np.zeros_like(s)
        for c in self.phat[::-1]:
            num = num * s + c
        den = self.qhat * np.prod(w[..., None] - self.alphahat, axis=-1) if self.alphahat.size \
            else self.qhat * np.ones_like(s)
        return num / den

    def dm2(self, omega):
        v = self.a + self.b / np.asarray(omega, dtype=float)
        return np.sqrt(np.maximum(1.0 - v * v, 0.0))

    def integrand(self, omega):
        """``|C|^2 d_m2`` as a real function of ``omega``."""
        return (self.abs_square(omega) * self.dm2(omega)).real


@dataclass
class PartialFractionTerm:
    pole: complex
    multiplicity: int
    coefficients: np.ndarray  # A_1 .. A_m (index j - 1)


@dataclass
class ModeIntegral:
    value: float
    imag: float
    method: str
    warnings: list = field(default_factory=list)


def abs_square_rational(model: PadeModel, m: int = 0, params=None) -> RationalIntegrand:
    """Rational form of ``|C^[M,N]|^2`` on the real axis.

    The numerator coefficients are the self-convolution ``phat_i = sum_j p_j
    conj(p_{i-j})``, the scale is ``|q_N|^2`` and the poles are the Padé poles
    followed by their conjugates.  A denominator whose top coefficients vanish
    to rounding is treated with its effective degree.
    """
    p = np.asarray(model.p, dtype=complex)
    q = _trim(np.asarray(model.q, dtype=complex))
    n_eff = q.size - 1
    if n_eff != model.poles.size:
        raise DegenerateDegreeError("pole count does not match the denominator degree")
    if q[-1] == 0:
        raise DegenerateDegreeError("leading denominator coefficient is zero")
    phat = np.convolve(p, np.conj(p))
    qhat = complex(q[-1] * np.conj(q[-1]))
    alphahat = np.concatenate([model.poles, np.conj(model.poles)])
    a = b = 0.0
    if params is not None:
        a = params.cos_theta
        b = 2 * m * params.c * np.pi / params.L
    return RationalIntegrand(phat, qhat, alphahat, a, b, float(model.centre), m, model)


# ---------------------------------------------------------------------------
# partial fractions


def cluster_poles(poles, tol: float = CLUSTER_TOL):
    """Merge poles closer than ``tol`` into (centre, multiplicity) pairs."""
    poles = list(np.asarray(poles, dtype=complex))
    out = []
    while poles:
        z = poles.pop(0)
        group = [z]
        rest = []
        for w in poles:
            (group if abs(w - z) < tol else rest).append(w)
        poles = rest
        out.append((complex(np.mean(group)), len(group)))
    return out


def _jet_poly(c, s: Jet) -> Jet:
    # ascending coefficients evaluated on a jet by Horner's rule
    out = Jet.constant(0.0, s.order, s.centre)
    for v in np.asarray(c)[::-1]:
        out = out * s + v
    return out


def heaviside_coefficients(P, poles, qcheck) -> list[PartialFractionTerm]:
    """Partial-fraction coefficients of ``P(s) / (qcheck prod (s - alpha_i)^m_i)``.

    Parameters
    ----------
    P : callable or array_like
        Numerator, either ascending polynomial coefficients or a function
        mapping a :class:`Jet` in ``s`` to a :class:`Jet`.
    poles : sequence of complex, or of (pole, multiplicity)
        Bare poles are clustered at 1e-8 first.
    qcheck : complex
        Leading coefficient of the denominator.

    Returns
    -------
    list of PartialFractionTerm
        ``A_ij = (1/(m_i - j)!) d^(m_i-j)/ds^(m_i-j) [P/Q_i](alpha_i)``, read
        directly off the jet of ``P/Q_i``.
    """
    poles = list(poles)
    if poles and not isinstance(poles[0], tuple):
        poles = cluster_poles(poles)
    if not callable(P):
        coeffs = np.asarray(P, dtype=complex)
        if _trim(coeffs).size - 1 >= sum(mi for _, mi in poles) and np.any(coeffs):
            raise ValueError("numerator degree must be below the denominator degree")

        def P(s, _c=coeffs):
            return _jet_poly(_c, s)

    terms = []
    for i, (z, mi) in enumerate(poles):
        s = Jet.variable(z, mi - 1)
        Q = Jet.constant(qcheck, mi - 1, z)
        for k, (w, mk) in enumerate(poles):
            if k != i:
                Q = Q * (s - w) ** mk
        ratio = P(s) / Q
        A = ratio.coeffs[::-1].copy()  # A_j = coefficient of order m_i - j
        terms.append(PartialFractionTerm(z, mi, A))
    return terms


def integrate_term(A: complex, alpha: complex, j: int, s1: float, s2: float) -> complex:
    """``int_{s1}^{s2} A / (s - alpha)^j ds`` along the real axis.

    For ``j = 1`` the logarithm uses the continuous change of argument along
    the segment, which is the principal angle of the endpoint ratio.  An
    infinite endpoint contributes only the finite part of the logarithm; the
    divergent ``log|s|`` pieces cancel across the terms of a rational function
    whose denominator degree exceeds the numerator degree by two or more.
    """
    if j == 1:
        if np.isinf(s2) and np.isinf(s1):
            return 0.0
        if np.isinf(s2):
            d = s1 - alpha
            return -A * (math.log(abs(d)) + 1j * np.angle(d)) * np.sign(s2)
        if np.isinf(s1):
            d = s2 - alpha
            return A * (math.log(abs(d)) + 1j * np.angle(d)) * np.sign(s1)
        d1, d2 = s1 - alpha, s2 - alpha
        return A * (math.log(abs(d2) / abs(d1)) + 1j * np.angle(d2 / d1))

    def F(s):
        if np.isinf(s):
            return 0.0
        return -A / ((j - 1) * (s - alpha) ** (j - 1))

    return F(s2) - F(s1)


def integrate_partial_fractions(terms, s1, s2, magnitude: bool = False):
    """Sum of the term integrals; with ``magnitude`` also the sum of their moduli."""
    total = 0.0 + 0.0j
    size = 0.0
    for t in terms:
        for j in range(1, t.multiplicity + 1):
            v = integrate_term(t.coefficients[j - 1], t.pole, j, s1, s2)
            total += v
            size += abs(v)
    return (total, size) if magnitude else total


# ---------------------------------------------------------------------------
# mode integrals


def _s_of_omega(omega: float, a: float, b: float) -> float:
    if omega == np.inf:
        c = a
    elif omega == 0.0:
        c = math.copysign(1.0, b) if b != 0 else a
    else:
        c = a + b / omega
    c = min(1.0, max(-1.0, c))
    t = math.acos(c)
    if t >= math.pi:
        return np.inf
    return math.tan(0.5 * t)


def _on_segment(poles, s1, s2, tol=SEGMENT_TOL) -> bool:
    lo, hi = min(s1, s2), max(s1, s2)
    for z, _ in poles:
        if abs(z.imag) < tol and lo - tol <= z.real <= hi + tol:
            return True
    return False


def quadrature_integral(integrand: RationalIntegrand, band, epsrel=1e-13, limit=400) -> float:
    """Adaptive Gauss–Kronrod quadrature of ``|C|^2 d_m2`` over ``band``."""
    wa, wb = band
    if wb == wa:
        return 0.0
    pts = [z.real for z in integrand.alphahat if wa < z.real < wb]
    val, _ = integrate.quad(integrand.integrand, wa, wb, epsabs=0.0, epsrel=epsrel,
                            limit=limit, points=sorted(set(pts))[:50] or None)
    return float(val)


def _mode0(ig: RationalIntegrand, wa, wb):
    # no substitution needed: d_02 = sqrt(1 - a^2) is constant
    sin_t = math.sqrt(max(0.0, 1.0 - ig.a * ig.a))
    shifted = [(z - ig.omega0, k) for z, k in cluster_poles(ig.alphahat)]
    deg_den = ig.alphahat.size
    phat = ig.phat
    poly_part = 0.0 + 0.0j
    s1, s2 = wa - ig.omega0, wb - ig.omega0
    if _trim(phat).size - 1 >= deg_den:
        den = np.array([ig.qhat], dtype=complex)
        for z, k in shifted:
            for _ in range(k):
                den = np.convolve(den, [-z, 1.0])
        quot, rem = np.polydiv(phat[::-1], den[::-1])
        anti = np.polyint(quot)
        poly_part = np.polyval(anti, s2) - np.polyval(anti, s1)
        phat = rem[::-1]
    if _on_segment(shifted, s1, s2):
        return None, 0.0
    terms = heaviside_coefficients(phat, shifted, ig.qhat) if deg_den else []
    val, size = integrate_partial_fractions(terms, s1, s2, magnitude=True)
    return sin_t * (poly_part + val), sin_t * (abs(poly_part) + size)


def _mode_m(ig: RationalIntegrand, wa, wb):
    a, b, w0 = ig.a, ig.b, ig.omega0
    K = max(2 * ig.M, 2 * ig.N - 2)
    e = K - 2 * ig.N + 2
    alph = []
    for z in ig.alphahat:
        lead = b + z * (1 + a)
        if lead == 0:
            raise DegenerateDegreeError("Padé pole maps to s = infinity")
        r = np.sqrt(((1 - a) * z - b) / lead)
        alph += [r, -r]
    r0 = math.sqrt((1 - a) / (1 + a))
    raw = [(1j, 1), (-1j, 1)] + ([(r0, e), (-r0, e)] if e > 0 else [])
    clustered = cluster_poles(alph)
    poles = _merge(raw + clustered)
    qcheck = ig.qhat * (1 + a) ** e * np.prod(b + ig.alphahat * (1 + a))
    c0, c2 = b - w0 * (1 - a), b + w0 * (1 + a)

    def P(s):
        s2 = s * s
        num0 = s2 * c2 + c0
        D = (1 - a) - (1 + a) * s2
        total = Jet.constant(0.0, s.order, s.centre)
        for i, ph in enumerate(ig.phat):
            total = total + ph * num0 ** i * D ** (K - i)
        return total * s2 * (8 * b)

    s1, s2 = _s_of_omega(wa, a, b), _s_of_omega(wb, a, b)
    if _on_segment(poles, s1, s2):
        return None, 0.0
    terms = heaviside_coefficients(P, poles, qcheck)
    return integrate_partial_fractions(terms, s1, s2, magnitude=True)


def _merge(poles):
    out = []
    for z, k in poles:
        for idx, (w, kw) in enumerate(out):
            if abs(w - z) < CLUSTER_TOL:
                out[idx] = (w, kw + k)
                break
        else:
            out.append((complex(z), k))
    return out


def closed_form(integrand: RationalIntegrand, band):
    """Closed-form value and the summed magnitude of its contributions.

    Returns ``(None, 0.0)`` when a pole lies on the integration path.
    """
    wa, wb = float(band[0]), float(band[1])
    if integrand.m == 0:
        return _mode0(integrand, wa, wb)
    return _mode_m(integrand, wa, wb)


def mode_integral(integrand: RationalIntegrand, band, m: int | None = None) -> ModeIntegral:
    """Closed-form ``I_m = int_band |C_m|^2 d_m2 d omega``.

    Falls back to adaptive quadrature (with a warning) when a pole of the
    integrand lies within 1e-10 of the real integration segment, or when the
    partial-fraction contributions cancel by more than ``CANCELLATION_LIMIT``.
    The second case arises for high numerator degrees, where the pole of the
    substituted integrand that represents ``omega = infinity`` has a high
    multiplicity.
    """
    wa, wb = float(band[0]), float(band[1])
    if m is not None and m != integrand.m:
        raise ValueError("mode index does not match the integrand")
    if wb == wa:
        return ModeIntegral(0.0, 0.0, "empty")
    val, size = closed_form(integrand, (wa, wb))
    msg = None
    if val is None:
        msg = f"pole on the integration path for m={integrand.m} on [{wa}, {wb}]; used quadrature"
    elif size > CANCELLATION_LIMIT * abs(val):
        msg = (f"partial fractions cancel by {size / abs(val):.1e} for m={integrand.m} on "
               f"[{wa}, {wb}]; used quadrature")
    if msg is not None:
        warnings.warn(msg, QuadratureFallbackWarning, stacklevel=2)
        return ModeIntegral(quadrature_integral(integrand, (wa, wb)), 0.0, "quadrature", [msg])
    val = complex(val)
    return ModeIntegral(val.real, val.imag, "closed")


@dataclass
class BandAverage:
    J: float
    contributions: list  # per subband: list of (m, I_m, method)
    warnings: list

    def to_dict(self) -> dict:
        return {"J": self.J, "warnings": list(self.warnings),
                "subbands": [[{"m": int(m), "I": float(v), "method": meth} for m, v, meth in sub]
                             for sub in self.contributions]}


def band_average(partition, params) -> BandAverage:
    """``J = (1/((w2 - w1) sin theta)) sum_subbands sum_m I_m``."""
    borders = np.asarray(partition.borders, dtype=float)
    total = 0.0
    contribs, warns = [], []
    for i, fam in enumerate(partition.families):
        lo, hi = borders[i], borders[i + 1]
        sub = []
        for m, md in zip(fam.m, fam.models):
            ig = abs_square_rational(md, int(m), params)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", QuadratureFallbackWarning)
                res = mode_integral(ig, (lo, hi))
            warns += res.warnings
            sub.append((int(m), res.value, res.method))
            total += res.value
        contribs.append(sub)
    J = total / ((borders[-1] - borders[0]) * params.sin_theta)
    return BandAverage(J, contribs, warns)
