"""Far-field amplitudes, transmittance and reflectance as frequency jets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bem import BoundaryMesh, SolveResult
from .greens import LatticeParams, SpectralIndexSet, spectral_index_set
from .jets import Jet, jet_exp


class IndicatorUndefinedError(ArithmeticError):
    pass


@dataclass
class FarField:
    """Plane-wave amplitudes of the propagating diffraction orders.

    ``C_plus``, ``C_minus`` and ``C_shifted`` are jets with batch shape
    ``(n_modes,)``; ``C_shifted = C_plus + delta_{m0}`` is the total
    transmitted amplitude.  ``d2`` holds ``d^+_{m2} = k~_m / k``.
    """

    modes: SpectralIndexSet
    C_plus: Jet
    C_minus: Jet
    C_shifted: Jet
    d2: Jet
    T: Jet | None = None
    R: Jet | None = None

    @property
    def m(self):
        return self.modes.m


def far_coeffs(result: SolveResult, mesh: BoundaryMesh, params: LatticeParams,
               modes: SpectralIndexSet | None = None, points: int = 4) -> FarField:
    """Amplitudes ``C_m^+`` and ``C_m^-`` of every propagating order.

    With ``k d^{+-}_m = (xi_m, +-k~_m)`` the amplitude reduces to
    ``C^{+-}_m = -(1/(2 L k~_m)) int (xi_m n_1 +- k~_m n_2) u exp(-i(xi_m x_1 +- k~_m x_2)) dGamma``.
    """
    w0, order = result.centre_omega, result.order
    modes = modes or spectral_index_set(Jet.variable(w0, order), params)
    nm = modes.m.size
    if nm == 0:
        raise ValueError("no propagating diffraction order")
    no = order + 1
    xi, kt = modes.xi.coeffs, modes.ktilde.coeffs  # (M, no)
    d2 = Jet(kt * params.c, w0) / Jet.variable(w0, order)
    if mesh.size == 0:
        zero = Jet(np.zeros((nm, no), dtype=complex), w0)
        shifted = zero.coeffs.copy()
        shifted[modes.m == 0, 0] += 1.0
        return FarField(modes, zero, zero, Jet(shifted, w0), d2)
    gx, gw = np.polynomial.legendre.leggauss(points)
    a, b, n, h = mesh.a, mesh.b, mesh.normal, mesh.length
    mid = 0.5 * (a + b)
    u = result.traces.coeffs  # (Ne, no)
    pref = Jet(-np.ones((nm, no)) * np.eye(1, no)[0], w0) / (Jet(kt, w0) * (2 * params.L))
    out = []
    for sgn in (1.0, -1.0):
        w2 = sgn * kt
        # integral of exp(-i w.y) over each element, shape (M, Ne, no)
        I = np.zeros((nm, mid.shape[0], no), dtype=complex)
        for t, wt in zip(gx, gw):
            y = mid + 0.5 * t * (b - a)
            ph = -1j * (xi[:, None, :] * y[None, :, 0, None] + w2[:, None, :] * y[None, :, 1, None])
            I += (0.5 * wt * h)[None, :, None] * jet_exp(Jet(ph, w0)).coeffs
        wn = xi[:, None, :] * n[None, :, 0, None] + w2[:, None, :] * n[None, :, 1, None]
        integrand = Jet(I, w0) * Jet(wn, w0) * Jet(np.broadcast_to(u, I.shape), w0)
        total = Jet(integrand.coeffs.sum(axis=1), w0)
        out.append(total * pref)
    cp, cm = out
    shifted = cp.coeffs.copy()
    shifted[modes.m == 0, 0] += 1.0
    return FarField(modes, cp, cm, Jet(shifted, w0), d2)


def transmittance(ff: FarField, theta: float):
    """``T = sum |C_m|^2 d_m2 / sin(theta)`` and ``R = sum |C_m^-|^2 d_m2 / sin(theta)`` as jets."""
    s = np.sin(theta)
    t = ff.C_shifted * ff.C_shifted.conj() * ff.d2
    r = ff.C_minus * ff.C_minus.conj() * ff.d2
    T = Jet(t.coeffs.sum(axis=0) / s, t.centre)
    R = Jet(r.coeffs.sum(axis=0) / s, r.centre)
    ff.T, ff.R = T, R
    return T, R


def accuracy_indicator(ff: FarField, i: int) -> float:
    """Relative violation of energy conservation in the ``i``-th derivative."""
    if ff.T is None:
        raise ValueError("call transmittance first")
    if i > ff.T.order:
        raise ValueError("order exceeds the jet order")
    t = ff.T.coeffs[i]
    if t == 0:
        raise IndicatorUndefinedError(f"T^({i}) vanishes")
    exact = 1.0 if i == 0 else 0.0
    return float(abs(t + ff.R.coeffs[i] - exact) / abs(t))


def dm2_response(omega, m: int, params: LatticeParams) -> float:
    """Explicit ``d_m2(omega) = sqrt(1 - (cos(theta) + 2 m c pi / (omega L))^2)``; zero when evanescent."""
    if m == 0:
        return np.full(np.shape(omega), params.sin_theta)
    v = params.cos_theta + 2 * m * params.c * np.pi / (np.asarray(omega, dtype=float) * params.L)
    rad = 1.0 - v * v
    return np.sqrt(np.maximum(rad, 0.0))
