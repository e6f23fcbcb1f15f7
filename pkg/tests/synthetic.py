"""Far fields built from closed-form amplitudes instead of a boundary element solve."""

import numpy as np

from gratingsweep.farfield import FarField, transmittance
from gratingsweep.greens import spectral_index_set
from gratingsweep.jets import Jet


def synthetic_solver(amplitude, params, reflected=None, calls=None):
    """``solver(omega, order)`` whose transmitted amplitude of mode ``m`` is ``amplitude(W, m)``.

    ``W`` is the frequency jet.  ``reflected`` works the same way for ``C_m^-``
    (zero when omitted).  ``calls`` collects the solve frequencies.
    """

    def solve(w, order):
        if calls is not None:
            calls.append(w)
        W = Jet.variable(w, order)
        modes = spectral_index_set(W, params)
        cs = np.stack([np.broadcast_to(amplitude(W, int(m)).coeffs, (order + 1,)) for m in modes.m])
        if reflected is None:
            cm = np.zeros_like(cs)
        else:
            cm = np.stack([np.broadcast_to(reflected(W, int(m)).coeffs, (order + 1,)) for m in modes.m])
        d2 = Jet(modes.ktilde.coeffs * params.c, w) / W
        delta = (modes.m == 0)[:, None] * np.eye(1, order + 1)[0]
        ff = FarField(modes, Jet(cs - delta, w), Jet(cm, w), Jet(cs.astype(complex), w), d2)
        transmittance(ff, params.theta)
        return ff

    return solve


def constant(value=1.0):
    return lambda W, m: Jet.constant(value if m == 0 else 0.0, W.order, W.centre)
