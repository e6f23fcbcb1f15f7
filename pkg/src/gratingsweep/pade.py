"""Complex Padé approximants built from frequency jets.

A model stores the numerator ``p`` and the denominator ``q`` (``q[0] = 1``) as
polynomials in ``s = omega - centre``.  The coefficients come from the linear
system that matches the first ``M + N`` Taylor coefficients.  That system can
be singular when spurious pole/zero pairs (Froissart doublets) are present, so
it is solved by an unrestarted minimal-residual Krylov iteration that accepts
any least-squares solution.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import gmres

from .farfield import dm2_response
from .jets import Jet


class PoleHitError(ArithmeticError):
    """The Padé denominator vanishes (to rounding) at the evaluation point."""


class RootFindingError(ArithmeticError):
    """The Aberth iteration did not converge."""


class DegenerateFitWarning(RuntimeWarning):
    """The Padé system was not solved to full accuracy (Froissart regime)."""


@dataclass
class PadeModel:
    """Rational surrogate ``sum p_i s^i / sum q_i s^i`` with ``s = omega - centre``.

    Attributes
    ----------
    centre : float
    M, N : int
        Nominal numerator and denominator degrees.
    p, q : ndarray of complex
        Ascending coefficients, ``len(p) == M + 1`` and ``len(q) == N + 1``.
    poles : ndarray of complex
        Roots of the denominator in the ``omega`` frame.  Trailing denominator
        coefficients that vanish to rounding are dropped first, so a model
        with an effectively lower denominator degree has fewer poles.
    residual : float
        Relative residual of the coefficient system.
    froissart : bool
        True when a pole and a numerator zero nearly cancel.
    """

    centre: float
    M: int
    N: int
    p: np.ndarray
    q: np.ndarray
    poles: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    residual: float = 0.0
    froissart: bool = False

    def __call__(self, omega, nan_on_pole: bool = False):
        return evaluate(self, omega, nan_on_pole=nan_on_pole)

    def taylor(self, order: int) -> Jet:
        """Re-expand the rational function about its centre."""
        pa = np.zeros(order + 1, dtype=complex)
        qa = np.zeros(order + 1, dtype=complex)
        pa[: min(order, self.M) + 1] = self.p[: order + 1]
        qa[: min(order, self.N) + 1] = self.q[: order + 1]
        return Jet(pa, self.centre) / Jet(qa, self.centre)

    def to_dict(self) -> dict:
        def cl(z):
            return [[float(v.real), float(v.imag)] for v in np.atleast_1d(z)]

        return {"centre": float(self.centre), "M": self.M, "N": self.N,
                "p": cl(self.p), "q": cl(self.q), "poles": cl(self.poles)}


def _pade_matrix(a: np.ndarray, M: int, N: int) -> np.ndarray:
    # unknowns x = (p_0..p_M, q_1..q_N); equation i reads
    # p_i - sum_{j=1}^{min(i,N)} a_{i-j} q_j = a_i
    n = M + N + 1
    A = np.zeros((n, n), dtype=complex)
    for i in range(n):
        if i <= M:
            A[i, i] = 1.0
        for j in range(1, min(i, N) + 1):
            A[i, M + j] = -a[i - j]
    return A


def _scale_radius(a: np.ndarray) -> float:
    # a rough radius of convergence, used to balance the coefficient sizes
    nz = np.flatnonzero(np.abs(a) > 0)
    if nz.size < 2:
        return 1.0
    i0, i1 = nz[0], nz[-1]
    r = (abs(a[i0]) / abs(a[i1])) ** (1.0 / (i1 - i0))
    return r if np.isfinite(r) and r > 0 else 1.0


def fit(coeffs, M: int, N: int, centre: float | None = None) -> PadeModel:
    """Fit the ``[M, N]`` Padé approximant to a jet.

    Parameters
    ----------
    coeffs : Jet or array_like
        Scaled Taylor coefficients ``a_0 .. a_K`` with ``K >= M + N``.  A
        bare array needs ``centre``.
    M, N : int
        Numerator and denominator degrees.

    Returns
    -------
    PadeModel

    Notes
    -----
    The frequency variable is rescaled by an estimate of the convergence
    radius before solving, which keeps the Krylov iteration well balanced.
    The scaling is undone on the returned coefficients.
    """
    if isinstance(coeffs, Jet):
        a = np.asarray(coeffs.coeffs, dtype=complex)
        centre = float(np.real(coeffs.centre)) if centre is None else centre
    else:
        a = np.asarray(coeffs, dtype=complex)
        if centre is None:
            raise ValueError("centre is required for a bare coefficient array")
    if a.ndim != 1:
        raise ValueError("fit takes one scalar jet; loop over modes outside")
    if M < 0 or N < 0:
        raise ValueError("degrees must be nonnegative")
    K = M + N
    if a.size < K + 1:
        raise ValueError(f"jet order {a.size - 1} is below M + N = {K}")
    a = a[: K + 1]
    norm_a = float(np.linalg.norm(a))
    if norm_a == 0.0:
        q = np.zeros(N + 1, dtype=complex)
        q[0] = 1.0
        return PadeModel(centre, M, N, np.zeros(M + 1, dtype=complex), q)
    rho = _scale_radius(a)
    scale = rho ** np.arange(K + 1)
    ahat = a * scale
    A = _pade_matrix(ahat, M, N)
    n = K + 1
    x, _ = gmres(A, ahat, x0=np.zeros(n, dtype=complex), rtol=1e-15, atol=0.0,
                 restart=n, maxiter=1)
    res = float(np.linalg.norm(A @ x - ahat) / np.linalg.norm(ahat))
    p = x[: M + 1] / scale[: M + 1]
    q = np.concatenate([[1.0], x[M + 1:]]) / scale[: N + 1]
    # the first equation decouples, so p_0 = a_0 holds exactly
    p[0] = a[0]
    if res > 1e-10:
        warnings.warn(f"Padé system residual {res:.2e} (degenerate fit)", DegenerateFitWarning,
                      stacklevel=2)
    model = PadeModel(centre, M, N, p.astype(complex), q.astype(complex), residual=res)
    model.poles = poles(model) if N > 0 else np.zeros(0, dtype=complex)
    model.froissart = _has_doublet(model)
    return model


def _horner(c: np.ndarray, s):
    out = np.zeros_like(s, dtype=complex)
    for v in c[::-1]:
        out = out * s + v
    return out


def evaluate(model: PadeModel, omega, nan_on_pole: bool = False):
    """Evaluate the surrogate at real frequencies by Horner's rule.

    Raises
    ------
    PoleHitError
        When the denominator is zero to rounding relative to the size of its
        terms.  With ``nan_on_pole=True`` such points return NaN instead.
    """
    w = np.asarray(omega, dtype=float)
    s = (w - model.centre).astype(complex)
    num = _horner(model.p, s)
    den = _horner(model.q, s)
    scale = _horner(np.abs(model.q), np.abs(s)).real
    hit = np.abs(den) <= 1e-14 * scale
    if np.any(hit):
        if not nan_on_pole:
            raise PoleHitError(f"evaluation at a pole of the Padé model near {model.centre}")
        den = np.where(hit, np.nan, den)
    with np.errstate(invalid="ignore"):
        out = num / den
    return out if out.ndim else complex(out)


def _trim(c: np.ndarray) -> np.ndarray:
    mag = np.abs(c)
    top = mag.max() if mag.size else 0.0
    n = c.size
    while n > 1 and mag[n - 1] <= 1e-14 * top:
        n -= 1
    return c[:n]


def aberth(c, max_iter: int = 200, tol: float = 1e-12) -> np.ndarray:
    """All roots of ``sum c_i z^i`` by the Aberth–Ehrlich iteration.

    The starting points sit on a circle of radius ``1.2 |c_0/c_n|^(1/n)``
    with an angular offset of 0.4 rad, and every root is refined
    simultaneously with the third-order Aberth correction.

    Parameters
    ----------
    c : array_like
        Ascending coefficients with a nonzero leading coefficient.

    Raises
    ------
    RootFindingError
        If the roots are not converged after ``max_iter`` sweeps.
    """
    c = np.asarray(c, dtype=complex)
    n = c.size - 1
    if n < 1:
        return np.zeros(0, dtype=complex)
    if c[-1] == 0:
        raise ValueError("leading coefficient is zero")
    # factor out roots at the origin first
    nz = 0
    while nz < n and c[nz] == 0:
        nz += 1
    zeros0 = np.zeros(nz, dtype=complex)
    c = c[nz:]
    n = c.size - 1
    if n == 0:
        return zeros0
    dc = c[1:] * np.arange(1, n + 1)
    absc = np.abs(c)
    r0 = abs(c[0] / c[-1]) ** (1.0 / n)
    z = 1.2 * r0 * np.exp(1j * (2 * np.pi * np.arange(n) / n + 0.4))
    polish = 2
    for _ in range(max_iter):
        pz = _horner(c, z)
        dpz = _horner(dc, z)
        scale = _horner(absc, np.abs(z)).real
        done = np.abs(pz) <= tol * scale
        if np.all(done):
            # a couple of full sweeps past the stopping test take the roots
            # from the backward-error level to rounding level
            if polish == 0:
                return np.concatenate([zeros0, z])
            polish -= 1
            done[:] = False
        ratio = np.where(done, 0.0, pz / np.where(dpz == 0, 1e-300, dpz))
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        corr = ratio / (1.0 - ratio * inv.sum(axis=1))
        z = z - corr
        if np.all(np.abs(corr) <= 1e-16 * np.maximum(np.abs(z), 1e-300)):
            break
    pz = _horner(c, z)
    scale = _horner(absc, np.abs(z)).real
    if np.all(np.abs(pz) <= 1e3 * tol * scale):
        return np.concatenate([zeros0, z])
    raise RootFindingError(f"Aberth iteration did not converge for degree {n}")


def poles(model: PadeModel) -> np.ndarray:
    """Poles of the model in the ``omega`` frame, sorted by real part."""
    q = _trim(model.q)
    if q.size < 2:
        return np.zeros(0, dtype=complex)
    r = aberth(q) + model.centre
    return r[np.argsort(r.real)]


def _has_doublet(model: PadeModel, tol: float = 1e-8) -> bool:
    if model.poles.size == 0:
        return False
    p = _trim(model.p)
    if p.size < 2:
        return False
    try:
        zeros = aberth(p) + model.centre
    except RootFindingError:
        return False
    d = np.abs(model.poles[:, None] - zeros[None, :])
    return bool(np.any(d < tol * np.maximum(1.0, np.abs(model.poles[:, None]))))


# ---------------------------------------------------------------------------
# mode families and the transmittance surrogate


@dataclass
class ModeFamily:
    """Per-mode Padé models sharing one centre.

    ``models[k]`` and ``lower[k]`` are the ``[M, N]`` and ``[M-1, N]``
    approximants of the transmitted amplitude ``C_m = C_m^+ + delta_m0`` of
    mode ``m[k]``; ``reflected[k]`` approximates ``C_m^-``.
    """

    centre: float
    m: np.ndarray
    models: list
    lower: list
    reflected: list
    values: np.ndarray | None = None  # (T, R) at the centre from the solve

    def all_poles(self) -> np.ndarray:
        if not self.models:
            return np.zeros(0, dtype=complex)
        return np.concatenate([md.poles for md in self.models])

    def to_dict(self) -> dict:
        return {"centre": float(self.centre), "m": [int(v) for v in self.m],
                "models": [md.to_dict() for md in self.models]}


def fit_family(ff, M: int, N: int) -> ModeFamily:
    """Fit ``[M, N]`` and ``[M-1, N]`` models for every propagating mode of a far field."""
    centre = float(np.real(ff.C_shifted.centre))
    models, lower, refl = [], [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateFitWarning)
        for k in range(len(ff.m)):
            cj = ff.C_shifted[k]
            models.append(fit(cj, M, N))
            lower.append(fit(cj, M - 1, N) if M >= 1 else None)
            refl.append(fit(ff.C_minus[k], M, N))
    vals = None
    if ff.T is not None:
        vals = np.array([ff.T.coeffs[0].real, ff.R.coeffs[0].real])
    return ModeFamily(centre, np.asarray(ff.m), models, lower, refl, vals)


def transmittance_estimate(family: ModeFamily, omega, params, which: str = "T",
                           nan_on_pole: bool = False):
    """Surrogate ``T(omega) = (1/sin theta) sum_m |C_m(omega)|^2 d_m2(omega)``.

    Parameters
    ----------
    which : {"T", "T_lower", "R"}
        ``"T_lower"`` uses the ``[M-1, N]`` companion models and ``"R"`` the
        reflected amplitudes.
    """
    w = np.asarray(omega, dtype=float)
    src = {"T": family.models, "T_lower": family.lower, "R": family.reflected}[which]
    total = np.zeros_like(w, dtype=float)
    for m, md in zip(family.m, src):
        d = dm2_response(w, m, params)
        if not np.any(d > 0):
            continue
        c = evaluate(md, w, nan_on_pole=nan_on_pole)
        total = total + np.abs(c) ** 2 * d
    total = total / params.sin_theta
    return total if total.ndim else float(total)

