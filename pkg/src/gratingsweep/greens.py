"""Quasi-periodic Green function by Ewald summation, with frequency jets.

The Green function of a grating with period ``L`` along ``x1`` is split into
a spatial series ``G_p1`` (exponential integrals) and a spectral series
``G_p2`` (complementary error functions).  The splitting parameter ``E`` is
frozen for a given expansion centre, so every ``E_j`` argument is independent
of the frequency and only the factors ``(k/2E)^{2j}``, the Bloch phases and
the spectral quantities ``xi_m``, ``k~_m`` carry frequency jets.

Spatial derivatives are obtained by differentiating each summand in closed
form.  For the spectral series the useful identities are, with
``f = T_a + T_b`` the bracketed sum,

* ``d f / dY = i k~ (T_a - T_b)``
* ``d^2 f / dY^2 = -k~^2 f + (4 i E k~ / sqrt(pi)) exp(k~^2/4E^2 - E^2 Y^2)``

and ``d/dX`` multiplies by ``i xi_m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from . import _ewald
from .jets import Jet, jet_exp, jet_sqrt


class ConvergenceError(ArithmeticError):
    """An Ewald series did not reach its truncation tolerance within the term cap."""


class WoodAnomalyError(ArithmeticError):
    """A spectral wavenumber vanishes (Rayleigh/Wood anomaly)."""


@dataclass(frozen=True)
class LatticeParams:
    """Grating period ``L``, phase speed ``c`` and incidence angle ``theta`` (radians)."""

    L: float
    c: float = 1.0
    theta: float = math.pi / 2

    def __post_init__(self):
        if not (self.L > 0 and self.c > 0):
            raise ValueError("L and c must be positive")
        if not (0 < self.theta <= math.pi / 2 + 1e-15):
            raise ValueError("theta must lie in (0, pi/2]")

    @property
    def cos_theta(self) -> float:
        # exact zero at normal incidence keeps beta = 0 exactly
        return 0.0 if self.theta == math.pi / 2 else math.cos(self.theta)

    @property
    def sin_theta(self) -> float:
        return math.sin(self.theta)


@dataclass(frozen=True)
class EwaldConfig:
    """Series controls.

    Attributes
    ----------
    mode : {"adaptive", "optimal"}
        Rule for the splitting parameter when ``splitting`` is not given.
    splitting : float or None
        Fixed splitting parameter ``E``; overrides ``mode``.
    trunc_rel_tol : float
        A series stops once a symmetric pair of summands is below this
        fraction of the partial sum, for every derivative order.
    H_cap, K_terms, eps_breakdown : float, int, float
        Parameters of the adaptive splitting rule.
    """

    mode: str = "adaptive"
    splitting: float | None = None
    trunc_rel_tol: float = 1e-7
    H_cap: float = 9.0
    K_terms: int = 13
    eps_breakdown: float = 1e-16

    def __post_init__(self):
        if self.mode not in ("adaptive", "optimal"):
            raise ValueError(f"unknown splitting mode {self.mode!r}")
        if not (0 < self.trunc_rel_tol < 1):
            raise ValueError("trunc_rel_tol must lie in (0, 1)")
        if self.splitting is not None and not self.splitting > 0:
            raise ValueError("splitting must be positive")


TABLE_CONFIG = EwaldConfig(trunc_rel_tol=1e-16)


def splitting_parameter(k: float, params: LatticeParams, mode: str = "adaptive", cfg: EwaldConfig = EwaldConfig()) -> float:
    """Ewald splitting parameter ``E`` for wavenumber ``k``.

    ``optimal`` gives ``sqrt(pi)/L``.  ``adaptive`` keeps that value below the
    first anomaly wavenumber ``2 pi / L`` and otherwise raises it enough to
    avoid overflow in ``exp(k~_0^2 / 4E^2)`` and to keep the ``j`` series
    short at high frequency.
    """
    e_opt = math.sqrt(math.pi) / params.L
    if mode == "optimal" or k < 2 * math.pi / params.L:
        return e_opt
    xi0 = k * params.cos_theta
    kt0 = math.sqrt(max(k * k - xi0 * xi0, 0.0))
    K = cfg.K_terms
    third = k / (2.0 * (cfg.eps_breakdown * math.factorial(K)) ** (1.0 / (2 * K)))
    return max(e_opt, kt0 / (2.0 * cfg.H_cap), third)


@dataclass
class SpectralIndexSet:
    """Propagating diffraction orders and their spectral quantities as jets."""

    beta: Jet
    xi: Jet
    ktilde: Jet
    m_min: int
    m_max: int

    @property
    def m(self) -> np.ndarray:
        return np.arange(self.m_min, self.m_max + 1)


def _as_omega_jet(omega, order=0) -> Jet:
    if isinstance(omega, Jet):
        return omega
    return Jet.variable(float(omega), order)


def mode_range(k: float, params: LatticeParams) -> tuple[int, int]:
    beta = k * params.L * params.cos_theta
    kl = k * params.L
    return -math.floor((kl + beta) / (2 * math.pi)), math.floor((kl - beta) / (2 * math.pi))


def _ktilde_jets(omega0: float, order: int, m: np.ndarray, params: LatticeParams, guard=True):
    """Jets of ``xi_m`` and ``k~_m`` for the indices ``m`` (batched)."""
    c, L, ct = params.c, params.L, params.cos_theta
    k0 = omega0 / c
    no = order + 1
    xi0 = k0 * ct + 2 * math.pi * m / L
    xi1 = ct / c
    xi = np.zeros((m.size, no), dtype=complex)
    xi[:, 0] = xi0
    if no > 1:
        xi[:, 1] = xi1
    rad = np.zeros((m.size, no), dtype=complex)
    rad[:, 0] = k0 * k0 - xi0 * xi0
    if no > 1:
        rad[:, 1] = 2 * (k0 / c - xi0 * xi1)
    if no > 2:
        rad[:, 2] = 1.0 / c**2 - xi1 * xi1
    r0 = rad[:, 0].real
    if guard and np.any(np.sqrt(np.abs(r0)) < 1e-8 * k0):
        bad = m[np.sqrt(np.abs(r0)) < 1e-8 * k0]
        raise WoodAnomalyError(f"k~_m vanishes for m={bad.tolist()} at omega={omega0}")
    kt = np.empty_like(rad)
    prop = r0 >= 0
    if np.any(prop):
        kt[prop] = jet_sqrt(Jet(rad[prop], omega0)).coeffs
    if np.any(~prop):
        kt[~prop] = 1j * jet_sqrt(Jet(-rad[~prop], omega0)).coeffs
    return Jet(xi, omega0), Jet(kt, omega0), Jet(rad, omega0)


def spectral_index_set(omega, params: LatticeParams, order: int = 0, guard: bool = True) -> SpectralIndexSet:
    """Propagating index range and jets of ``beta``, ``xi_m`` and ``k~_m``."""
    w = _as_omega_jet(omega, order)
    w0 = float(np.real(w.value))
    if not w0 > 0:
        raise ValueError("omega must be positive")
    k0 = w0 / params.c
    m_min, m_max = mode_range(k0, params)
    m = np.arange(m_min, m_max + 1)
    xi, kt, _ = _ktilde_jets(w0, w.order, m, params, guard=guard)
    beta = Jet.variable(w0, w.order) * (params.L * params.cos_theta / params.c)
    return SpectralIndexSet(beta=beta, xi=xi, ktilde=kt, m_min=m_min, m_max=m_max)


def _s_table(kappa0: float, kappa1: float, order: int):
    """Coefficients of ``(kappa0 + kappa1 d)^{2j} / j!`` for ``j = 0..J``."""
    no = order + 1
    # log magnitude of the order-0 term and its peak
    jpeak = int(kappa0 * kappa0) + 1
    rows = []
    j = 0
    logmax = -np.inf
    while True:
        i = np.arange(no)
        valid = i <= 2 * j
        with np.errstate(divide="ignore"):
            logs = np.where(
                valid,
                gammaln(2 * j + 1) - gammaln(i + 1) - gammaln(np.maximum(2 * j - i, 0) + 1)
                + (2 * j - i) * math.log(kappa0) + i * math.log(kappa1) - gammaln(j + 1),
                -np.inf,
            )
        rows.append(np.where(valid, np.exp(np.minimum(logs, 700.0)), 0.0))
        logmax = max(logmax, np.max(logs))
        if j > jpeak + no and np.max(logs) < logmax - 85.0:
            break
        j += 1
        if j > _ewald.HARD_TERM_CAP:
            raise ConvergenceError("exponential-integral series exceeds the term cap")
    return np.array(rows), max(jpeak, (order + 1) // 2) + 1


@dataclass
class EwaldContext:
    """Frequency-jet tables for one expansion centre and splitting parameter.

    Building a context is the per-centre setup cost; afterwards point
    evaluations only run the compiled series.
    """

    omega0: float
    order: int
    params: LatticeParams
    cfg: EwaldConfig = field(default_factory=EwaldConfig)
    E: float | None = None
    guard: bool = True

    def __post_init__(self):
        p = self.params
        k0 = self.omega0 / p.c
        if self.E is None:
            self.E = self.cfg.splitting or splitting_parameter(k0, p, self.cfg.mode, self.cfg)
        E = self.E
        self.k0 = k0
        self.S, self.jmin = _s_table(k0 / (2 * E), 1.0 / (2 * E * p.c), self.order)
        # spectral indices: Gaussian factor exp(-xi^2/4E^2) falls below 1e-300
        xi_cut = 2 * E * 26.5 + abs(k0) + 1.0
        self.mcap = int(math.ceil(xi_cut * p.L / (2 * math.pi))) + 2
        m = np.arange(-self.mcap, self.mcap + 1)
        xi, kt, rad = _ktilde_jets(self.omega0, self.order, m, p, guard=self.guard)
        self.xi0 = np.ascontiguousarray(xi.coeffs[:, 0].real)
        self.xi1 = p.cos_theta / p.c
        self.KT = np.ascontiguousarray(kt.coeffs)
        self.IKT = np.ascontiguousarray((1.0 / kt).coeffs)
        self.EG = np.ascontiguousarray(jet_exp(rad * (1.0 / (4 * E * E))).coeffs)
        self.beta0 = k0 * p.L * p.cos_theta
        self.beta1 = p.L * p.cos_theta / p.c
        self.tol = self.cfg.trunc_rel_tol

    def kernel_args(self):
        return (self.S, self.jmin, self.KT, self.IKT, self.EG, self.xi0, self.xi1, self.mcap,
                self.E, self.params.L, self.beta0, self.beta1, self.tol)

    def evaluate(self, X: float, Y: float, derivs: bool = True, exclude_n0: bool = False, parts: str = "both"):
        """Rows ``(G, G_x, G_y, G_xx, G_xy, G_yy)`` of jets at ``rho = (X, Y)``."""
        nrows = 6 if derivs else 1
        out = np.zeros((6, self.order + 1), dtype=complex)
        counts = np.zeros(3, dtype=np.int64)
        if parts in ("both", "gp1"):
            st = _ewald.gp1_point(float(X), float(Y), self.S, self.jmin, self.E, self.params.L,
                                  self.beta0, self.beta1, self.tol, nrows, exclude_n0, out, counts)
            self._check(st, X, Y)
        if parts in ("both", "gp2"):
            st = _ewald.gp2_point(float(X), float(Y), self.KT, self.IKT, self.EG, self.xi0, self.xi1,
                                  self.mcap, self.E, self.params.L, self.tol, nrows, out, counts)
            self._check(st, X, Y)
        self.last_counts = counts.copy()
        return out[:nrows]

    @staticmethod
    def _check(st, X, Y):
        if st == _ewald.LATTICE_POINT:
            raise ValueError(f"Green function evaluated at a lattice point rho=({X}, {Y})")
        if st != _ewald.OK:
            raise ConvergenceError(f"Ewald series did not converge at rho=({X}, {Y})")


def _context(omega, params, cfg, order=0) -> EwaldContext:
    w = _as_omega_jet(omega, order)
    return EwaldContext(float(np.real(w.value)), w.order, params, cfg)


def greens_gp1(x_minus_y, omega, params: LatticeParams, cfg: EwaldConfig = EwaldConfig(), order: int = 0) -> Jet:
    """Spatial Ewald series as a jet in the angular frequency."""
    ctx = _context(omega, params, cfg, order)
    return Jet(ctx.evaluate(*x_minus_y, derivs=False, parts="gp1")[0], ctx.omega0)


def greens_gp2(x_minus_y, omega, params: LatticeParams, cfg: EwaldConfig = EwaldConfig(), order: int = 0) -> Jet:
    """Spectral Ewald series as a jet in the angular frequency."""
    ctx = _context(omega, params, cfg, order)
    return Jet(ctx.evaluate(*x_minus_y, derivs=False, parts="gp2")[0], ctx.omega0)


def greens_periodic(x_minus_y, omega, params: LatticeParams, cfg: EwaldConfig = EwaldConfig(), order: int = 0) -> Jet:
    """Quasi-periodic Green function ``G_p = G_p1 + G_p2``."""
    ctx = _context(omega, params, cfg, order)
    return Jet(ctx.evaluate(*x_minus_y, derivs=False)[0], ctx.omega0)


def greens_all(x_minus_y, omega, params: LatticeParams, cfg: EwaldConfig = EwaldConfig(), order: int = 0):
    """Value, gradient and Hessian (with respect to ``x - y``) as jets."""
    ctx = _context(omega, params, cfg, order)
    rows = ctx.evaluate(*x_minus_y, derivs=True)
    return Jet(rows[0], ctx.omega0), Jet(rows[1:3], ctx.omega0), Jet(rows[3:6], ctx.omega0)


def greens_kernel_derivs(x, y, n_x, n_y, omega, alpha, params: LatticeParams, cfg: EwaldConfig = EwaldConfig(), order: int = 0) -> Jet:
    """Burton-Miller kernel ``dG/dn_y + alpha d^2G/dn_x dn_y`` as a jet."""
    x, y, n_x, n_y = (np.asarray(v, dtype=float) for v in (x, y, n_x, n_y))
    if np.allclose(x, y):
        raise ValueError("kernel requested at coincident points")
    ctx = _context(omega, params, cfg, order)
    r = ctx.evaluate(*(x - y), derivs=True)
    dny = -(r[1] * n_y[0] + r[2] * n_y[1])
    hn = np.array([r[3] * n_y[0] + r[4] * n_y[1], r[4] * n_y[0] + r[5] * n_y[1]])
    dnxny = -(n_x[0] * hn[0] + n_x[1] * hn[1])
    w0 = ctx.omega0
    a = alpha if isinstance(alpha, Jet) else Jet.constant(alpha, ctx.order, w0)
    return Jet(dny, w0) + a * Jet(dnxny, w0)


def lattice_sum_reference(x_minus_y, k: float, params: LatticeParams, n_terms: int = 20000) -> complex:
    """Slow direct image sum of free-space Green functions, for testing.

    Only useful at complex wavenumbers or for crude checks: the series
    converges like ``n^{-1/2}`` on the real axis.
    """
    from scipy.special import hankel1

    X, Y = x_minus_y
    n = np.arange(-n_terms, n_terms + 1)
    r = np.hypot(X - n * params.L, Y)
    beta = k * params.L * params.cos_theta
    return complex(np.sum(0.25j * hankel1(0, k * r) * np.exp(1j * n * beta)))


@dataclass(frozen=True)
class AppendixCase:
    name: str
    omega: float
    c: float
    theta_deg: float
    L: float
    rho: tuple
    mode: str

    @cached_property
    def params(self) -> LatticeParams:
        return LatticeParams(self.L, self.c, math.radians(self.theta_deg))


APPENDIX_CASES = {
    1: AppendixCase("Case 1", 1.3, 1.0, 60.0, 2.2, (0.2, 0.0), "optimal"),
    2: AppendixCase("Case 2", 8.3, 1.0, 60.0, 2.2, (0.2, 0.0), "optimal"),
    3: AppendixCase("Case 3", 8.3, 1.0, 60.0, 2.2, (0.2, 0.0), "adaptive"),
}


def appendix_table(case: int, order: int = 6, cfg: EwaldConfig | None = None):
    """Raw derivatives ``G_p1^(i)`` and ``G_p2^(i)`` for an appendix test case.

    Returns
    -------
    gp1, gp2 : ndarray of complex, length ``order + 1``
    ctx : EwaldContext
        The context used, for inspecting ``E`` and term counts.
    """
    spec = APPENDIX_CASES[case]
    base = cfg or TABLE_CONFIG
    cfg = EwaldConfig(mode=spec.mode, splitting=base.splitting, trunc_rel_tol=base.trunc_rel_tol,
                      H_cap=base.H_cap, K_terms=base.K_terms, eps_breakdown=base.eps_breakdown)
    ctx = EwaldContext(spec.omega, order, spec.params, cfg)
    g1 = ctx.evaluate(*spec.rho, derivs=False, parts="gp1")[0]
    c1 = ctx.last_counts.copy()
    g2 = ctx.evaluate(*spec.rho, derivs=False, parts="gp2")[0]
    ctx.last_counts[:2] = c1[:2]
    fact = np.array([math.factorial(i) for i in range(order + 1)], dtype=float)
    return g1 * fact, g2 * fact, ctx
