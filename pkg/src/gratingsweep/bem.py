"""Constant-element collocation for the Burton-Miller equation of a grating.

The unknown is the total field ``u`` on the rigid scatterer boundaries of one
unit cell.  The discrete system at frequency ``omega0 + d`` is expanded as
``A(d) u(d) = b(d)`` in scaled Taylor coefficients, so that

    A_0 u_i = b_i - sum_{j=1..i} A_j u_{i-j}

and a single LU factorization of ``A_0`` serves every order.

The coupling constant is frozen at ``alpha0 = -i/k0`` inside a solve.  The
exact boundary trace does not depend on the coupling constant, so freezing it
leaves every derivative of ``u`` unchanged while removing the ``alpha``
derivative terms from the recursion.

Matrix blocks are built per pair of scatterers and reused when two pairs are
related by a rigid translation.  Pairs whose vertical extents are separated
by a gap use the plane-wave expansion of the Green function, which is
separable and cheap; other pairs go through the compiled Ewald kernel.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy.special import gammainc, gammaln

from . import _ewald
from .greens import (
    ConvergenceError,
    EwaldConfig,
    EwaldContext,
    LatticeParams,
    _ktilde_jets,
)
from .jets import Jet, jet_exp
from .specfun import expint_scalar

log = logging.getLogger(__name__)


class GeometryError(ValueError):
    pass


class SingularSystemError(ArithmeticError):
    """The value-part matrix is numerically singular."""


@dataclass(frozen=True)
class ScattererSpec:
    """Circular rigid scatterer."""

    centre: tuple
    radius: float
    element_count: int

    def __post_init__(self):
        if self.radius <= 0:
            raise GeometryError("radius must be positive")
        if self.element_count < 8:
            raise GeometryError("at least 8 elements per scatterer")


@dataclass
class BoundaryMesh:
    """Straight constant elements; normals point from the fluid into the scatterer."""

    a: np.ndarray
    b: np.ndarray
    owner: np.ndarray
    specs: tuple = ()

    @property
    def size(self) -> int:
        return self.a.shape[0]

    @property
    def mid(self) -> np.ndarray:
        return 0.5 * (self.a + self.b)

    @property
    def length(self) -> np.ndarray:
        return np.linalg.norm(self.b - self.a, axis=1)

    @property
    def tangent(self) -> np.ndarray:
        return (self.b - self.a) / self.length[:, None]

    @property
    def normal(self) -> np.ndarray:
        t = self.tangent
        # nodes run counter-clockwise, so (-t_y, t_x) points inwards
        return np.stack([-t[:, 1], t[:, 0]], axis=1)

    def translated(self, shift) -> "BoundaryMesh":
        s = np.asarray(shift, dtype=float)
        specs = tuple(ScattererSpec((sp.centre[0] + s[0], sp.centre[1] + s[1]), sp.radius, sp.element_count) for sp in self.specs)
        return BoundaryMesh(self.a + s, self.b + s, self.owner.copy(), specs)

    def element_slices(self):
        out = []
        start = 0
        for sp in self.specs:
            out.append(slice(start, start + sp.element_count))
            start += sp.element_count
        return out


def build_mesh(specs, L: float | None = None) -> BoundaryMesh:
    """Equal-arc chord discretization of circular scatterers.

    Parameters
    ----------
    specs : sequence of ScattererSpec
    L : float, optional
        Period; when given, each scatterer must lie strictly inside the strip
        ``0 < x1 < L``.
    """
    specs = tuple(specs)
    for i, s in enumerate(specs):
        cx, cy = s.centre
        if L is not None and not (cx - s.radius > 0 and cx + s.radius < L):
            raise GeometryError(f"scatterer {i} crosses the unit-cell boundary")
        for j in range(i):
            t = specs[j]
            if math.hypot(cx - t.centre[0], cy - t.centre[1]) <= s.radius + t.radius:
                raise GeometryError(f"scatterers {j} and {i} overlap")
    a, b, owner = [], [], []
    for i, s in enumerate(specs):
        n = s.element_count
        ang = 2 * np.pi * np.arange(n + 1) / n
        pts = np.stack([s.centre[0] + s.radius * np.cos(ang), s.centre[1] + s.radius * np.sin(ang)], axis=1)
        a.append(pts[:-1])
        b.append(pts[1:])
        owner.append(np.full(n, i))
    if not specs:
        return BoundaryMesh(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0, dtype=int), specs)
    return BoundaryMesh(np.concatenate(a), np.concatenate(b), np.concatenate(owner), specs)


def direction(params: LatticeParams) -> np.ndarray:
    return np.array([params.cos_theta, params.sin_theta])


def incident_jets(x, n, omega, params: LatticeParams):
    """Plane wave ``exp(i k d.x)`` and its normal flux as jets in ``omega``.

    ``x`` may be a single point or an array of points (last axis 2); ``n`` the
    matching normals or ``None``.
    """
    w = omega if isinstance(omega, Jet) else Jet.variable(float(omega), 0)
    w0 = float(np.real(w.value))
    no = w.order + 1
    d = direction(params)
    x = np.asarray(x, dtype=float)
    dx = x @ d
    phase = np.zeros(dx.shape + (no,), dtype=complex)
    phase[..., 0] = 1j * w0 * dx / params.c
    if no > 1:
        phase[..., 1] = 1j * dx / params.c
    u = jet_exp(Jet(phase, w0))
    if n is None:
        return u, None
    dn = np.asarray(np.asarray(n, dtype=float) @ d)
    k = w * (1.0 / params.c)
    q = u * Jet(1j * dn[..., None] * k.coeffs, w0)
    return u, q


# ---------------------------------------------------------------------------
# quadrature and singular integrals


def gauss_rules(counts=(16, 6, 3)):
    """Stacked Gauss-Legendre rules on ``[-1, 1]`` padded to a common width."""
    width = max(counts)
    nodes = np.zeros((len(counts), width))
    weights = np.zeros((len(counts), width))
    for r, n in enumerate(counts):
        x, w = np.polynomial.legendre.leggauss(n)
        nodes[r, :n] = x
        weights[r, :n] = w
    return nodes, weights, counts


def finite_part_moments(c: float, a: float, jmax: int) -> np.ndarray:
    """Half-element integrals ``J_j = p.f. int_0^a E_j(c s^2) ds`` for ``j = 0..jmax``.

    ``J_0`` is a Hadamard finite part (the integrand behaves like
    ``1/(c s^2)``), ``J_1`` has an integrable logarithm and the remaining ones
    are regular; they follow from moment recursions of the exponential
    integral recurrence.
    """
    x = c * a * a
    out = np.zeros(jmax + 1)
    out[0] = (-math.exp(-x) / a - math.sqrt(math.pi * c) * math.erf(math.sqrt(x))) / c
    if jmax == 0:
        return out
    e1 = expint_scalar(1, x)
    out[1] = a * e1 + math.sqrt(math.pi / c) * math.erf(math.sqrt(x))
    if jmax == 1:
        return out
    p = np.arange(jmax + 2)
    reg = gammainc(p + 0.5, x)
    with np.errstate(divide="ignore"):
        G = np.where(reg > 0, np.exp(np.log(reg) + gammaln(p + 0.5) - (p + 0.5) * math.log(c)) / 2, 0.0)
    K = a ** (2 * p + 1) * e1 / (2 * p + 1) + 2 * G / (2 * p + 1)
    for j in range(2, jmax + 1):
        K = (G[: K.size - 1] - c * K[1:]) / (j - 1)
        out[j] = K[0]
    return out


# ---------------------------------------------------------------------------
# assembly


@dataclass
class AssemblyOptions:
    """Numerical knobs of the matrix assembly.

    Attributes
    ----------
    quad_counts : tuple of int
        Gauss points for adjacent, mid-range and far elements.
    spectral_gap : float
        Minimum vertical gap, in units of the period, between two scatterers
        for their interaction block to use the plane-wave expansion.
    spectral_tol : float
        Truncation level of the plane-wave expansion.
    spectral_points : int
        Gauss points per element in the plane-wave path.
    """

    quad_counts: tuple = (16, 6, 3)
    spectral_gap: float = 0.3
    spectral_tol: float = 1e-12
    spectral_points: int = 4


@dataclass
class SolveResult:
    """Boundary traces and their frequency jets at one expansion centre."""

    centre_omega: float
    order: int
    traces: Jet
    coupling: Jet
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    E: float = float("nan")


class Assembler:
    """Builds value and derivative matrices for one mesh and lattice."""

    def __init__(self, mesh: BoundaryMesh, params: LatticeParams, cfg: EwaldConfig = EwaldConfig(),
                 options: AssemblyOptions | None = None, coupling: complex | None = None):
        self.mesh = mesh
        # coupling=None selects alpha0 = -i/k0; any other value fixes alpha
        self.coupling = coupling
        self.params = params
        self.cfg = cfg
        self.opt = options or AssemblyOptions()
        self._nodes, self._weights, self._counts = gauss_rules(self.opt.quad_counts)
        self.stats = {"ewald_blocks": 0, "spectral_blocks": 0, "cached_blocks": 0}

    # -- blocks ----------------------------------------------------------
    def _block_key(self, p: int, q: int):
        sp, sq = self.mesh.specs[p], self.mesh.specs[q]
        off = (round(sq.centre[0] - sp.centre[0], 12), round(sq.centre[1] - sp.centre[1], 12))
        return (sp.radius, sp.element_count, sq.radius, sq.element_count, off)

    def _separated(self, p: int, q: int) -> float | None:
        sp, sq = self.mesh.specs[p], self.mesh.specs[q]
        dy = sp.centre[1] - sq.centre[1]
        gap = abs(dy) - sp.radius - sq.radius
        if gap >= self.opt.spectral_gap * self.params.L:
            # plane through the middle of the gap, between the two bodies
            lo, hi = (sq, sp) if dy > 0 else (sp, sq)
            return 0.5 * ((lo.centre[1] + lo.radius) + (hi.centre[1] - hi.radius))
        return None

    def _ewald_block(self, ctx: EwaldContext, rows: slice, cols: slice, alpha0: complex, diagonal: bool):
        m = self.mesh
        x = m.mid[rows]
        nx = m.normal[rows]
        a, b, ny, h = m.a[cols], m.b[cols], m.normal[cols], m.length[cols]
        nr, nc = x.shape[0], a.shape[0]
        self_index = np.arange(nr) if diagonal else np.full(nr, -1)
        no = ctx.order + 1
        out = np.zeros((nr, nc, no), dtype=complex)
        c = np.ascontiguousarray
        X, Y, W, I, J = _ewald.block_points(
            c(x[:, 0]), c(x[:, 1]), c(a[:, 0]), c(a[:, 1]), c(b[:, 0]), c(b[:, 1]), c(h),
            self_index, self._nodes, self._weights, *self._counts, self.params.L,
        )
        # G_p is even in Y, and also in X when the Bloch phase vanishes; evaluate
        # each canonical offset once and map back with signs
        even_x = self.params.cos_theta == 0.0
        sx = np.where(X < 0, -1.0, 1.0) if even_x else np.ones_like(X)
        sy = np.where(Y < 0, -1.0, 1.0)
        Xc, Yc = X * sx, Y * sy
        key = np.round(Xc, 12) + 1j * np.round(Yc, 12)
        _, first, inverse = np.unique(key, return_index=True, return_inverse=True)
        G = np.zeros((first.size, 6, no), dtype=complex)
        args = ctx.kernel_args()
        st = _ewald.eval_points(c(Xc[first]), c(Yc[first]), *args, False, G)
        if st != _ewald.OK:
            raise ConvergenceError("Ewald series failed during assembly")
        _ewald.block_accumulate(G, inverse.astype(np.int64), sx, sy, W, I, J,
                                c(nx[:, 0]), c(nx[:, 1]), c(ny[:, 0]), c(ny[:, 1]), complex(alpha0), out)
        if diagonal:
            # smooth remainder on the element itself: every image except n = 0
            gq, gw = self._nodes[0, : self._counts[0]], self._weights[0, : self._counts[0]]
            t = (b - a)
            Xs = (x[:, None, 0] - (0.5 * (a + b))[:, None, 0] - 0.5 * gq[None, :] * t[:, None, 0]).ravel()
            Ys = (x[:, None, 1] - (0.5 * (a + b))[:, None, 1] - 0.5 * gq[None, :] * t[:, None, 1]).ravel()
            Ws = (0.5 * h[:, None] * gw[None, :]).ravel()
            Is = np.repeat(np.arange(nr), gq.size)
            Gs = np.zeros((Xs.size, 6, no), dtype=complex)
            st = _ewald.eval_points(c(Xs), c(Ys), *args, True, Gs)
            if st != _ewald.OK:
                raise ConvergenceError("Ewald series failed on self elements")
            ones = np.ones(Xs.size)
            _ewald.block_accumulate(Gs, np.arange(Xs.size), ones, ones, Ws, Is, Is,
                                    c(nx[:, 0]), c(nx[:, 1]), c(ny[:, 0]), c(ny[:, 1]), complex(alpha0), out)
        if diagonal:
            # finite-part integral of the removed n = 0 spatial image
            E = ctx.E
            for i in range(nr):
                J = finite_part_moments(E * E, 0.5 * h[i], ctx.S.shape[0] - 1)
                hyp = (E * E / (2 * math.pi)) * 2.0 * (J @ ctx.S)
                out[i, i, :] += alpha0 * hyp
        self.stats["ewald_blocks"] += 1
        return out

    def _spectral_block(self, omega0: float, order: int, rows: slice, cols: slice, z_mid: float, alpha0: complex):
        m = self.mesh
        p = self.params
        x = m.mid[rows]
        nx = m.normal[rows]
        ya, yb, ny, h = m.a[cols], m.b[cols], m.normal[cols], m.length[cols]
        s = 1.0 if x[0, 1] > z_mid else -1.0
        ends = np.concatenate([ya[:, 1], yb[:, 1]])
        gap = abs(x[:, 1] - z_mid).min() + abs(ends - z_mid).min()
        k0 = omega0 / p.c
        # modes until exp(-kappa * 2 * gap) reaches the tolerance
        kappa_max = math.log(1.0 / self.opt.spectral_tol) / max(gap, 1e-12)
        mmax = int(math.ceil((kappa_max + k0 + abs(k0 * p.cos_theta)) * p.L / (2 * math.pi))) + 1
        mm = np.arange(-mmax, mmax + 1)
        xi, kt, _ = _ktilde_jets(omega0, order, mm, p)
        no = order + 1
        w1 = xi.coeffs  # (M, no)
        w2 = s * kt.coeffs
        cm = (1j / (2 * p.L)) * (1.0 / kt).coeffs  # (M, no)
        # rows: exp(i w.(x - z)) (w.n_x) ... built as jets over (Np, M)
        xr = x[:, 0:1, None]
        zr = (x[:, 1] - z_mid)[:, None, None]
        ph = 1j * (w1[None] * xr + w2[None] * zr)
        U = jet_exp(Jet(ph, omega0)).coeffs
        wnx = w1[None] * nx[:, 0, None, None] + w2[None] * nx[:, 1, None, None]
        fac = -1j * np.eye(1, no, dtype=complex)[0] + alpha0 * wnx
        U = Jet(U, omega0) * Jet(fac, omega0)
        U = U * Jet(np.broadcast_to(cm, U.coeffs.shape), omega0)
        # columns: (w.n_y) int exp(-i w.(y - z)) dGamma
        gx, gw = np.polynomial.legendre.leggauss(self.opt.spectral_points)
        mid = 0.5 * (ya + yb)
        V = np.zeros((mm.size, mid.shape[0], no), dtype=complex)
        for t, wt in zip(gx, gw):
            y = mid + 0.5 * t * (yb - ya)
            phy = -1j * (w1[:, None, :] * y[None, :, 0, None] + w2[:, None, :] * (y[None, :, 1, None] - z_mid))
            V += (0.5 * wt * h)[None, :, None] * jet_exp(Jet(phy, omega0)).coeffs
        wny = w1[:, None, :] * ny[None, :, 0, None] + w2[:, None, :] * ny[None, :, 1, None]
        V = (Jet(V, omega0) * Jet(wny, omega0)).coeffs
        Uc = U.coeffs
        out = np.zeros((x.shape[0], mid.shape[0], no), dtype=complex)
        for i in range(no):
            for a_ in range(i + 1):
                out[:, :, i] += Uc[:, :, a_] @ V[:, :, i - a_]
        self.stats["spectral_blocks"] += 1
        return out

    # -- public ----------------------------------------------------------
    def alpha0(self, omega0: float) -> complex:
        if self.coupling is not None:
            return complex(self.coupling)
        return -1j * self.params.c / omega0

    def context(self, omega0: float, order: int) -> EwaldContext:
        return EwaldContext(omega0, order, self.params, self.cfg)

    def matrix_jets(self, omega0: float, order: int, ctx: EwaldContext | None = None) -> np.ndarray:
        """Scaled coefficient matrices ``A_i``, shape ``(order + 1, N, N)``.

        ``A_0`` includes the ``1/2`` jump term.
        """
        mesh = self.mesh
        N = mesh.size
        ctx = ctx or self.context(omega0, order)
        alpha0 = self.alpha0(omega0)
        A = np.zeros((order + 1, N, N), dtype=complex)
        slices = mesh.element_slices()
        cache = {}
        for p, rs in enumerate(slices):
            for q, cs in enumerate(slices):
                key = self._block_key(p, q)
                if key in cache:
                    blk = cache[key]
                    self.stats["cached_blocks"] += 1
                else:
                    z = None if p == q else self._separated(p, q)
                    if z is not None:
                        blk = self._spectral_block(omega0, order, rs, cs, z, alpha0)
                    else:
                        blk = self._ewald_block(ctx, rs, cs, alpha0, diagonal=(p == q))
                    cache[key] = blk
                A[:, rs, cs] = np.moveaxis(blk, 2, 0)
        A[0] += 0.5 * np.eye(N)
        return A

    def rhs_jets(self, omega0: float, order: int) -> np.ndarray:
        """Scaled right-hand sides ``u_in + alpha0 q_in``, shape ``(order + 1, N)``."""
        w = Jet.variable(omega0, order)
        u, q = incident_jets(self.mesh.mid, self.mesh.normal, w, self.params)
        alpha0 = self.alpha0(omega0)
        return np.moveaxis((u + q * alpha0).coeffs, -1, 0)


def assemble(mesh: BoundaryMesh, omega, params: LatticeParams, cfg: EwaldConfig = EwaldConfig(), order: int = 0):
    """Matrix and right-hand-side jets of the discretized equation.

    Returns
    -------
    matrix : ndarray (N, N)
        Value part.
    matrix_jets : Jet with batch shape (N, N)
    rhs_jets : Jet with batch shape (N,)
    """
    w = omega if isinstance(omega, Jet) else Jet.variable(float(omega), order)
    w0 = float(np.real(w.value))
    asm = Assembler(mesh, params, cfg)
    A = asm.matrix_jets(w0, w.order)
    b = asm.rhs_jets(w0, w.order)
    return A[0], Jet(np.moveaxis(A, 0, -1), w0), Jet(np.moveaxis(b, 0, -1), w0)


def solve_from_jets(A: np.ndarray, b: np.ndarray, check: bool = True):
    """Sequential solve of ``A_0 u_i = b_i - sum_j A_j u_{i-j}``."""
    no, N = b.shape
    if N == 0:
        return np.zeros((0, no), dtype=complex), np.zeros(no)
    lu, piv = sla.lu_factor(A[0], check_finite=True)
    d = np.abs(np.diag(lu))
    if d.min() <= 1e-13 * d.max():
        raise SingularSystemError("value-part matrix is numerically singular")
    U = np.zeros((no, N), dtype=complex)
    res = np.zeros(no)
    for i in range(no):
        r = b[i].copy()
        for j in range(1, i + 1):
            r -= A[j] @ U[i - j]
        U[i] = sla.lu_solve((lu, piv), r)
        if check:
            res[i] = np.linalg.norm(A[0] @ U[i] - r) / max(np.linalg.norm(r), 1e-300)
    return U.T.copy(), res


def solve_derivatives(mesh: BoundaryMesh, omega0: float, order: int, params: LatticeParams,
                      cfg: EwaldConfig = EwaldConfig(), assembler: Assembler | None = None) -> SolveResult:
    """Boundary traces and their frequency jets at ``omega0``."""
    if order > 40:
        raise ValueError("order exceeds the supported maximum")
    alpha = Jet.constant(-1j * params.c, order, omega0) / Jet.variable(omega0, order)
    if mesh.size == 0:
        return SolveResult(omega0, order, Jet(np.zeros((0, order + 1)), omega0), alpha)
    asm = assembler or Assembler(mesh, params, cfg)
    ctx = asm.context(omega0, order)
    A = asm.matrix_jets(omega0, order, ctx)
    b = asm.rhs_jets(omega0, order)
    U, res = solve_from_jets(A, b)
    return SolveResult(omega0, order, Jet(U, omega0), alpha, res, ctx.E)


def interior_field(x, result: SolveResult, mesh: BoundaryMesh, params: LatticeParams,
                   cfg: EwaldConfig = EwaldConfig(), points: int = 8) -> np.ndarray:
    """Field from the representation formula at points off the boundary (value part)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    u_in, _ = incident_jets(x, None, result.centre_omega, params)
    u_in = u_in.coeffs[..., 0]
    if mesh.size == 0:
        return u_in
    h = mesh.length.max()
    dist = np.min(np.linalg.norm(x[:, None, :] - mesh.mid[None], axis=2), axis=1)
    if np.any(dist < h):
        log.warning("interior_field: point within one element length of the boundary")
    ctx = EwaldContext(result.centre_omega, 0, params, cfg)
    gx, gw = np.polynomial.legendre.leggauss(points)
    D = np.zeros((x.shape[0], mesh.size), dtype=complex)
    st = _ewald.dlp_block(
        np.ascontiguousarray(x[:, 0]), np.ascontiguousarray(x[:, 1]),
        np.ascontiguousarray(mesh.a[:, 0]), np.ascontiguousarray(mesh.a[:, 1]),
        np.ascontiguousarray(mesh.b[:, 0]), np.ascontiguousarray(mesh.b[:, 1]),
        np.ascontiguousarray(mesh.normal[:, 0]), np.ascontiguousarray(mesh.normal[:, 1]),
        np.ascontiguousarray(mesh.length), gx, gw, points, *ctx.kernel_args(), D,
    )
    if st != _ewald.OK:
        raise ConvergenceError("Ewald series failed in the representation formula")
    return u_in - D @ result.traces.coeffs[:, 0]
