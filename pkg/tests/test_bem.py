import logging
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gratingsweep.bem import (
    Assembler,
    GeometryError,
    ScattererSpec,
    assemble,
    build_mesh,
    finite_part_moments,
    incident_jets,
    interior_field,
    solve_derivatives,
)
from gratingsweep.farfield import far_coeffs, transmittance
from gratingsweep.greens import EwaldConfig, LatticeParams, greens_kernel_derivs
from gratingsweep.jets import Jet

P85 = LatticeParams(4.0, 1.0, math.radians(85.0))


def stack(ne, n=5, spacing=4.0):
    return build_mesh([ScattererSpec((2.0, spacing * i), 0.75, ne) for i in range(n)], 4.0)


@pytest.fixture(scope="module")
def single():
    mesh = build_mesh([ScattererSpec((2.0, 0.0), 0.75, 48)], 4.0)
    return mesh, solve_derivatives(mesh, 0.95, 3, P85)


# ---------------------------------------------------------------------------
# mesh


def test_perimeter_converges():
    mesh = build_mesh([ScattererSpec((2.0, 0.0), 0.75, 100)], 4.0)
    assert mesh.length.sum() == pytest.approx(2 * math.pi * 0.75, rel=1e-3)


def test_normals_point_into_scatterer():
    mesh = stack(24)
    assert np.allclose(np.linalg.norm(mesh.normal, axis=1), 1.0)
    for i, sp in enumerate(mesh.specs):
        sel = mesh.owner == i
        rel = mesh.mid[sel] - np.asarray(sp.centre)
        assert np.all(np.sum(mesh.normal[sel] * rel, axis=1) < 0)


def test_closed_polygons_and_unique_midpoints():
    mesh = stack(30, n=2)
    assert mesh.size == 60
    for sl in mesh.element_slices():
        assert np.allclose(mesh.b[sl][-1], mesh.a[sl][0])
        assert np.allclose(mesh.b[sl][:-1], mesh.a[sl][1:])
    assert np.unique(np.round(mesh.mid, 12), axis=0).shape[0] == 60


@pytest.mark.parametrize("specs", [
    [ScattererSpec((2.0, 0.0), 0.75, 16), ScattererSpec((2.5, 1.0), 0.75, 16)],
    [ScattererSpec((0.5, 0.0), 0.75, 16)],
    [ScattererSpec((3.5, 0.0), 0.75, 16)],
])
def test_geometry_errors(specs):
    with pytest.raises(GeometryError):
        build_mesh(specs, 4.0)


def test_spec_validation():
    with pytest.raises(GeometryError):
        ScattererSpec((2.0, 0.0), 0.75, 4)
    with pytest.raises(GeometryError):
        ScattererSpec((2.0, 0.0), -1.0, 16)


# ---------------------------------------------------------------------------
# incident wave


def test_incident_at_origin():
    u, q = incident_jets(np.zeros(2), np.array([0.0, 1.0]), Jet.variable(1.3, 4), P85)
    assert np.allclose(u.coeffs, [1, 0, 0, 0, 0])
    # q = i k (d.n) u
    assert q.coeffs[0] == pytest.approx(1j * 1.3 * P85.sin_theta)
    assert q.coeffs[1] == pytest.approx(1j * P85.sin_theta)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 3.0))
def test_incident_unit_modulus_and_first_derivative(x, y, w):
    u, _ = incident_jets(np.array([x, y]), None, Jet.variable(w, 2), P85)
    assert abs(u.coeffs[0]) == pytest.approx(1.0, abs=1e-14)
    dx = x * P85.cos_theta + y * P85.sin_theta
    assert u.coeffs[1] == pytest.approx(1j * dx / P85.c * u.coeffs[0], abs=1e-12)


def test_incident_derivative_finite_difference():
    x = np.array([0.7, -1.3])
    h = 1e-5
    f = lambda w: incident_jets(x, None, w, P85)[0].coeffs[0]
    u, _ = incident_jets(x, None, Jet.variable(1.1, 1), P85)
    assert u.coeffs[1] == pytest.approx((f(1.1 + h) - f(1.1 - h)) / (2 * h), rel=1e-8)


# ---------------------------------------------------------------------------
# singular integrals


@pytest.mark.parametrize("c,a", [(0.5, 0.01), (12.0, 0.05), (51.7, 0.003)])
def test_finite_part_moments(c, a):
    mpmath.mp.dps = 30
    J = finite_part_moments(c, a, 5)
    # regular moments: direct quadrature
    for j in range(2, 6):
        ref = mpmath.quad(lambda s: mpmath.expint(j, c * s * s), [0, a])
        assert J[j] == pytest.approx(float(ref), rel=1e-11)
    # log-singular moment
    ref1 = mpmath.quad(lambda s: mpmath.expint(1, c * s * s), [0, a])
    assert J[1] == pytest.approx(float(ref1), rel=1e-11)
    # finite part: subtract the 1/(c s^2) singularity and add its finite part -1/(c a)
    reg = mpmath.quad(lambda s: mpmath.expint(0, c * s * s) - 1 / (c * s * s), [0, a])
    assert J[0] == pytest.approx(float(reg - 1 / (c * a)), rel=1e-11)


# ---------------------------------------------------------------------------
# assembly and solve


def test_order0_rhs_is_burton_miller_data():
    mesh = build_mesh([ScattererSpec((2.0, 0.0), 0.75, 16)], 4.0)
    _, _, rhs = assemble(mesh, 0.9, P85)
    u, q = incident_jets(mesh.mid, mesh.normal, 0.9, P85)
    alpha = -1j * P85.c / 0.9
    assert np.allclose(rhs.coeffs[:, 0], u.coeffs[:, 0] + alpha * q.coeffs[:, 0], atol=1e-14)


def test_separated_entry_matches_midpoint_rule():
    mesh = build_mesh([ScattererSpec((1.0, 0.0), 0.75, 200), ScattererSpec((3.0, 0.2), 0.2, 200)], 4.0)
    A, _, _ = assemble(mesh, 0.9, P85)
    a, b = 10, 300
    alpha = -1j / 0.9
    W = greens_kernel_derivs(mesh.mid[a], mesh.mid[b], mesh.normal[a], mesh.normal[b], 0.9, alpha, P85)
    assert A[a, b] == pytest.approx(W.coeffs[0] * mesh.length[b], rel=1e-4)


def test_coupling_independence():
    # the exact trace does not depend on alpha; the discrete ones differ by O(h^2)
    mesh = stack(160, n=2)
    ref = solve_derivatives(mesh, 0.95, 0, P85).traces.coeffs[:, 0]
    for alpha in (0.0, -0.5j / 0.95):
        asm = Assembler(mesh, P85, EwaldConfig(), coupling=alpha)
        u = solve_derivatives(mesh, 0.95, 0, P85, assembler=asm).traces.coeffs[:, 0]
        assert np.linalg.norm(u - ref) / np.linalg.norm(ref) < 1e-4


def test_residuals_small(single):
    _, res = single
    assert res.residuals.max() < 1e-10


def test_empty_mesh():
    mesh = build_mesh([], 4.0)
    res = solve_derivatives(mesh, 0.95, 2, P85)
    assert res.traces.coeffs.shape == (0, 3)
    T, R = transmittance(far_coeffs(res, mesh, P85), P85.theta)
    assert T.coeffs[0] == pytest.approx(1.0)
    assert R.coeffs[0] == 0
    assert np.allclose(T.coeffs[1:], 0)
    x = np.array([[0.3, 0.4]])
    u_in, _ = incident_jets(x, None, 0.95, P85)
    assert interior_field(x, res, mesh, P85) == pytest.approx(u_in.coeffs[:, 0])


def test_energy_conservation_improves():
    e = []
    for ne in (20, 40, 80):
        mesh = stack(ne, n=2)
        res = solve_derivatives(mesh, 0.95, 0, P85)
        T, R = transmittance(far_coeffs(res, mesh, P85), P85.theta)
        e.append(abs(T.coeffs[0] + R.coeffs[0] - 1))
    assert e[0] > e[1] > e[2]
    assert e[2] < 1e-3


def test_translation_by_period_is_bloch_phase():
    mesh = stack(32, n=2)
    w = 0.95
    u = solve_derivatives(mesh, w, 1, P85).traces.coeffs
    shifted = mesh.translated((P85.L, 0.0))
    v = solve_derivatives(shifted, w, 1, P85).traces.coeffs
    beta = w / P85.c * P85.L * P85.cos_theta
    assert np.allclose(v[:, 0], np.exp(1j * beta) * u[:, 0], rtol=1e-10, atol=1e-10)


def test_vertical_gauge_invariance():
    mesh = stack(32, n=2)
    out = []
    for t in (0.0, 1.37):
        m = mesh.translated((0.0, t))
        res = solve_derivatives(m, 0.95, 2, P85)
        T, R = transmittance(far_coeffs(res, m, P85), P85.theta)
        out.append(np.concatenate([T.coeffs, R.coeffs]))
    assert np.allclose(out[0], out[1], rtol=1e-8, atol=1e-10)


def test_deterministic():
    mesh = stack(16, n=2)
    a = solve_derivatives(mesh, 0.8, 2, P85).traces.coeffs
    b = solve_derivatives(mesh, 0.8, 2, P85).traces.coeffs
    assert np.array_equal(a, b)


def test_order_cap():
    with pytest.raises(ValueError):
        solve_derivatives(stack(8, n=1), 0.8, 41, P85)


# ---------------------------------------------------------------------------
# representation formula


def test_interior_field_helmholtz_residual(single):
    mesh, res = single
    x0, h = np.array([1.0, 1.6]), 0.02
    pts = np.array([x0, x0 + [h, 0], x0 - [h, 0], x0 + [0, h], x0 - [0, h]])
    u = interior_field(pts, res, mesh, P85)
    lap = (u[1:].sum() - 4 * u[0]) / h**2
    k = 0.95
    assert abs(lap + k * k * u[0]) < 1e-3 * abs(k * k * u[0])


def test_null_field_decreases():
    vals = []
    for ne in (24, 48, 96):
        mesh = build_mesh([ScattererSpec((2.0, 0.0), 0.75, ne)], 4.0)
        res = solve_derivatives(mesh, 0.95, 0, P85)
        vals.append(abs(interior_field(np.array([[2.0, 0.0]]), res, mesh, P85)[0]))
    assert vals[0] > vals[1] > vals[2]


def test_interior_field_warns_near_boundary(caplog):
    mesh = build_mesh([ScattererSpec((2.0, 0.0), 0.75, 16)], 4.0)
    res = solve_derivatives(mesh, 0.9, 0, P85)
    with caplog.at_level(logging.WARNING, logger="gratingsweep.bem"):
        interior_field(np.array([[2.75, 0.0]]), res, mesh, P85)
    assert "near" in caplog.text or "boundary" in caplog.text
