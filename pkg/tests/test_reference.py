import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gratingsweep.bem import ScattererSpec, build_mesh, solve_derivatives
from gratingsweep.farfield import far_coeffs, transmittance
from gratingsweep.greens import LatticeParams
from gratingsweep.reference import (
    ReferenceConfig,
    ReferenceSolveError,
    bem_point_solver,
    gauss_nodes,
    panel_borders,
    reference_J,
    reference_curve,
)

P90 = LatticeParams(4.0, 1.0, math.pi / 2)


def test_config_validation():
    with pytest.raises(ValueError):
        ReferenceConfig(panels=0)
    with pytest.raises(ValueError):
        ReferenceConfig(points_per_panel=1)


@pytest.mark.parametrize("points", [2, 5, 10])
def test_gauss_exactness(points):
    borders = np.linspace(0.0, 1.0, 4)
    x, w, idx = gauss_nodes(borders, points)
    for k in range(2 * points):
        assert np.dot(w, x**k) == pytest.approx(1.0 / (k + 1), abs=1e-14)
    assert np.array_equal(np.bincount(idx), [points] * 3)


def test_nodes_are_interior():
    borders = np.array([0.0, 0.3, 1.0])
    x, _, idx = gauss_nodes(borders, 10)
    assert np.all((borders[idx] < x) & (x < borders[idx + 1]))


def test_snapping_moves_nearest_border():
    b = panel_borders((0.0, 2.0), 4, (math.pi / 2,))
    assert b.tolist() == [0.0, 0.5, 1.0, math.pi / 2, 2.0]


def test_snapping_near_band_end_inserts():
    b = panel_borders((0.0, 2.0), 1, (1.9,))
    assert b.tolist() == [0.0, 1.9, 2.0]


@settings(max_examples=50)
@given(st.integers(1, 30), st.lists(st.floats(0.01, 1.99), max_size=3, unique=True))
def test_snapped_borders_cover_band(panels, anomalies):
    b = panel_borders((0.0, 2.0), panels, tuple(anomalies))
    assert b[0] == 0.0 and b[-1] == 2.0
    assert np.all(np.diff(b) > 0)
    assert set(anomalies) <= set(b.tolist())


@pytest.mark.parametrize("panels", [1, 3, 17])
def test_constant_transmittance_gives_one(panels):
    res = reference_J((0.0, 2.0), P90, lambda w: (1.0, 0.0), ReferenceConfig(panels, 10))
    assert res.J == pytest.approx(1.0, abs=1e-14)
    assert res.solve_count == res.panel_borders.size * 10 - 10


def test_polynomial_transmittance_exact():
    res = reference_J((0.0, 2.0), P90, lambda w: (w**5 / 32, 0.0), ReferenceConfig(7, 3))
    assert res.J == pytest.approx(1 / 6, rel=1e-14)


def test_no_node_at_anomaly():
    res = reference_J((0.0, 2.0), P90, lambda w: (1.0, 0.0), ReferenceConfig(5, 10))
    assert math.pi / 2 in res.panel_borders.tolist()
    assert np.min(np.abs(res.nodes - math.pi / 2)) > 0


def test_solver_error_names_the_node():
    def bad(w):
        if w > 1.0:
            raise ArithmeticError("singular")
        return 0.5, 0.5

    with pytest.raises(ReferenceSolveError, match="node 2"):
        reference_curve([0.2, 0.8, 1.2], bad)


def test_empty_mesh_is_transparent():
    solver = bem_point_solver(build_mesh([], 4.0), P90)
    T, R = reference_curve([0.3, 1.0, 1.9], solver)
    assert T == pytest.approx([1, 1, 1], abs=1e-14)
    assert R == pytest.approx([0, 0, 0], abs=1e-14)


def test_single_point_equals_solve():
    mesh = build_mesh([ScattererSpec((2.0, 0.0), 0.75, 40)], 4.0)
    T, R = reference_curve([0.95], bem_point_solver(mesh, P90))
    res = solve_derivatives(mesh, 0.95, 0, P90)
    Tj, Rj = transmittance(far_coeffs(res, mesh, P90), P90.theta)
    assert T[0] == pytest.approx(Tj.coeffs[0].real, abs=1e-13)
    assert R[0] == pytest.approx(Rj.coeffs[0].real, abs=1e-13)
    assert T[0] + R[0] == pytest.approx(1.0, abs=1e-3)


def test_refinement_is_cauchy():
    # smooth surrogate response with a sharp feature; panel doubling shrinks the change
    f = lambda w: (0.5 + 0.4 * math.cos(3 * w) + 0.05 / (1 + ((w - 1.2) / 0.02) ** 2), 0.0)
    J = [reference_J((0.0, 2.0), P90, f, ReferenceConfig(n, 2)).J for n in (4, 8, 16, 32)]
    d = np.abs(np.diff(J))
    assert np.all(d[1:] < d[:-1])
