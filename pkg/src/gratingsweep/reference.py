"""Naive frequency sweep: one plain solve per Gauss–Legendre node.

This is the baseline the Padé sweep is measured against.  The band is split
into equal panels (with the panel border nearest each Rayleigh anomaly moved
onto the anomaly) and every panel carries a Gauss–Legendre rule.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .bem import Assembler, solve_derivatives
from .farfield import far_coeffs, transmittance
from .greens import EwaldConfig
from .sweep import rayleigh_anomalies


class ReferenceSolveError(RuntimeError):
    """A solve failed at a quadrature node; the node is named in the message."""


@dataclass
class ReferenceConfig:
    panels: int = 200
    points_per_panel: int = 10

    def __post_init__(self):
        if self.panels < 1 or self.points_per_panel < 2:
            raise ValueError("need panels >= 1 and points_per_panel >= 2")


@dataclass
class ReferenceResult:
    J: float
    nodes: np.ndarray
    weights: np.ndarray
    T: np.ndarray
    R: np.ndarray
    panel_borders: np.ndarray
    panel_index: np.ndarray
    wall_time: float = 0.0

    @property
    def solve_count(self) -> int:
        return int(self.nodes.size)


def panel_borders(band, panels: int, anomalies=()) -> np.ndarray:
    """Equal panels with the nearest border snapped onto each anomaly.

    When an anomaly is closest to a band end (or there are no interior
    borders) it is inserted as an extra border instead.
    """
    w1, w2 = float(band[0]), float(band[1])
    b = list(np.linspace(w1, w2, panels + 1))
    for w in anomalies:
        if not (w1 < w < w2):
            continue
        k = int(np.argmin([abs(x - w) for x in b]))
        if b[k] == w:
            continue
        if k in (0, len(b) - 1) or b[k] in anomalies:
            b.append(w)
        else:
            b[k] = w
        b.sort()
    return np.array(b)


def gauss_nodes(borders, points: int):
    """Gauss–Legendre nodes, weights and panel indices over consecutive panels."""
    x, w = np.polynomial.legendre.leggauss(points)
    lo, hi = borders[:-1], borders[1:]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (lo + hi))[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * w[None, :]
    idx = np.repeat(np.arange(lo.size), points)
    return nodes.ravel(), weights.ravel(), idx


def reference_curve(grid, solver) -> tuple[np.ndarray, np.ndarray]:
    """Plain ``(T, R)`` solves on a user grid.

    ``solver(omega)`` returns ``(T, R)`` at one frequency.
    """
    grid = np.asarray(grid, dtype=float)
    T = np.empty_like(grid)
    R = np.empty_like(grid)
    for i, w in enumerate(grid):
        try:
            T[i], R[i] = solver(float(w))
        except Exception as exc:  # identify the node and re-raise
            raise ReferenceSolveError(f"solve failed at omega={w!r} (node {i}): {exc}") from exc
    return T, R


def reference_J(band, params, solver, cfg: ReferenceConfig | None = None) -> ReferenceResult:
    """``J = sum w_i T(omega_i) / (w2 - w1)`` with panelled Gauss–Legendre."""
    cfg = cfg or ReferenceConfig()
    t0 = time.perf_counter()
    an = rayleigh_anomalies(band, params)
    borders = panel_borders(band, cfg.panels, tuple(an))
    nodes, weights, idx = gauss_nodes(borders, cfg.points_per_panel)
    T, R = reference_curve(nodes, solver)
    J = float(np.dot(weights, T) / (borders[-1] - borders[0]))
    return ReferenceResult(J, nodes, weights, T, R, borders, idx, time.perf_counter() - t0)


def bem_point_solver(mesh, params, ewald=None, options=None):
    """``solver(omega) -> (T, R)`` from order-0 boundary element solves."""
    ewald = ewald or EwaldConfig()
    asm = Assembler(mesh, params, ewald, options) if mesh.size else None

    def solve(omega):
        res = solve_derivatives(mesh, omega, 0, params, ewald, assembler=asm)
        ff = far_coeffs(res, mesh, params)
        T, R = transmittance(ff, params.theta)
        return float(T.coeffs[0].real), float(R.coeffs[0].real)

    return solve
