"""Adaptive band subdivision with one Padé family per subband.

The band is first cut at its Rayleigh anomalies.  Every subband gets a Padé
centre at its midpoint, and the centres are processed from a FIFO queue: the
right border of a centre is checked first, then the left border.  A side that
fails the validity test (or is wider than ``I_max``) receives a new centre one
third of the way in from the border, with a new border halfway between the two
centres.
"""

from __future__ import annotations

import logging
import math
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .bem import Assembler, AssemblyOptions, BoundaryMesh, solve_derivatives
from .farfield import far_coeffs, transmittance
from .greens import EwaldConfig, LatticeParams
from .pade import ModeFamily, PoleHitError, fit_family, transmittance_estimate

log = logging.getLogger(__name__)

MAX_SUBBANDS = 10_000
ANOMALY_GUARD = 1e-8


class RunawayPartitionError(RuntimeError):
    pass


class AnomalySolveError(ValueError):
    """A solve was requested too close to a Rayleigh anomaly."""


@dataclass
class SweepConfig:
    """Padé degrees and subdivision tolerances.

    ``I_min`` and ``I_max`` default to ``1e-3 (M+N)^2`` and ``1e-2 (M+N)^2``.
    """

    M: int = 3
    N: int = 3
    eps_T: float = 1e-3
    I_min: float | None = None
    I_max: float | None = None
    clamp_fraction: float = 1e-3

    def __post_init__(self):
        if self.M < 1 or self.N < 0:
            raise ValueError("need M >= 1 for the [M-1, N] companion and N >= 0")
        K2 = (self.M + self.N) ** 2
        if self.I_min is None:
            self.I_min = 1e-3 * K2
        if self.I_max is None:
            self.I_max = 1e-2 * K2
        if not (0 < self.I_min < self.I_max):
            raise ValueError("need 0 < I_min < I_max")
        if not self.eps_T > 0:
            raise ValueError("eps_T must be positive")

    @property
    def order(self) -> int:
        return self.M + self.N


def rayleigh_anomalies(band, params: LatticeParams) -> np.ndarray:
    """Rayleigh anomalies strictly inside ``band``, sorted and deduplicated.

    ``2 m pi c / (L (1 - cos theta))`` for ``m > 0`` and
    ``-2 m pi c / (L (1 + cos theta))`` for ``m < 0``.
    """
    w1, w2 = float(band[0]), float(band[1])
    if not (w2 > w1 >= 0):
        raise ValueError("band must satisfy w2 > w1 >= 0")
    ct = params.cos_theta
    base = 2 * math.pi * params.c / params.L
    out = []
    for denom in (1.0 - ct, 1.0 + ct):
        if denom <= 0:
            continue
        step = base / denom
        m = 1
        while m * step < w2:
            if m * step > w1:
                out.append(m * step)
            m += 1
    out.sort()
    merged = []
    for w in out:
        if merged and abs(w - merged[-1]) <= 1e-12 * max(1.0, w):
            continue
        merged.append(w)
    return np.array(merged)


def need_split(family: ModeFamily, neighbour: ModeFamily | None, border: float,
               cfg: SweepConfig, params: LatticeParams) -> bool:
    """True unless every applicable validity check passes at ``border``.

    With a fitted neighbour the two neighbouring ``[M, N]`` estimates are
    compared at the border; otherwise ``[M, N]`` is compared with ``[M-1, N]``.
    In addition every pole whose real part lies between the centre and the
    border is used as a checkpoint for the ``[M, N]`` versus ``[M-1, N]`` test.
    """
    eps = cfg.eps_T
    if math.isinf(eps):
        return False
    try:
        t_here = transmittance_estimate(family, border, params)
        if neighbour is not None:
            other = transmittance_estimate(neighbour, border, params)
        else:
            other = transmittance_estimate(family, border, params, which="T_lower")
        if not abs(t_here - other) < eps:
            return True
        lo, hi = sorted((family.centre, border))
        for z in family.all_poles():
            x = z.real
            if lo <= x <= hi:
                d = transmittance_estimate(family, x, params) - \
                    transmittance_estimate(family, x, params, which="T_lower")
                if not abs(d) < eps:
                    return True
    except PoleHitError:
        return True
    return False


@dataclass
class BandPartition:
    band: tuple
    borders: np.ndarray
    centres: np.ndarray
    families: list
    anomaly_borders: np.ndarray
    warnings: list = field(default_factory=list)
    solve_count: int = 0
    order: int = 0
    wall_time: float = 0.0
    params: LatticeParams | None = None

    @property
    def n_subbands(self) -> int:
        return len(self.centres)

    def to_dict(self) -> dict:
        return {
            "band": [float(v) for v in self.band],
            "borders": [float(v) for v in self.borders],
            "centres": [float(v) for v in self.centres],
            "anomaly_borders": [float(v) for v in self.anomaly_borders],
            "solve_order": self.order,
            "solve_count": self.solve_count,
            "warnings": list(self.warnings),
        }


def _initial_borders(band, params):
    w1, w2 = float(band[0]), float(band[1])
    an = rayleigh_anomalies(band, params)
    return [w1, *an.tolist(), w2], an


def adaptive_partition(band, params: LatticeParams, cfg: SweepConfig, solver,
                       max_subbands: int = MAX_SUBBANDS) -> BandPartition:
    """Adaptive subdivision of ``band``.

    Parameters
    ----------
    band : (float, float)
    params : LatticeParams
    cfg : SweepConfig
    solver : callable
        ``solver(omega, order)`` returning a :class:`~gratingsweep.farfield.FarField`
        whose jets have at least ``order`` derivatives and whose ``T``/``R``
        have been filled in.  It is called once per Padé centre.

    Returns
    -------
    BandPartition
    """
    t0 = time.perf_counter()
    borders, anomalies = _initial_borders(band, params)
    centres = [0.5 * (borders[i] + borders[i + 1]) for i in range(len(borders) - 1)]
    families: dict[float, ModeFamily] = {}
    warns: list[str] = []
    solves = 0
    clamp = max(float(band[0]), cfg.clamp_fraction * float(band[1]))

    def family_of(c):
        nonlocal solves
        if c not in families:
            for w in anomalies:
                if abs(c - w) <= ANOMALY_GUARD * w:
                    raise AnomalySolveError(f"centre {c} sits on the anomaly {w}")
            ff = solver(max(c, clamp), cfg.order)
            solves += 1
            families[c] = fit_family(ff, cfg.M, cfg.N)
        return families[c]

    queue = deque(centres)
    iflag = 1
    while queue:
        c = queue[0]
        i = centres.index(c)
        fam = family_of(c)
        bidx = i + iflag
        border = borders[bidx]
        at_end = bidx == 0 or bidx == len(borders) - 1
        neighbour = None
        if not at_end:
            nc = centres[i + 2 * iflag - 1]
            neighbour = families.get(nc)
        width = abs(c - border)
        split = need_split(fam, neighbour, border, cfg, params)
        if (split and width > cfg.I_min) or width > cfg.I_max:
            new_c = border + (c - border) / 3.0
            new_b = 0.5 * (c + new_c)
            if iflag == 1:
                borders.insert(i + 1, new_b)
                centres.insert(i + 1, new_c)
            else:
                borders.insert(i + 1, new_b)
                centres.insert(i, new_c)
            queue.append(new_c)
            if len(centres) > max_subbands:
                raise RunawayPartitionError(f"more than {max_subbands} subbands")
            continue
        if split:
            warns.append(f"accepted subband side at centre {c:.12g} (border {border:.12g}) "
                         f"narrower than I_min although the criteria failed")
        if iflag == 1:
            iflag = 0
        else:
            queue.popleft()
            iflag = 1
    fams = [families[c] for c in centres]
    return BandPartition((float(band[0]), float(band[1])), np.array(borders), np.array(centres),
                         fams, anomalies, warns, solves, cfg.order, time.perf_counter() - t0,
                         params)


@dataclass
class SweepValues:
    omega: np.ndarray
    T: np.ndarray
    R: np.ndarray
    index: np.ndarray


def subband_index(partition: BandPartition, omega) -> np.ndarray:
    """Subband of each frequency; a border belongs to the subband on its left."""
    b = partition.borders
    idx = np.searchsorted(b, np.asarray(omega, dtype=float), side="left") - 1
    return np.clip(idx, 0, partition.n_subbands - 1)


def sweep_eval(partition: BandPartition, grid) -> SweepValues:
    """Surrogate ``T`` and ``R`` on a grid; pole hits become NaN."""
    grid = np.asarray(grid, dtype=float)
    idx = subband_index(partition, grid)
    T = np.empty_like(grid)
    R = np.empty_like(grid)
    params = partition.params
    for k in np.unique(idx):
        sel = idx == k
        fam = partition.families[k]
        T[sel] = transmittance_estimate(fam, grid[sel], params, nan_on_pole=True)
        R[sel] = transmittance_estimate(fam, grid[sel], params, which="R", nan_on_pole=True)
    return SweepValues(grid, T, R, idx)


def bem_solver(mesh: BoundaryMesh, params: LatticeParams, ewald: EwaldConfig | None = None,
               options: AssemblyOptions | None = None):
    """A ``solver(omega, order)`` hook backed by the boundary element solver."""
    ewald = ewald or EwaldConfig()
    asm = Assembler(mesh, params, ewald, options) if mesh.size else None

    def solve(omega, order):
        res = solve_derivatives(mesh, float(omega), order, params, ewald, assembler=asm)
        ff = far_coeffs(res, mesh, params)
        transmittance(ff, params.theta)
        log.debug("solved at omega=%.10g (order %d)", omega, order)
        return ff

    return solve

