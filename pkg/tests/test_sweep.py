import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gratingsweep.greens import LatticeParams
from gratingsweep.jets import Jet, jet_exp
from gratingsweep.sweep import (
    BandPartition,
    RunawayPartitionError,
    SweepConfig,
    adaptive_partition,
    need_split,
    rayleigh_anomalies,
    subband_index,
    sweep_eval,
)
from synthetic import constant, synthetic_solver

P90 = LatticeParams(4.0, 1.0, math.pi / 2)
P60 = LatticeParams(2.2, 1.0, math.radians(60.0))


def resonant(pole=0.8 - 0.02j, strength=0.05):
    """Smooth phase times a resonance; not rational, so Padé fits are inexact."""

    def amp(W, m):
        if m != 0:
            return Jet.constant(0.1, W.order, W.centre)
        phase = jet_exp(W * 1.5j)
        return phase * 0.7 + (W - pole) ** -1 * strength

    return amp


def check_partition(part: BandPartition):
    b, c = part.borders, part.centres
    assert b[0] == part.band[0] and b[-1] == part.band[1]
    assert np.all(np.diff(b) > 0)
    assert c.size == b.size - 1 == len(part.families)
    assert np.all((b[:-1] < c) & (c < b[1:]))
    for w in part.anomaly_borders:
        assert np.any(b == w)
        assert np.all(np.abs(c - w) > 0)


# ---------------------------------------------------------------------------
# anomalies


def test_anomaly_normal_incidence():
    assert rayleigh_anomalies((0, 2), P90) == pytest.approx([math.pi / 2])


def test_anomaly_below_first():
    assert rayleigh_anomalies((0, 1.5), P90).size == 0


def test_anomaly_oblique():
    # first anomaly of each branch, plus the second one of the m < 0 branch
    first_neg, first_pos = 2 * math.pi / (2.2 * 1.5), 2 * math.pi / (2.2 * 0.5)
    an = rayleigh_anomalies((0, 6.0), P60)
    assert an == pytest.approx([first_neg, 2 * first_neg, first_pos])


def test_anomaly_band_error():
    with pytest.raises(ValueError):
        rayleigh_anomalies((2, 1), P90)


# ---------------------------------------------------------------------------
# configuration


def test_config_defaults():
    cfg = SweepConfig(3, 3)
    assert cfg.I_min == pytest.approx(0.036)
    assert cfg.I_max == pytest.approx(0.36)
    assert cfg.order == 6
    with pytest.raises(ValueError):
        SweepConfig(0, 3)
    with pytest.raises(ValueError):
        SweepConfig(3, 3, I_min=1.0, I_max=0.5)


# ---------------------------------------------------------------------------
# validity test


def test_constant_response_never_splits():
    fam_solver = synthetic_solver(constant(1.0), P90)
    from gratingsweep.pade import fit_family

    fam = fit_family(fam_solver(0.7, 6), 3, 3)
    assert not need_split(fam, None, 1.2, SweepConfig(3, 3), P90)


def test_infinite_tolerance_never_splits():
    from gratingsweep.pade import fit_family

    fam = fit_family(synthetic_solver(resonant(), P90)(0.5, 6), 3, 3)
    assert not need_split(fam, None, 1.1, SweepConfig(3, 3, eps_T=math.inf), P90)


def test_pole_between_centre_and_border_fires():
    from gratingsweep.pade import fit_family

    fam = fit_family(synthetic_solver(resonant(0.8 - 0.01j), P90)(0.6, 6), 3, 3)
    re = fam.all_poles().real
    assert np.any((re > 0.6) & (re < 1.0))
    assert need_split(fam, None, 1.0, SweepConfig(3, 3), P90)


# ---------------------------------------------------------------------------
# partition


def test_smooth_response_keeps_initial_partition():
    part = adaptive_partition((0.0, 2.0), P90, SweepConfig(3, 3, I_max=10.0),
                              synthetic_solver(constant(0.5), P90))
    assert part.borders == pytest.approx([0.0, math.pi / 2, 2.0])
    assert part.centres == pytest.approx([math.pi / 4, (math.pi / 2 + 2) / 2])
    assert part.solve_count == 2
    check_partition(part)


def test_trisection_geometry():
    # width 0.5 exceeds I_max on both sides, every later width is 1/6
    calls = []
    part = adaptive_partition((0.0, 1.0), P90, SweepConfig(3, 3, eps_T=math.inf, I_min=0.01, I_max=0.4),
                              synthetic_solver(constant(1.0), P90, calls=calls))
    assert part.borders == pytest.approx([0, 1 / 3, 2 / 3, 1])
    assert part.centres == pytest.approx([1 / 6, 1 / 2, 5 / 6])
    # queue order: the original centre first, then the right insertion, then the left one
    assert calls == pytest.approx([0.5, 5 / 6, 1 / 6])


def test_resonance_refines_near_pole():
    part = adaptive_partition((0.2, 1.5), P90, SweepConfig(3, 3), synthetic_solver(resonant(0.8 - 0.01j), P90))
    check_partition(part)
    near = np.abs(part.centres - 0.8) < 0.1
    assert part.n_subbands > 2
    assert near.sum() >= 1
    widths = np.diff(part.borders)
    k = subband_index(part, 0.8)
    assert widths[k] <= np.median(widths)


@settings(max_examples=15)
@given(st.floats(0.3, 3.0), st.floats(0.05, 1.0), st.floats(-0.9, 0.9), st.sampled_from([60.0, 75.0, 90.0]))
def test_partition_properties(pole_re, pole_im, strength, theta):
    params = LatticeParams(4.0, 1.0, math.radians(theta))
    band = (0.1, 3.0)
    part = adaptive_partition(band, params, SweepConfig(2, 2),
                              synthetic_solver(resonant(pole_re - 1j * pole_im, strength), params))
    check_partition(part)
    assert set(rayleigh_anomalies(band, params)) <= set(part.borders.tolist())
    assert part.solve_count == part.n_subbands


def test_runaway_cap():
    with pytest.raises(RunawayPartitionError):
        adaptive_partition((0.0, 2.0), P90, SweepConfig(3, 3, eps_T=1e-14, I_min=1e-9, I_max=1e-3),
                           synthetic_solver(resonant(), P90), max_subbands=50)


def test_no_solve_on_anomaly():
    an = math.pi / 2
    calls = []
    part = adaptive_partition((an - 0.5, an + 0.5), P90, SweepConfig(3, 3),
                              synthetic_solver(resonant(an + 0.05 - 0.01j), P90, calls=calls))
    assert an in part.borders
    assert min(abs(np.array(calls) - an)) > 1e-3


def test_low_band_end_is_clamped():
    calls = []
    adaptive_partition((0.0, 2.0), P90, SweepConfig(3, 3, eps_T=math.inf, I_min=1e-4, I_max=1e-3 * 2.5),
                       synthetic_solver(constant(), P90, calls=calls), max_subbands=5000)
    assert min(calls) >= 2e-3


# ---------------------------------------------------------------------------
# evaluation


@pytest.fixture(scope="module")
def resonant_partition():
    return adaptive_partition((0.2, 2.0), P90, SweepConfig(3, 3), synthetic_solver(resonant(), P90))


def test_sweep_eval_at_centres(resonant_partition):
    part = resonant_partition
    sv = sweep_eval(part, part.centres)
    direct = np.array([f.values[0] for f in part.families])
    assert np.allclose(sv.T, direct, atol=1e-12)
    assert np.array_equal(sv.index, np.arange(part.n_subbands))


def test_sweep_eval_monotone_indices(resonant_partition):
    grid = np.linspace(0.2, 2.0, 301)
    sv = sweep_eval(resonant_partition, grid)
    assert np.all(np.diff(sv.index) >= 0)
    assert np.all(np.isfinite(sv.T))


def test_border_belongs_to_left(resonant_partition):
    b = resonant_partition.borders
    assert subband_index(resonant_partition, b[1]) == 0
    assert subband_index(resonant_partition, b[0]) == 0
    assert subband_index(resonant_partition, b[-1]) == resonant_partition.n_subbands - 1


def test_pole_hit_becomes_nan():
    part = adaptive_partition((0.2, 1.0), P90, SweepConfig(1, 1, I_max=10.0, eps_T=math.inf),
                              synthetic_solver(lambda W, m: 1.0 / (W - 0.9) if m == 0 else W * 0, P90))
    md = part.families[0].models[0]
    assert md.poles.real == pytest.approx([0.9])
    sv = sweep_eval(part, np.array([0.5, 0.9]))
    assert np.isfinite(sv.T[0]) and np.isnan(sv.T[1])
