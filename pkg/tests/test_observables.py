import math

import numpy as np
import pytest

from cqnls import model, observables, spectral
from cqnls.errors import BadWindow, InsufficientHorizon

from helpers import smooth_field


@pytest.fixture(scope="module")
def grid():
    return spectral.make_grid(3, 32, 24.0)


def mean_free(grid, rng, order=2):
    """Iterated Laplacian of a smooth field, so its spectrum vanishes to order 2*order at 0."""
    v = smooth_field(grid, rng, width=2.0)
    for _ in range(order):
        v = spectral.laplacian(grid, v)
    return v


def j_form_gap(grid, v, t):
    a = observables.j_apply(grid, v, t, "expanded")
    b = observables.j_apply(grid, v, t, "conjugation")
    return observables.vector_l2(grid, [x - y for x, y in zip(a, b)]) / observables.vector_l2(grid, a)


def test_weighted_field_two_forms_agree_at_time_zero(grid, rng):
    assert j_form_gap(grid, mean_free(grid, rng), 0.0) < 1e-13


def test_weighted_field_two_forms_converge_with_the_box():
    # grad H has a cone point at xi = 0, so exp(-itH) has algebraic spatial tails and the
    # two forms differ on the torus by the periodized tails; the gap shrinks as L grows
    gaps = []
    for L in (24.0, 32.0):
        g = spectral.make_grid(3, 64, L)
        gaps.append(j_form_gap(g, mean_free(g, np.random.default_rng(0)), 1.0))
    assert gaps[1] < gaps[0] / 5
    assert gaps[1] < 1e-4


def test_weighted_field_commutes_with_the_flow():
    # J(t) exp(-itH) f = exp(-itH) x f, up to the same periodized tails
    g = spectral.make_grid(3, 64, 32.0)
    f = mean_free(g, np.random.default_rng(1), order=3)
    t = 0.6
    lhs = observables.j_apply(g, spectral.propagate(g, f, t), t)
    rhs = [spectral.propagate(g, spectral.multiply_by_x(g, f, a), t) for a in range(3)]
    assert observables.vector_l2(g, [x - y for x, y in zip(lhs, rhs)]) < 1e-5 * observables.vector_l2(g, rhs)


def test_unknown_weighted_form(grid):
    with pytest.raises(ValueError):
        observables.j_apply(grid, np.zeros(grid.shape), 0.0, "other")


def test_x_norm_of_radial_state(grid):
    v = 0.01 * np.exp(-grid.r2 / 4.0) + 0j
    rep = observables.x_norm(grid, model.VState(v, 0.0, 0.0))
    assert rep.angular < 1e-6 * rep.sobolev
    assert rep.total == pytest.approx(rep.sobolev + rep.weighted + rep.angular)
    assert rep.trusted
    # ||x v||_2 for a Gaussian, closed form: int r^2 e^{-r^2/2} d^3x = 3 (2 pi)^{3/2}
    assert rep.weighted == pytest.approx(0.01 * math.sqrt(3 * (2 * math.pi) ** 1.5), rel=1e-8)


def test_fit_power_law_recovers_exponent():
    t = np.geomspace(1, 100, 30)
    fit = observables.fit_power_law(t, 3.0 * t**-1.25, (2.0, 50.0))
    assert fit.exponent == pytest.approx(-1.25, abs=1e-12)
    assert fit.residual < 1e-12


@pytest.mark.parametrize("window", [(0.5, 2.0), (3.0, 2.0), (2.0, 500.0), (1.5, 1.6)])
def test_fit_power_law_bad_windows(window):
    t = np.array([1.0, 2.0, 4.0, 8.0])
    with pytest.raises(BadWindow):
        observables.fit_power_law(t, t**-1.0, window)


def test_strichartz_accumulator_constant_records():
    rec = {"sob_L2": 2.0, "sob_L6": 3.0, "ang_L2": 0.5, "ang_L6": 1.0}
    rows = observables.strichartz_accumulate([0.0, 1.0, 2.0, 4.0], [rec] * 4)
    last = rows[-1]
    assert last["S_sob_sup_L2"] == 2.0
    assert last["S_sob_L2t_L6"] == pytest.approx(3.0 * 2.0)  # sqrt(9 * 4)
    assert last["S_ang"] == pytest.approx(0.5 + 2.0)


def test_scattering_monitor_on_linear_flow(grid, rng):
    v0 = smooth_field(grid, rng, width=2.0)
    snaps = {t: model.VState(spectral.propagate(grid, v0, t), 0.0, t) for t in (1.0, 2.0, 4.0, 8.0)}
    rep = observables.scattering_monitor(grid, snaps)
    assert rep.pairs == [(1.0, 2.0), (2.0, 4.0), (4.0, 8.0)]
    assert max(rep.h1) < 1e-12


def test_scattering_monitor_needs_pairs(grid):
    snaps = {t: model.VState(np.zeros(grid.shape, complex), 0.0, t) for t in (1.0, 2.0)}
    with pytest.raises(InsufficientHorizon):
        observables.scattering_monitor(grid, snaps)


def test_wraparound_horizon(grid):
    assert observables.wraparound_horizon(grid, np.zeros(grid.shape)) == math.inf
    v = np.exp(-grid.r2) + 0j
    hor = observables.wraparound_horizon(grid, v)
    assert 0 < hor < grid.L / 2.0


def test_diagnostics_record_columns(grid, rng):
    from cqnls import report

    st = model.v_from_u(grid, smooth_field(grid, rng, width=2.0))
    rec = observables.diagnostics_record(grid, st, 2.0)
    assert set(report.DIAGNOSTIC_COLUMNS) <= set(rec)
    assert rec["v_Linf"] >= rec["v_L6"] / grid.volume ** (1 / 6)


def test_low_frequency_and_weighted_ratios_are_finite(grid, rng):
    st = model.v_from_u(grid, smooth_field(grid, rng, width=2.0))
    assert math.isfinite(observables.low_frequency_ratio(grid, st.v))
    hi, lo = observables.weighted_bound_ratios(grid, st, 0.5)
    assert hi >= 0 and lo >= 0
