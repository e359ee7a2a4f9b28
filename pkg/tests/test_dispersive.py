import math

import numpy as np
import pytest
import sympy as sp

from cqnls import dispersive, spectral
from cqnls.errors import DyadicOutOfRange, UnresolvedOscillation, ZeroFrequency


def test_gaussian_profile_at_time_zero_is_the_closed_form():
    a = 0.7
    p = dispersive.gaussian_profile(a)
    r = np.linspace(0.01, 8.0, 40)
    exact = (2 * math.pi) ** -1.5 * (math.pi / a) ** 1.5 * np.exp(-r * r / (4 * a))
    assert np.max(np.abs(dispersive.radial_propagate(p, 0.0, r) - exact)) < 1e-10


def grid_gap(L, m, t, p):
    g = spectral.make_grid(3, m, L)
    i0 = g.m // 2
    r = g.x1d[i0:]
    line = dispersive.grid_propagate(g, p, t)[i0:, i0, i0]
    sel = r <= L / 4
    return float(np.max(np.abs(line - dispersive.radial_propagate(p, t, r))[sel]))


def test_radial_evaluator_matches_the_periodic_grid_at_time_zero():
    p = dispersive.gaussian_profile(1.0)  # below 1e-10 at the grid's Nyquist frequency
    assert grid_gap(40.0, 64, 0.0, p) < 1e-10


def test_radial_evaluator_and_periodic_grid_converge_with_the_box():
    # the cone point of H at 0 gives exp(-itH) algebraic tails, which the torus wraps around
    p = dispersive.gaussian_profile(1.0)
    small, large = grid_gap(40.0, 64, 0.5, p), grid_gap(80.0, 128, 0.5, p)
    assert large < small / 10
    assert large < 1e-6


@pytest.mark.parametrize("t", [0.0, 3.0])
def test_radial_evolution_is_unitary(t):
    p = dispersive.gaussian_profile(1.0)
    assert dispersive.radial_l2(p, t, r_max=40.0 + 10 * t) == pytest.approx(dispersive.profile_l2(p), rel=1e-6)


def test_sup_norm_at_time_zero_sits_at_the_origin():
    p = dispersive.lp_profile(1.0)
    val, where = dispersive.sup_norm(p, 0.0)
    rho = np.linspace(p.rho_min, p.rho_max, 20001)
    ref = dispersive.RADIAL_CONST * np.trapezoid(p(rho) * rho**2, rho)
    assert where == 0.0
    assert val == pytest.approx(ref, rel=1e-6)


def test_envelope_regimes():
    N = 0.125
    w = dispersive.regime_windows(N)
    assert w["flat"][1] < w["t^-1"][0] < w["t^-1"][1] < w["t^-3/2"][0]
    assert dispersive.envelope(N, 0.1) == pytest.approx(N**3)
    assert dispersive.envelope(N, 100.0) == pytest.approx(N**2 / 100.0)
    assert dispersive.envelope(N, 1e5) == pytest.approx(N**0.5 * 1e5**-1.5)


def test_fit_slope_recovers_power_and_needs_three_points():
    t = np.geomspace(1, 100, 12)
    assert dispersive.fit_slope(t, 2 * t**-1.5, (1, 100)) == pytest.approx(-1.5)
    assert dispersive.fit_slope(t, t, (1.0, 1.2)) is None


def test_hessian_eigenvalues_symbolically():
    r = sp.symbols("r", positive=True)
    h = r * sp.sqrt(2 + r**2)
    radial = sp.lambdify(r, sp.simplify(sp.diff(h, r, 2)))
    tangential = sp.lambdify(r, sp.simplify(sp.diff(h, r) / r))
    for x in (1e-3, 0.1, 1.0, 7.0, 300.0):
        lr, lt = dispersive.hessian_eigs(x)
        assert lr == pytest.approx(radial(x), rel=1e-13)
        assert lt == pytest.approx(tangential(x), rel=1e-13)


def test_hessian_formula_against_finite_differences():
    assert dispersive.hessian_audit(np.logspace(-3, 3, 20)) <= 1e-6


def test_errors():
    with pytest.raises(DyadicOutOfRange):
        dispersive.dispersive_audit(2.0, [1.0])
    with pytest.raises(DyadicOutOfRange):
        dispersive.dispersive_audit(0.3, [1.0])
    with pytest.raises(ZeroFrequency):
        dispersive.hessian_eigs(0.0)
    with pytest.raises(ValueError):
        dispersive.radial_propagate(dispersive.lp_profile(1.0), -1.0, [1.0])
    with pytest.raises(UnresolvedOscillation):
        dispersive.radial_propagate(dispersive.lp_profile(1.0), 1e4, [1.0], max_nodes=10_000)


def test_small_audit_report_rows():
    rep = dispersive.dispersive_audit(1.0, [1.0, 2.0, 4.0])
    rows = list(rep.rows())
    assert len(rows) == 3
    assert all(r["sup"] > 0 and r["ratio"] > 0 for r in rows)
    assert rep.ratio_spread() >= 1.0
