import math

import numpy as np
import pytest
import sympy as sp

from cqnls import bilinear, resonance
from cqnls.errors import UnsupportedDyad, ZeroFrequency


def test_radial_derivatives_match_sympy():
    r = sp.symbols("r", positive=True)
    expr = r * sp.sqrt(2 + r**2)
    radii = np.logspace(-3, 3, 50)
    for k, fun in enumerate(resonance.H_DERIVATIVES):
        ref = sp.lambdify(r, sp.simplify(sp.diff(expr, r, k)), "numpy")(radii)
        assert np.allclose(fun(radii), ref, rtol=1e-12, atol=0)


def test_derivative_comparators_are_two_sided():
    out = resonance.h_derivative_audit()
    for k in (1, 2, 3, 4):
        lo, hi = out[k]
        assert lo > 0.5 and hi < 100.0
    assert out["fd_rel_err"] < 1e-6


def phase_in_output_variables(kind, xi, xi2):
    return resonance.phase(kind, xi - xi2, xi2)


@pytest.mark.parametrize("kind", resonance.PHASES)
def test_phase_gradients_match_finite_differences(kind, rng):
    n = 10_000
    x1 = rng.normal(size=(n, 3))
    x2 = rng.normal(size=(n, 3))
    xi = x1 + x2
    got = resonance.phase_gradients(kind, x1, x2)
    h = 1e-6
    for name, moving in (("grad_xi", 0), ("grad_xi2", 1)):
        fd = np.zeros((n, 3))
        for a in range(3):
            e = np.zeros(3)
            e[a] = h
            if moving == 0:
                fd[:, a] = (phase_in_output_variables(kind, xi + e, x2) - phase_in_output_variables(kind, xi - e, x2)) / (2 * h)
            else:
                fd[:, a] = (phase_in_output_variables(kind, xi, x2 + e) - phase_in_output_variables(kind, xi, x2 - e)) / (2 * h)
        assert np.max(np.abs(fd - got[name])) < 1e-7
    ang = np.sum(resonance.perp(xi, x2) * got["grad_xi2"], axis=-1)
    assert np.allclose(got["angular"], ang, atol=1e-14)


def test_phase_gradients_need_nonzero_inputs():
    with pytest.raises(ZeroFrequency):
        resonance.phase_gradients("conj2", np.zeros((1, 3)), np.ones((1, 3)))
    with pytest.raises(ValueError):
        resonance.phase("sideways", np.ones((1, 3)), np.ones((1, 3)))


def test_hessian_matches_finite_differences_of_the_gradient(rng):
    x = rng.normal(size=(100, 3)) * 10.0 ** rng.uniform(-2, 2, size=(100, 1))
    hess = resonance.hessian_H(x)
    for a in range(3):
        step = 1e-5 * np.linalg.norm(x, axis=1, keepdims=True)
        e = np.zeros(3)
        e[a] = 1.0
        fd = (resonance.grad_H(x + step * e) - resonance.grad_H(x - step * e)) / (2 * step)
        scale = np.max(np.abs(hess), axis=(1, 2))[:, None]
        assert np.max(np.abs(fd - hess[:, :, a]) / scale) < 1e-7


def test_gradient_difference_comparator_is_two_sided(rng):
    n = 20_000
    x = rng.normal(size=(n, 3)) * 10.0 ** rng.uniform(-3, 3, size=(n, 1))
    y = rng.normal(size=(n, 3)) * 10.0 ** rng.uniform(-3, 3, size=(n, 1))
    for sign in (1, -1):
        r = resonance.dh_difference_ratio(x, y, sign)
        assert r.min() > 0.5 and r.max() < 8.0


def test_angle_between_is_accurate_near_the_poles():
    e = np.array([[1.0, 0.0, 0.0]])
    for a in (1e-9, 1e-5, 0.3):
        y = np.array([[math.cos(a), math.sin(a), 0.0]])
        assert resonance.angle_between(e, y)[0] == pytest.approx(a, rel=1e-12)
        assert resonance.angle_between(e, -y)[0] == pytest.approx(math.pi - a, rel=1e-12)


def test_angular_steps_are_complementary():
    th = np.linspace(0, math.pi, 1001)
    up = resonance.angle_at_least(th, 0.2, 0.4)
    assert np.all(up[th <= 0.2] == 0.0) and np.all(up[th >= 0.4] == 1.0)
    assert np.allclose(up + resonance.angle_at_most(th, 0.2, 0.4), 1.0)


@pytest.mark.parametrize("kind", resonance.PHASES)
@pytest.mark.parametrize("thresholds", [resonance.STRICT, resonance.DESK], ids=["strict", "desk"])
def test_partition_and_denominators_on_one_pair(kind, thresholds):
    fam = resonance.build_region_family(kind, 2.0, 1.0, thresholds)
    assert resonance.partition_residual(fam, 20_000) <= 1e-10
    for count, dmin, _ in resonance.sample_denominators(fam, 20_000).values():
        assert count > 0
        assert dmin > 0


def test_cone_samples_fill_thin_cutoff_transitions(rng):
    fam = resonance.build_region_family("plain2", 2.0, 1.0)
    assert fam.angles
    x1, x2 = resonance.cone_samples(fam, 2000, rng)
    trans = np.zeros(len(x1), dtype=bool)
    for reg in fam.regions:
        v = reg.rho(x1, x2)
        trans |= (v > 0) & (v < 1)
    assert trans.mean() > 0.05
    # the samples stay on the fattened annuli
    for x, N in ((x1, 2.0), (x2, 1.0)):
        r = np.linalg.norm(x, axis=1)
        assert np.all((r > 0.25 * N * (1 - 1e-12)) & (r < 2.2 * N * (1 + 1e-12)))


def test_unsupported_dyad():
    with pytest.raises(UnsupportedDyad):
        resonance.build_region_family("conj2", 3.0, 1.0)


def test_mixed_constant_is_a_power_of_two():
    C = resonance.default_mixed_C(resonance.DESK)
    assert math.log2(C) == int(math.log2(C))
    assert resonance.region3_lower_bound_holds(C, resonance.DESK)


def test_plain2_pairs_are_ordered():
    assert all(b <= a for a, b in resonance.dyad_pairs("plain2", resonance.FAST_DYADS))
    assert len(resonance.dyad_pairs("conj2", resonance.FAST_DYADS)) == 16


def test_conj2_audit_row_on_one_pair():
    fam = resonance.build_region_family("conj2", 1.0, 1.0, resonance.DESK)
    (row,) = resonance.audit_family(fam, bilinear.A1_symbol(2.0), n_samples=20_000)
    assert row.kind == "time"
    assert row.min_denominator > 0
    assert math.isfinite(row.opnorms["bT"]) and row.opnorms["bT"] > 0
    assert row.ratios["bT"] == pytest.approx(row.opnorms["bT"] / row.claimed["bT"])
