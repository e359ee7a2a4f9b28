import math

import numpy as np
import pytest
import sympy as sp

from cqnls import bilinear, model, spectral
from cqnls.errors import BandCapExceeded, NonCompactSupport

from helpers import band_limited, normal_form_oracle


@pytest.fixture(scope="module")
def grid():
    return spectral.make_grid(3, 16, 12.0)


def test_constant_symbol_is_the_pointwise_product(grid, rng):
    K = bilinear.default_band_cap(grid)
    f = band_limited(grid, rng, K)
    g = band_limited(grid, rng, K)
    out = bilinear.apply_bilinear(grid, bilinear.constant_symbol(), f, g)
    assert np.max(np.abs(out - f * g)) < 1e-15


def test_derivative_symbol_is_a_product_of_derivative_and_field(grid, rng):
    K = bilinear.default_band_cap(grid)
    f = band_limited(grid, rng, K)
    g = band_limited(grid, rng, K)
    sym = bilinear.BilinearSymbol(lambda x1, x2: 1j * x1[..., 0])
    out = bilinear.apply_bilinear(grid, sym, f, g)
    assert np.max(np.abs(out - spectral.gradient(grid, f)[0] * g)) < 1e-14


def test_band_cap_guards(grid, rng):
    f = band_limited(grid, rng, 5)
    with pytest.raises(BandCapExceeded):
        bilinear.apply_bilinear(grid, bilinear.constant_symbol(), f, f, band_cap=3)
    with pytest.raises(BandCapExceeded):
        bilinear.apply_bilinear(grid, bilinear.constant_symbol(), f, f, band_cap=4)  # 4K + 1 > m


def test_normal_form_identity_symbolically():
    a, b, c = sp.symbols("a b c", positive=True)  # |xi1|^2, |xi2|, and the denominator check
    r2 = b
    Uinv = sp.sqrt(2 + r2**2) / r2
    H = r2 * sp.sqrt(2 + r2**2)
    B = -1 / (2 + a + r2**2)
    assert sp.simplify(Uinv + B * H + B * (2 + a) * Uinv) == 0


def test_normal_form_identity_numerically(rng):
    n = 10_000
    x1 = rng.normal(size=(n, 3)) * 10.0 ** rng.uniform(-2, 2, size=(n, 1))
    x2 = rng.normal(size=(n, 3)) * 10.0 ** rng.uniform(-2, 2, size=(n, 1))
    assert bilinear.max_identity_residual(x1, x2) <= 1e-12


def test_symbols_are_real_and_symmetric(rng):
    for sym in bilinear.normal_form_symbols(2.0).values():
        assert sym.check_reality(rng) < 1e-14
        x1 = rng.normal(size=(50, 3))
        x2 = rng.normal(size=(50, 3))
        assert np.allclose(sym(x1, x2), sym(x2, x1), atol=1e-15)


def test_route_equivalence_on_band_limited_states(grid, rng):
    K = bilinear.default_band_cap(grid)
    for _ in range(3):
        u = band_limited(grid, rng, K // 2 if K > 1 else 1, amplitude=0.1)
        st = model.v_from_u(grid, u)
        st.u2_mean = 0.0
        n2, n2a = bilinear.compute_Nk(grid, st, 2.0, 2)
        assert spectral.l2_norm(grid, n2 - n2a) <= 1e-10 * spectral.l2_norm(grid, n2)


def test_derivative_bounds_are_scale_invariant(rng):
    out = bilinear.derivative_bound_audit(2.0, rng, n=2000)
    for name in ("A1", "A2"):
        for order in (1, 2):
            assert out[name][order] < 10.0


def gaussian_factors():
    r = sp.symbols("r", positive=True)
    g = sp.exp(-(r**2))
    grad2 = sp.diff(g, r) ** 2
    lap = sp.diff(r**2 * sp.diff(g, r), r) / r**2
    h1 = sp.sqrt(sp.integrate(4 * sp.pi * r**2 * grad2, (r, 0, sp.oo)))
    h2 = sp.sqrt(sp.integrate(4 * sp.pi * r**2 * lap**2, (r, 0, sp.oo)))
    return float(h1), float(h2)


def test_gaussian_closed_form_oracle():
    h1, _ = gaussian_factors()
    assert h1 == pytest.approx(math.sqrt(3 * (math.pi / 2) ** 1.5), rel=1e-14)


def test_qmc_estimator_on_gaussian():
    h1, h2 = gaussian_factors()
    rep = bilinear.opnorm_estimate(bilinear.gaussian_symbol())
    assert rep.parts["xi1"]["Hdot1"] == pytest.approx(h1, rel=1e-2)
    assert rep.parts["xi1"]["Hdot2"] == pytest.approx(h2, rel=1e-2)
    assert rep.value == pytest.approx(math.sqrt(h1 * h2), rel=1e-2)


def test_axial_estimator_on_gaussian():
    h1, h2 = gaussian_factors()
    rep = bilinear.opnorm_axial(bilinear.gaussian_symbol())
    assert rep.parts["xi1"]["Hdot1"] == pytest.approx(h1, rel=1e-8)
    assert rep.parts["xi1"]["Hdot2"] == pytest.approx(h2, rel=1e-8)


@pytest.mark.parametrize("estimator", ["qmc", "axial"])
def test_dilation_invariance(estimator):
    # op{b(./N)} does not depend on N: the Hdot^1 factor scales like N^{1/2}, Hdot^2 like N^{-1/2}
    run = bilinear.opnorm_estimate if estimator == "qmc" else bilinear.opnorm_axial
    vals = [run(bilinear.fat_bump_symbol(N)).value for N in (0.125, 1.0, 8.0)]
    assert max(vals) / min(vals) < 1.02


def test_estimators_agree_on_the_fat_bump():
    a = bilinear.opnorm_estimate(bilinear.fat_bump_symbol(1.0)).value
    b = bilinear.opnorm_axial(bilinear.fat_bump_symbol(1.0)).value
    assert a == pytest.approx(b, rel=0.02)


def test_unbounded_symbol_is_refused():
    sym = bilinear.BilinearSymbol(lambda x1, x2: np.ones(x1.shape[:-1]), name="one")
    with pytest.raises(NonCompactSupport):
        bilinear.opnorm_estimate(sym, n_quad=2**10, n_xi=2)


def test_axial_nodes_integrate_a_ball_exactly():
    pts, wts, loc = bilinear.axial_nodes(1.0, {"r": [0.5], "a": [1.0]}, {"r": [0.7], "a": []}, 2.0)
    assert wts.sum() == pytest.approx(4 / 3 * math.pi * 8.0, rel=1e-12)
    r = np.linalg.norm(pts, axis=1)
    assert np.sum(wts * r**2) == pytest.approx(4 * math.pi * 2.0**5 / 5, rel=1e-12)
    assert np.all(loc > 0)


def test_quadratic_term_matches_a_direct_derivation(grid, rng):
    for _ in range(3):
        st = model.v_from_u(grid, band_limited(grid, rng, 1, amplitude=0.1))
        st.u2_mean = 0.0
        u = model.u_from_v(grid, st)
        assert spectral.l2_norm(grid, u.real * u.imag) > 0
        n2, _ = bilinear.compute_Nk(grid, st, 2.0, 2)
        ref = normal_form_oracle(grid, st, 2.0)
        assert spectral.l2_norm(grid, n2 - ref) <= 1e-10 * spectral.l2_norm(grid, n2)
        # the u1 u2 product lives only in the imaginary part of N, and the result has none
        assert np.max(np.abs(n2.imag)) < 1e-14


def test_apply_bilinear_is_linear_in_each_argument(grid, rng):
    K = bilinear.default_band_cap(grid)
    f, f2, g = (band_limited(grid, rng, K // 2) for _ in range(3))
    a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
    sym = bilinear.BilinearSymbol(bilinear.B_symbol)
    lhs = bilinear.apply_bilinear(grid, sym, a * f + b * f2, g)
    rhs = a * bilinear.apply_bilinear(grid, sym, f, g) + b * bilinear.apply_bilinear(grid, sym, f2, g)
    assert np.max(np.abs(lhs - rhs)) <= 1e-13 * np.max(np.abs(lhs))
    assert np.max(np.abs(bilinear.apply_bilinear(grid, sym, f, g) - bilinear.apply_bilinear(grid, sym, g, f))) < 1e-13


def restricted_gaussian(R):
    return bilinear.BilinearSymbol(
        lambda x1, x2: np.exp(-np.sum(x1 * x1, axis=-1)) * spectral.phi_bump(np.linalg.norm(x1, axis=-1) / R),
        support=(1.1 * R, None),
        real=True,
    )


def test_restriction_changes_op_only_through_cutoff_derivatives():
    # a cutoff equal to 1 wherever the symbol is non-negligible leaves op unchanged, while a
    # cutoff cutting through the symbol adds its own derivatives: op is not monotone under restriction
    base = bilinear.opnorm_estimate(bilinear.gaussian_symbol()).value
    assert bilinear.opnorm_estimate(restricted_gaussian(3.5)).value == pytest.approx(base, rel=1e-3)
    assert bilinear.opnorm_estimate(restricted_gaussian(0.5)).value > 5 * base
