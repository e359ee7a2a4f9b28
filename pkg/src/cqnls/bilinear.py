"""Bilinear Fourier multipliers, the op{.} symbol norm and normal-form algebra.

A bilinear symbol is a callable ``b(x1, x2)`` taking frequency arrays of shape
``(..., d)`` and returning values of shape ``(...)`` (scalar symbols) or
``(..., c)`` (vector symbols).  The operator it defines acts on Fourier
coefficients by

    B[f, g]^(k) = sum_{k1 + k2 = k} b(xi_k1, xi_k2) c_f(k1) c_g(k2),

which with the Fourier-series convention of :mod:`cqnls.spectral` reduces to
the pointwise product when b = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from . import model, spectral
from .errors import BandCapExceeded, NonCompactSupport


@dataclass
class BilinearSymbol:
    func: object
    name: str = "symbol"
    support: tuple | None = None  # (radius in xi1, radius in xi2); None entries mean unbounded
    real: bool = False
    smoothness: int = 2
    # Optional geometry for the axial estimator: radii where |xi1| ("r1") or
    # |xi2| ("r2") features sit, angles to xi where the direction of xi1
    # ("a01") or xi2 ("a02") features sit, and the narrowest feature widths
    # ("min_angle", "min_radius").  Only meaningful for rotation-covariant symbols.
    breaks: dict | None = None

    def __call__(self, x1, x2):
        return self.func(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))

    def check_reality(self, rng, d=3, n=256, scale=2.0, tol=1e-12):
        """max |conj b(x1, x2) - b(-x1, -x2)| on random samples."""
        x1 = rng.normal(scale=scale, size=(n, d))
        x2 = rng.normal(scale=scale, size=(n, d))
        return float(np.max(np.abs(np.conj(self(x1, x2)) - self(-x1, -x2))))


def constant_symbol(c=1.0):
    return BilinearSymbol(lambda x1, x2: np.full(x1.shape[:-1], c, dtype=float), name=f"const({c})", real=True)


# --- application ------------------------------------------------------------------


def default_band_cap(grid):
    cap = grid.m // 4 - 1
    return min(cap, 8) if grid.d == 3 else cap


def _band_modes(grid, K):
    r = np.arange(-K, K + 1)
    mesh = np.meshgrid(*([r] * grid.d), indexing="ij")
    idx = np.stack([a.ravel() for a in mesh], axis=-1)
    return idx


def _flat_index(grid, idx):
    m = grid.m
    flat = np.zeros(idx.shape[:-1], dtype=np.int64)
    for a in range(grid.d):
        flat = flat * m + np.mod(idx[..., a], m)
    return flat


def band_excess(grid, c, K):
    """Fraction of sum |c|^2 carried by modes with some |k_a| > K."""
    inside = np.ones(grid.shape, dtype=bool)
    for a in range(grid.d):
        inside = inside & (np.abs(grid._axis_view(grid.k1d, a)) <= K)
    tot = float(np.sum(np.abs(c) ** 2))
    if tot == 0.0:
        return 0.0
    return float(np.sum(np.abs(c[~inside]) ** 2)) / tot


def apply_bilinear(grid, symbol, f, g, band_cap=None, tol=1e-26, chunk=2**22):
    """Exact truncated convolution B[f, g] on the lattice band |k_a| <= band_cap."""
    K = default_band_cap(grid) if band_cap is None else int(band_cap)
    if 4 * K + 1 > grid.m:
        raise BandCapExceeded(f"band cap {K} too large for m = {grid.m}: outputs would alias")
    cf = spectral.to_coefficients(grid, f)
    cg = spectral.to_coefficients(grid, g)
    for name, c in (("first", cf), ("second", cg)):
        ex = band_excess(grid, c, K)
        if ex > tol:
            raise BandCapExceeded(f"{name} input carries a fraction {ex:.2e} of its mass above the band cap {K}")
    idx = _band_modes(grid, K)
    flat = _flat_index(grid, idx)
    a = cf.ravel()[flat]
    b = cg.ravel()[flat]
    keep_a = np.nonzero(a)[0]
    keep_b = np.nonzero(b)[0]
    out_re = np.zeros(grid.npoints)
    out_im = np.zeros(grid.npoints)
    if keep_a.size and keep_b.size:
        xi_a = grid.dk * idx[keep_a]
        xi_b = grid.dk * idx[keep_b]
        ia = idx[keep_a]
        ib = idx[keep_b]
        rows = max(1, chunk // keep_b.size)
        for s in range(0, keep_a.size, rows):
            sl = slice(s, s + rows)
            vals = symbol(xi_a[sl, None, :], xi_b[None, :, :])
            if vals.ndim != 2:
                raise ValueError("apply_bilinear needs a scalar symbol")
            w = vals * a[keep_a][sl, None] * b[keep_b][None, :]
            tgt = _flat_index(grid, ia[sl, None, :] + ib[None, :, :]).ravel()
            w = w.ravel()
            out_re += np.bincount(tgt, weights=w.real, minlength=grid.npoints)
            out_im += np.bincount(tgt, weights=np.imag(w), minlength=grid.npoints)
    coeff = (out_re + 1j * out_im).reshape(grid.shape)
    return spectral.to_physical(grid, coeff)


# --- normal-form symbols --------------------------------------------------------------


def _dot(x, y):
    return np.sum(x * y, axis=-1)


def _norm2(x):
    return np.sum(x * x, axis=-1)


def nf_denominator(x1, x2):
    return 2.0 + _norm2(x1) + _norm2(x2)


def B_symbol(x1, x2):
    return -1.0 / nf_denominator(x1, x2)


def A1_symbol(beta):
    def A1(x1, x2):
        return (4.0 + 4.0 * beta) + 2.0 * _dot(x1, x2) / nf_denominator(x1, x2)

    return A1


def A2_symbol(x1, x2):
    n1 = np.sqrt(_norm2(x1))
    n2 = np.sqrt(_norm2(x2))
    prod = n1 * n2
    with np.errstate(divide="ignore", invalid="ignore"):
        cosang = np.where(prod > 0, _dot(x1, x2) / np.where(prod > 0, prod, 1.0), 0.0)
    j1 = np.sqrt(2.0 + n1 * n1)
    j2 = np.sqrt(2.0 + n2 * n2)
    return -2.0 * j1 * j2 / nf_denominator(x1, x2) * cosang


def normal_form_symbols(beta):
    return {
        "B": BilinearSymbol(B_symbol, name="B", real=True),
        "A1": BilinearSymbol(A1_symbol(beta), name="A1", real=True),
        "A2": BilinearSymbol(A2_symbol, name="A2", real=True),
    }


def normal_form_identity_residual(x1, x2):
    """Pointwise U^-1(x2) + B H(x2) + B (2 + |x1|^2) U^-1(x2) (x2 != 0)."""
    r2 = np.sqrt(_norm2(np.asarray(x2, dtype=float)))
    b = B_symbol(np.asarray(x1, dtype=float), np.asarray(x2, dtype=float))
    uinv = spectral.Uinv_symbol(r2)
    return uinv + b * spectral.H_symbol(r2) + b * (2.0 + _norm2(np.asarray(x1, dtype=float))) * uinv


def max_identity_residual(x1, x2):
    """max |residual| relative to the size of the individual terms."""
    r2 = np.sqrt(_norm2(np.asarray(x2, dtype=float)))
    res = np.abs(normal_form_identity_residual(x1, x2))
    return float(np.max(res / spectral.Uinv_symbol(r2)))


# --- the N_k hierarchy ---------------------------------------------------------------------


def nk_terms(grid, state, beta, band_cap=None, orders=(2, 3, 4, 5, 6)):
    """Dictionary of script-N_k for k in ``orders`` plus, with k = 2, the second route.

    u includes the tracked mean of u2; v1 = Re v and U^-1 v2 drop the zero mode
    exactly as the symbols do.
    """
    v = state.v
    v1 = v.real.astype(complex)
    w2 = spectral.apply_Uinv(grid, v.imag).real.astype(complex)
    u = model.u_from_v(grid, state)
    parts = model.nonlinearity_parts(u, beta)
    Bs = BilinearSymbol(B_symbol, name="B", real=True)

    def bil(sym, f, g):
        return apply_bilinear(grid, sym, f, g, band_cap=band_cap)

    out = {}
    if 2 in orders:
        out.update(_n2_terms(grid, v1, w2, v, beta, Bs, bil))
    for k in (3, 4, 5, 6):
        if k not in orders:
            continue
        prev = parts[k - 1]
        corr = 2j * (bil(Bs, v1, prev.imag.astype(complex)) + bil(Bs, w2, prev.real.astype(complex)))
        if k <= 5:
            nk = parts[k]
            base = spectral.apply_U(grid, nk.real.astype(complex)) + 1j * nk.imag
            out[k] = base + corr
        else:
            out[k] = corr
    return out


def _n2_terms(grid, v1, w2, v, beta, Bs, bil):
    out = {}
    q = (3.0 + 4.0 * beta) * spectral.apply_U(grid, v1 * v1) + spectral.apply_U(grid, w2 * w2)
    q = q - spectral.apply_H(grid, bil(Bs, v1, v1)) + spectral.apply_H(grid, bil(Bs, w2, w2))
    out[2] = q
    a1 = BilinearSymbol(A1_symbol(beta), name="A1", real=True)
    a2 = BilinearSymbol(A2_symbol, name="A2", real=True)
    v2 = v.imag.astype(complex)
    out["2_via_A"] = spectral.apply_U(grid, bil(a1, v1, v1) + bil(a2, v2, v2))
    return out


def compute_Nk(grid, state, beta, k, band_cap=None):
    terms = nk_terms(grid, state, beta, band_cap, orders=(k,))
    if k == 2:
        return terms[2], terms["2_via_A"]
    return terms[k]


def boundary_term(grid, state, band_cap=None):
    """B[v1, v1] - B[U^-1 v2, U^-1 v2]."""
    v1 = state.v.real.astype(complex)
    w2 = spectral.apply_Uinv(grid, state.v.imag).real.astype(complex)
    Bs = BilinearSymbol(B_symbol, name="B", real=True)
    return apply_bilinear(grid, Bs, v1, v1, band_cap) - apply_bilinear(grid, Bs, w2, w2, band_cap)


# --- derivative-bound audit ------------------------------------------------------------------


def _fd_derivs(fun, x1, x2, var, h):
    """First and second central differences in every direction of xi_var."""
    d = x1.shape[-1]
    f0 = fun(x1, x2)
    firsts, seconds = [], []
    for a in range(d):
        e = np.zeros(d)
        e[a] = 1.0
        hh = h[..., None] * e
        if var == 1:
            fp, fm = fun(x1 + hh, x2), fun(x1 - hh, x2)
        else:
            fp, fm = fun(x1, x2 + hh), fun(x1, x2 - hh)
        firsts.append((fp - fm) / (2 * h))
        seconds.append((fp - 2 * f0 + fm) / h**2)
    return np.sqrt(sum(np.abs(f) ** 2 for f in firsts)), np.sqrt(sum(np.abs(s) ** 2 for s in seconds))


def derivative_bound_audit(beta, rng, n=4000, d=3, decades=(-3, 3)):
    """Scaled finite-difference derivative sizes of A1 and A2 over a log-spaced cloud.

    Returns, for each symbol and order 1, 2, the maximum of
    |d^a A| * (scale)^|a| where scale is |xi1| v |xi2| for A1 and |xi1| ^ |xi2| for A2.
    """
    r1 = 10.0 ** rng.uniform(*decades, size=n)
    r2 = 10.0 ** rng.uniform(*decades, size=n)
    dir1 = rng.normal(size=(n, d))
    dir2 = rng.normal(size=(n, d))
    x1 = dir1 / np.linalg.norm(dir1, axis=1, keepdims=True) * r1[:, None]
    x2 = dir2 / np.linalg.norm(dir2, axis=1, keepdims=True) * r2[:, None]
    out = {}
    # the constant 4 + 4 beta has no derivatives and would swamp second differences of the
    # small variable part in round-off; beta = -1 evaluates the variable part alone
    a1 = A1_symbol(-1.0)
    for name, fun, scale in (
        ("A1", a1, np.maximum(r1, r2)),
        ("A2", A2_symbol, np.minimum(r1, r2)),
    ):
        worst = {1: 0.0, 2: 0.0}
        for var in (1, 2):
            # step relative to the differentiated frequency so second differences stay above round-off
            h = 1e-3 * (r1 if var == 1 else r2)
            g1, g2 = _fd_derivs(fun, x1, x2, var, h)
            worst[1] = max(worst[1], float(np.max(g1 * scale)))
            worst[2] = max(worst[2], float(np.max(g2 * scale**2)))
        out[name] = worst
    return out


# --- op{.} estimator --------------------------------------------------------------------------


@dataclass
class OpNormReport:
    value: float
    parts: dict
    n_quad: int
    n_xi: int
    quad_error: float
    excluded_fraction: float = 0.0
    notes: list = field(default_factory=list)

    def as_dict(self):
        return {
            "value": self.value,
            "parts": self.parts,
            "n_quad": self.n_quad,
            "n_xi": self.n_xi,
            "quad_error": self.quad_error,
            "excluded_fraction": self.excluded_fraction,
            "notes": self.notes,
        }


def _sobol_ball(n, d, seed):
    """Scrambled Sobol points filling the cube [-1, 1]^d (cube volume 2^d)."""
    s = qmc.Sobol(d=d, scramble=True, seed=seed)
    m = int(math.ceil(math.log2(n)))
    return 2.0 * s.random_base2(m) - 1.0


def _as_components(vals):
    vals = np.asarray(vals)
    return vals


def _sobolev_factors(g, pts, h, weight):
    """(H1, H2, H1 with step 2h, H2 with step 2h) integrals of |grad g|^2 and |Lap g|^2.

    ``g`` maps points (n, d) to values (n,) or (n, c).  Derivatives are central
    differences at steps h and h/2 combined by Richardson extrapolation.
    """
    n, d = pts.shape
    f0 = g(pts)
    grad2_r, lap_r = 0.0, 0.0
    grad2_c, lap_c = 0.0, 0.0
    lap_h = 0.0
    lap_h2 = 0.0
    grad_sq_r = np.zeros(n)
    grad_sq_c = np.zeros(n)
    for a in range(d):
        e = np.zeros(d)
        e[a] = h
        fp, fm = g(pts + e), g(pts - e)
        fp2, fm2 = g(pts + 0.5 * e), g(pts - 0.5 * e)
        D1 = (fp - fm) / (2 * h)
        D2 = (fp2 - fm2) / h
        Dr = (4 * D2 - D1) / 3.0
        grad_sq_r = grad_sq_r + _abs2(Dr)
        grad_sq_c = grad_sq_c + _abs2(D2)
        S1 = (fp - 2 * f0 + fm) / h**2
        S2 = (fp2 - 2 * f0 + fm2) / (0.25 * h * h)
        lap_h = lap_h + S2
        lap_h2 = lap_h2 + (4 * S2 - S1) / 3.0
    H1 = float(np.sum(weight * grad_sq_r))
    H2 = float(np.sum(weight * _abs2(lap_h2)))
    H1c = float(np.sum(weight * grad_sq_c))
    H2c = float(np.sum(weight * _abs2(lap_h)))
    return H1, H2, H1c, H2c, f0


def _abs2(x):
    a = np.abs(x) ** 2
    if a.ndim > 1:
        a = a.sum(axis=tuple(range(1, a.ndim)))
    return a


def _pick_xi(symbol, d, r1, r2, n_xi, rng):
    """Output frequencies: where |b| is largest on a random cloud, plus random ones."""
    n = 4096
    u1 = rng.normal(size=(n, d))
    u2 = rng.normal(size=(n, d))
    rad1 = r1 * rng.uniform(0, 1, size=n) ** (1.0 / d)
    rad2 = r2 * rng.uniform(0, 1, size=n) ** (1.0 / d)
    x1 = u1 / np.linalg.norm(u1, axis=1, keepdims=True) * rad1[:, None]
    x2 = u2 / np.linalg.norm(u2, axis=1, keepdims=True) * rad2[:, None]
    vals = _abs2(np.asarray(symbol(x1, x2)))
    order = np.argsort(vals)[::-1]
    n_top = n_xi // 2
    picks = [x1[i] + x2[i] for i in order[:n_top]]
    rest = rng.choice(n, size=n_xi - n_top, replace=False)
    picks += [x1[i] + x2[i] for i in rest]
    return np.array(picks)


def opnorm_estimate(
    symbol,
    d=3,
    n_quad=2**16,
    n_xi=8,
    xi_samples=None,
    radius=6.0,
    h_rel=1e-3,
    seed=0,
    exclude=1e-3,
    tail_tol=0.01,
    orderings=(1, 2),
):
    """Estimate op{b} = min over orderings of sqrt(||b||_{L^inf Hdot^1} ||b||_{L^inf Hdot^2}).

    The free variable is integrated by scrambled Sobol quadrature over the
    smaller of the two balls that bound the support (from ``symbol.support``)
    or over a ball of ``radius`` when no bound is known.  Points with
    |xi_j| < ``exclude`` * scale are dropped and their share reported.
    """
    rng = np.random.default_rng(seed)
    sup = symbol.support or (None, None)
    r1 = sup[0] if sup[0] is not None else radius
    r2 = sup[1] if sup[1] is not None else radius
    if xi_samples is None:
        xi_samples = _pick_xi(symbol, d, r1, r2, n_xi, rng)
    xi_samples = np.atleast_2d(np.asarray(xi_samples, dtype=float))
    base = _sobol_ball(n_quad, d, seed)
    parts = {}
    errs = []
    excluded = 0.0
    notes = []
    best = math.inf
    for order in orderings:
        own = sup[order - 1]
        other = sup[2 - order]
        H1max = H2max = 0.0
        H1c_max = H2c_max = 0.0
        for xi in xi_samples:
            # y is the free variable (xi1 for order 1, xi2 for order 2)
            if own is not None and (other is None or own <= other):
                centre, R = np.zeros(d), own
            elif other is not None:
                centre, R = xi.copy(), other
            else:
                centre, R = np.zeros(d), radius
            pts = centre + R * base
            inside = np.sum((pts - centre) ** 2, axis=1) <= R * R
            y_other = xi - pts
            scale = max(R, 1e-300)
            keep = inside & (np.sqrt(np.sum(pts**2, axis=1)) >= exclude * scale) & (
                np.sqrt(np.sum(y_other**2, axis=1)) >= exclude * scale
            )
            excluded = max(excluded, 1.0 - keep.sum() / max(inside.sum(), 1))
            vol = (2.0 * R) ** d / base.shape[0]
            p = pts[keep]
            h = h_rel * R

            if order == 1:
                def g(y, xi=xi):
                    return symbol(y, xi - y)
            else:
                def g(y, xi=xi):
                    return symbol(xi - y, y)

            H1, H2, H1c, H2c, f0 = _sobolev_factors(g, p, h, vol)
            if own is None and other is None:
                rr = np.sqrt(np.sum((p - centre) ** 2, axis=1))
                shell = rr > 0.8 * R
                bulk = float(np.sum(_abs2(f0)))
                if bulk > 0 and float(np.sum(_abs2(f0)[shell])) > tail_tol * bulk:
                    raise NonCompactSupport(
                        f"symbol {symbol.name} keeps {float(np.sum(_abs2(f0)[shell])) / bulk:.2%} of its mass in the outer shell of radius {R}"
                    )
            H1max = max(H1max, H1)
            H2max = max(H2max, H2)
            H1c_max = max(H1c_max, H1c)
            H2c_max = max(H2c_max, H2c)
        h1 = math.sqrt(H1max)
        h2 = math.sqrt(H2max)
        val = math.sqrt(h1 * h2)
        parts[f"xi{order}"] = {"Hdot1": h1, "Hdot2": h2, "value": val}
        if H1max > 0:
            errs.append(abs(math.sqrt(H1c_max) - h1) / h1)
        if H2max > 0:
            errs.append(abs(math.sqrt(H2c_max) - h2) / h2)
        best = min(best, val)
    if excluded > 0:
        notes.append(f"excluded up to {excluded:.2e} of quadrature points near xi_j = 0")
    return OpNormReport(
        value=0.0 if best == math.inf else best,
        parts=parts,
        n_quad=base.shape[0],
        n_xi=len(xi_samples),
        quad_error=max(errs) if errs else 0.0,
        excluded_fraction=excluded,
        notes=notes,
    )


# --- axial estimator for rotation-covariant symbols -------------------------------------------


def _merge(breaks, lo, hi, min_gap, max_len):
    b = sorted(x for x in set(breaks) | {lo, hi} if lo <= x <= hi)
    merged = [b[0]]
    for x in b[1:]:
        if x - merged[-1] >= min_gap:
            merged.append(x)
    if merged[-1] != hi:
        if len(merged) > 1 and hi - merged[-1] < min_gap:
            merged[-1] = hi
        else:
            merged.append(hi)
    out = [merged[0]]
    for x in merged[1:]:
        k = max(1, int(math.ceil((x - out[-1]) / max_len)))
        out += list(np.linspace(out[-1], x, k + 1)[1:])
    return np.array(out)


def _panel_nodes(edges, gx, gw):
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    nodes = (0.5 * (a + b))[:, None] + half[:, None] * gx[None, :]
    weights = half[:, None] * gw[None, :]
    lengths = np.repeat(b - a, gx.size)
    return nodes.ravel(), weights.ravel(), lengths


def _other_coords(s, r, alpha):
    """|xi - y| and the angle between xi and xi - y for y at radius r, polar angle alpha."""
    rad = np.sqrt(np.maximum(s * s + r * r - 2.0 * s * r * np.cos(alpha), 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(rad > 0, (s - r * np.cos(alpha)) / np.where(rad > 0, rad, 1.0), 1.0)
    return rad, np.arccos(np.clip(c, -1.0, 1.0))


def _alpha_crossings(s, r, radii, angles):
    """Polar angles alpha in (0, pi) of y = (r, alpha) where xi - y hits a feature.

    With xi = s e_z, |xi - y| = b when cos alpha = (s^2 + r^2 - b^2) / (2 s r),
    and the angle between xi and xi - y equals c when r sin(alpha + c) = s sin c.
    """
    out = []
    if s <= 0 or r <= 0:
        return out
    for b in radii:
        c = (s * s + r * r - b * b) / (2.0 * s * r)
        if -1.0 < c < 1.0:
            out.append(math.acos(c))
    for c in angles:
        q = s * math.sin(c) / r
        if q > 1.0:
            continue
        base = math.asin(q)
        for a in (base - c, math.pi - base - c):
            if 0.0 < a < math.pi and abs(_other_coords(s, r, a)[1] - c) < 1e-9 * max(1.0, c):
                out.append(a)
    return out


def axial_nodes(s, own, other, R, n_gl=6, max_dr=None, max_da=math.pi / 16, keep=None):
    """Quadrature for the free variable y in polar coordinates about xi = s e_z.

    ``own``/``other`` are dicts with "r" (radii) and "a" (angles) feature lists
    for y and for xi - y.  Panels whose midpoint fails ``keep`` (a callable on
    points (n, 3) returning booleans) are dropped; this is exact when every
    boundary of the kept set is a declared feature, because GL nodes sit
    farther from panel edges than the finite-difference reach.  Returns points (n, 3),
    weights (n,) and a local length scale (n,) used to size finite-difference
    steps.
    """
    gx, gw = np.polynomial.legendre.leggauss(n_gl)
    min_dr = min(own.get("min_radius", 1e-3 * R), other.get("min_radius", 1e-3 * R))
    min_da = min(own.get("min_angle", 1e-2), other.get("min_angle", 1e-2))
    if max_dr is None:
        max_dr = R / 12.0
    rb = list(own.get("r", []))
    for b in other.get("r", []):
        rb += [abs(s - b), s + b]
    for c in other.get("a", []):
        if c < math.pi / 2:
            rb.append(s * math.sin(c))
    rb.append(s)
    redges = _merge(rb, 0.0, R, 0.25 * min_dr, max_dr)
    own_a = list(own.get("a", []))
    other_r = list(other.get("r", []))
    other_a = list(other.get("a", []))
    pts, wts, loc = [], [], []
    for i in range(redges.size - 1):
        lo, hi = redges[i], redges[i + 1]
        half = 0.5 * (hi - lo)
        for x, w in zip(gx, gw):
            r = 0.5 * (lo + hi) + half * x
            w_r = half * w
            ab = own_a + _alpha_crossings(s, r, other_r, other_a)
            aedges = _merge(ab, 0.0, math.pi, 0.25 * min_da, max_da)
            if keep is not None:
                am = 0.5 * (aedges[:-1] + aedges[1:])
                ok = keep(np.stack([r * np.sin(am), np.zeros_like(am), r * np.cos(am)], axis=1))
                if not ok.any():
                    continue
                lo_e, hi_e = aedges[:-1][ok], aedges[1:][ok]
            else:
                lo_e, hi_e = aedges[:-1], aedges[1:]
            ah = 0.5 * (hi_e - lo_e)
            aa = (0.5 * (lo_e + hi_e))[:, None] + ah[:, None] * gx[None, :]
            wa = ah[:, None] * gw[None, :]
            da = np.repeat(hi_e - lo_e, gx.size)
            aa = aa.ravel()
            sa = np.sin(aa)
            pts.append(np.stack([r * sa, np.zeros_like(aa), r * np.cos(aa)], axis=1))
            wts.append(2.0 * math.pi * r * r * sa * w_r * wa.ravel())
            loc.append(np.minimum(2 * half, r * da))
    if not pts:
        return np.zeros((0, 3)), np.zeros(0), np.zeros(0)
    return np.concatenate(pts), np.concatenate(wts), np.concatenate(loc)


def _bcast(h, vals):
    return h.reshape(h.shape + (1,) * (vals.ndim - 1))


def _sobolev_local(g, pts, h, weight):
    """Like :func:`_sobolev_factors` but with a per-point step h (n,)."""
    n, d = pts.shape
    f0 = g(pts)
    hb = _bcast(h, np.asarray(f0))
    grad_r = np.zeros(n)
    grad_c = np.zeros(n)
    lap_h = 0.0
    lap_r = 0.0
    for a in range(d):
        e = np.zeros((n, d))
        e[:, a] = h
        fp, fm = g(pts + e), g(pts - e)
        fp2, fm2 = g(pts + 0.5 * e), g(pts - 0.5 * e)
        D1 = (fp - fm) / (2 * hb)
        D2 = (fp2 - fm2) / hb
        grad_r = grad_r + _abs2((4 * D2 - D1) / 3.0)
        grad_c = grad_c + _abs2(D2)
        S1 = (fp - 2 * f0 + fm) / hb**2
        S2 = (fp2 - 2 * f0 + fm2) / (0.25 * hb * hb)
        lap_h = lap_h + S2
        lap_r = lap_r + (4 * S2 - S1) / 3.0
    return (
        float(np.sum(weight * grad_r)),
        float(np.sum(weight * _abs2(lap_r))),
        float(np.sum(weight * grad_c)),
        float(np.sum(weight * _abs2(lap_h))),
    )


def _axial_parts(symbol, s, order, R, n_gl, h_rel):
    br = symbol.breaks or {}
    f1 = {"r": br.get("r1", []), "a": br.get("a01", []), "min_angle": br.get("min_angle", 1e-2), "min_radius": br.get("min_radius", 1e-3 * R)}
    f2 = {"r": br.get("r2", []), "a": br.get("a02", []), "min_angle": br.get("min_angle", 1e-2), "min_radius": br.get("min_radius", 1e-3 * R)}
    own, other = (f1, f2) if order == 1 else (f2, f1)
    xi = np.array([0.0, 0.0, s])
    keep = None
    if symbol.breaks and symbol.breaks.get("weight") is not None:
        wfun = symbol.breaks["weight"]
        if order == 1:
            keep = lambda y: np.asarray(wfun(y, xi - y)) != 0  # noqa: E731
        else:
            keep = lambda y: np.asarray(wfun(xi - y, y)) != 0  # noqa: E731
    pts, wts, loc = axial_nodes(s, own, other, R, n_gl=n_gl, keep=keep)
    if pts.shape[0] == 0:
        return (0.0, 0.0, 0.0, 0.0), 0
    if order == 1:
        def g(y):
            return symbol(y, xi - y)
    else:
        def g(y):
            return symbol(xi - y, y)
    return _sobolev_local(g, pts, h_rel * loc, wts), pts.shape[0]


def opnorm_axial(symbol, n_scan=16, n_gl=6, h_rel=0.02, radius=6.0, orderings=(1, 2), refine=3):
    """op{b} for a rotation-covariant symbol in three dimensions.

    Rotation covariance makes the Sobolev norms in the free variable depend on
    xi only through |xi|, so the supremum is a one-dimensional scan, and the
    integrand is axisymmetric about xi, so the free variable is integrated by
    Gauss-Legendre panels in (radius, polar angle) whose breakpoints sit on
    every declared cutoff transition of either input.
    """
    sup = symbol.support or (None, None)
    r1 = sup[0] if sup[0] is not None else radius
    r2 = sup[1] if sup[1] is not None else radius
    smax = r1 + r2
    scan = list(np.geomspace(1e-3 * smax, smax, n_scan))
    parts = {}
    errs = []
    best = math.inf
    npts = 0
    for order in orderings:
        own, other = sup[order - 1], sup[2 - order]
        cache = {}

        def evaluate(sv, own=own, other=other, order=order, cache=cache):
            if sv not in cache:
                # an unbounded free variable still only matters within reach of the other support
                if own is not None:
                    R = own
                elif other is not None:
                    R = sv + other
                else:
                    R = radius
                cache[sv], _n = _axial_parts(symbol, sv, order, R, n_gl, h_rel)
            return cache[sv]

        for sv in scan:
            evaluate(sv)
        for idx in (0, 1):
            for _ in range(refine):
                keys = sorted(cache)
                vals = [cache[k][idx] for k in keys]
                j = int(np.argmax(vals))
                for nb in (j - 1, j + 1):
                    if 0 <= nb < len(keys):
                        evaluate(math.sqrt(keys[j] * keys[nb]))
        H1max = max(v[0] for v in cache.values())
        H2max = max(v[1] for v in cache.values())
        H1c = max(v[2] for v in cache.values())
        H2c = max(v[3] for v in cache.values())
        h1, h2 = math.sqrt(H1max), math.sqrt(H2max)
        val = math.sqrt(h1 * h2)
        parts[f"xi{order}"] = {"Hdot1": h1, "Hdot2": h2, "value": val, "n_xi": len(cache)}
        if H1max > 0:
            errs.append(abs(math.sqrt(H1c) - h1) / h1)
        if H2max > 0:
            errs.append(abs(math.sqrt(H2c) - h2) / h2)
        best = min(best, val)
        npts = max(npts, len(cache))
    return OpNormReport(
        value=0.0 if best == math.inf else best,
        parts=parts,
        n_quad=n_gl,
        n_xi=npts,
        quad_error=max(errs) if errs else 0.0,
        notes=["axial quadrature"],
    )


# --- builtin symbols for the CLI -----------------------------------------------------------


def gaussian_symbol(radius=4.0):
    """exp(-|xi1|^2); ``radius`` is the ball treated as its support in xi1."""
    return BilinearSymbol(lambda x1, x2: np.exp(-_norm2(x1)), name="gaussian", support=(radius, None), real=True)


def fat_bump_symbol(N, c=1.0):
    return BilinearSymbol(
        lambda x1, x2: c * spectral.psi_fat(np.sqrt(_norm2(x1)) / N),
        name=f"psi_fat({N})",
        support=(2.2 * N, None),
        real=True,
        breaks={"r1": [c * N for c in (0.25, 0.275, 2.0, 2.2)], "r2": [], "a01": [], "a02": [], "min_angle": math.pi / 16, "min_radius": 0.025 * N},
    )


BUILTIN_SYMBOLS = {
    "gaussian": gaussian_symbol,
    "fat_bump": lambda: fat_bump_symbol(1.0),
    "B": lambda: BilinearSymbol(
        lambda x1, x2: B_symbol(x1, x2) * spectral.psi_fat(np.sqrt(_norm2(x1))) * spectral.psi_fat(np.sqrt(_norm2(x2))),
        name="B localized at (1, 1)",
        support=(2.2, 2.2),
        real=True,
    ),
}
