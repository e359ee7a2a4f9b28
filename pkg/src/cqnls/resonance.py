"""Space-time resonance atlas: phases, region cutoffs and multiplier audits.

For a quadratic interaction with inputs at frequencies xi1, xi2 and output
xi = xi1 + xi2 the three phases are

    conj2:  Phi = H(xi) + H(xi1) + H(xi2)
    plain2: Phi = H(xi) - H(xi1) - H(xi2)
    mixed:  Phi = H(xi) + H(xi2) - H(xi1)

``grad_xi`` differentiates in xi with xi2 held fixed (so xi1 moves with xi);
``grad_xi2`` differentiates in xi2 with xi held fixed.

Region cutoffs are smooth steps in the relevant angle, in place of spherical
partitions of unity built from separated point sets.  Their thresholds live in a
:class:`Thresholds` record: ``sep`` is the angular separation scale and
``narrow`` the small-angle width.  ``STRICT`` keeps the thin reference widths and
is the default; ``DESK`` is a coarser preset for quick interactive looks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bilinear, spectral
from .bilinear import BilinearSymbol
from .errors import UnsupportedDyad, ZeroFrequency

PHASES = ("conj2", "plain2", "mixed")


@dataclass(frozen=True)
class Thresholds:
    sep: float = 1e-6
    narrow: float = 1e-4


STRICT = Thresholds()
DESK = Thresholds(sep=1e-3, narrow=2e-2)


# --- radial profile of H ---------------------------------------------------------------


def h(r):
    r = np.asarray(r, dtype=float)
    return r * np.sqrt(2.0 + r * r)


def h1(r):
    r = np.asarray(r, dtype=float)
    return (2.0 + 2.0 * r * r) / np.sqrt(2.0 + r * r)


def h2(r):
    r = np.asarray(r, dtype=float)
    return r * (6.0 + 2.0 * r * r) / (2.0 + r * r) ** 1.5


def h3(r):
    r = np.asarray(r, dtype=float)
    return 12.0 / (2.0 + r * r) ** 2.5


def h4(r):
    r = np.asarray(r, dtype=float)
    return -60.0 * r / (2.0 + r * r) ** 3.5


H_DERIVATIVES = (h, h1, h2, h3, h4)


def bracket(r):
    return np.sqrt(2.0 + np.asarray(r, dtype=float) ** 2)


def h_derivative_audit(radii=None):
    """Two-sided ratio bands of h^(k) against the radial comparators.

    Returns ``{k: (min ratio, max ratio)}`` with comparators <r>, r/<r>,
    <r>^-5, r <r>^-7 for k = 1..4, plus the worst relative disagreement of the
    closed forms with central finite differences of the previous derivative.
    """
    if radii is None:
        radii = np.logspace(-3, 3, 601)
    r = np.asarray(radii, dtype=float)
    b = bracket(r)
    comps = {1: b, 2: r / b, 3: b**-5, 4: r * b**-7}
    out = {}
    for k, c in comps.items():
        ratio = np.abs(H_DERIVATIVES[k](r)) / c
        out[k] = (float(ratio.min()), float(ratio.max()))
    fd_err = 0.0
    for k in range(1, 5):
        step = 1e-5 * np.maximum(r, 1.0)
        fd = (H_DERIVATIVES[k - 1](r + step) - H_DERIVATIVES[k - 1](r - step)) / (2 * step)
        exact = H_DERIVATIVES[k](r)
        scale = np.maximum(np.abs(exact), np.abs(H_DERIVATIVES[k - 1](r)) / np.maximum(r, 1.0) * 1e-3)
        fd_err = max(fd_err, float(np.max(np.abs(fd - exact) / scale)))
    out["fd_rel_err"] = fd_err
    return out


def _norm(x):
    return np.sqrt(np.sum(x * x, axis=-1))


def _dot(x, y):
    return np.sum(x * y, axis=-1)


def H(x):
    return h(_norm(x))


def grad_H(x):
    r = _norm(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        fac = np.where(r > 0, h1(r) / np.where(r > 0, r, 1.0), 0.0)
    return fac[..., None] * x


def hessian_H(x):
    """Hessian of H at x (shape (..., d, d)), x != 0."""
    r = _norm(x)
    d = x.shape[-1]
    u = x / r[..., None]
    P = u[..., :, None] * u[..., None, :]
    I = np.eye(d)
    return h2(r)[..., None, None] * P + (h1(r) / r)[..., None, None] * (I - P)


# --- phases -------------------------------------------------------------------------------


def _check_kind(kind):
    if kind not in PHASES:
        raise ValueError(f"unknown phase kind {kind!r}; expected one of {PHASES}")


def phase(kind, x1, x2):
    _check_kind(kind)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    x = x1 + x2
    if kind == "conj2":
        return H(x) + H(x1) + H(x2)
    if kind == "plain2":
        return H(x) - H(x1) - H(x2)
    return H(x) + H(x2) - H(x1)


def _raw_gradients(kind, x1, x2):
    x = x1 + x2
    gx, g1, g2 = grad_H(x), grad_H(x1), grad_H(x2)
    if kind == "conj2":
        return gx + g1, g2 - g1
    if kind == "plain2":
        return gx - g1, g1 - g2
    return gx - g1, g2 + g1


def perp(x, y):
    """x^{perp_y} = x - (x . y/|y|) y/|y|."""
    ny2 = np.sum(y * y, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(ny2 > 0, _dot(x, y) / np.where(ny2 > 0, ny2, 1.0), 0.0)
    return x - c[..., None] * y


def phase_gradients(kind, x1, x2):
    """grad_xi Phi, grad_xi2 Phi and the angular derivative xi^{perp_2} . grad_xi2 Phi."""
    _check_kind(kind)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if np.any(_norm(x1) == 0) or np.any(_norm(x2) == 0):
        raise ZeroFrequency("phase gradients need xi1 != 0 and xi2 != 0")
    gxi, g2 = _raw_gradients(kind, x1, x2)
    ang = _dot(perp(x1 + x2, x2), g2)
    return {"grad_xi": gxi, "grad_xi2": g2, "angular": ang}


def angular_denominator(x1, x2):
    """xi^{perp_2} . grad H(xi1)."""
    return _dot(perp(x1 + x2, x2), grad_H(x1))


def dh_difference_ratio(x, y, sign=+1):
    """|grad H(x) + sign grad H(y)| over the gradient-difference comparator."""
    lhs = _norm(grad_H(x) + sign * grad_H(y))
    nx, ny = _norm(x), _norm(y)
    bx, by = bracket(nx), bracket(ny)
    ang = angle_between(x, -sign * y)
    rhs = np.abs(nx - ny) * np.maximum(nx / bx, ny / by) + np.minimum(bx, by) * np.sin(0.5 * ang)
    return lhs / rhs


# --- cutoff primitives ----------------------------------------------------------------------


def angle_between(x, y):
    """Angle in [0, pi] between x and y, accurate near 0 and pi."""
    cr = np.cross(x, y) if x.shape[-1] == 3 else np.zeros(x.shape[:-1] + (1,))
    return np.arctan2(_norm(cr), _dot(x, y))


def angle_at_least(theta, lo, hi):
    """Smooth step in the angle: 0 for theta <= lo, 1 for theta >= hi.

    The step is flat to all orders at both ends, so a transition that touches
    theta = 0 or pi still gives a smooth function of the frequencies.
    """
    lo = min(max(lo, 0.0), math.pi)
    hi = min(max(hi, 0.0), math.pi)
    if hi <= lo:
        return np.where(theta >= hi, 1.0, 0.0)
    return spectral.smooth_step((theta - lo) / (hi - lo))


def angle_at_most(theta, lo, hi):
    """Smooth step: 1 for theta <= lo, 0 for theta >= hi."""
    return 1.0 - angle_at_least(theta, lo, hi)


def _fold(theta):
    """Distance of theta from the nearer of 0 and pi."""
    return np.minimum(theta, math.pi - theta)


def fat(x, N):
    return spectral.psi_fat(_norm(x) / N)


def fat_support_radius(N):
    return 2.2 * N


# --- region families --------------------------------------------------------------------------


@dataclass
class Region:
    index: int
    kind: str  # time, space or angular
    rho: object
    bounds: dict  # multiplier name -> claimed bound value
    denominator_comparator: object = None  # callable (x1, x2) -> comparator, or None
    note: str = ""


@dataclass
class RegionFamily:
    phase: str
    N1: float
    N2: float
    regions: list
    omitted: list = field(default_factory=list)
    thresholds: Thresholds = STRICT
    C: float | None = None
    # cutoff transitions as (angle, theta_lo, theta_hi) with angle "01" or "02"
    angles: list = field(default_factory=list)
    # radial transitions beyond the fattened annuli, as (input, radius), input 1 or 2
    radii: list = field(default_factory=list)

    def breaks(self):
        """Feature geometry for the axial op-norm estimator."""
        fat_r = (0.25, 0.275, 2.0, 2.2)
        out = {
            "r1": [c * self.N1 for c in fat_r] + [r for j, r in self.radii if j == 1],
            "r2": [c * self.N2 for c in fat_r] + [r for j, r in self.radii if j == 2],
            "a01": [],
            "a02": [],
        }
        widths = [0.025]
        for which, lo, hi in self.angles:
            key = "a" + which
            for a in (lo, hi):
                if 0.0 < a < math.pi:
                    out[key].append(a)
            if hi > lo:
                widths.append(hi - lo)
        out["min_angle"] = min(widths)
        out["min_radius"] = 0.025 * min(self.N1, self.N2)
        return out

    def weight(self, x1, x2):
        return fat(x1, self.N1) * fat(x2, self.N2)

    def partition_sum(self, x1, x2):
        return sum(r.rho(x1, x2) for r in self.regions)


def _jb(N):
    return math.sqrt(2.0 + N * N)


def _conj2_family(N1, N2, th):
    reg = Region(
        1,
        "time",
        lambda x1, x2: np.ones(np.shape(x1)[:-1]),
        {"bT": 1.0 / max(N1, N2)},
        lambda x1, x2: np.full(np.shape(x1)[:-1], max(N1 * _jb(N1), N2 * _jb(N2))),
    )
    return RegionFamily("conj2", N1, N2, [reg], thresholds=th)


def _plain2_family(N1, N2, th):
    if N2 > N1:
        raise UnsupportedDyad("the v^2 decomposition is stated for N2 <= N1; swap the inputs")
    s = th.sep
    a = th.narrow * N1 / _jb(N1)
    s3 = s * N1 / _jb(N1)

    def chi1(x1, x2):
        return spectral.phi_bump(8.0 * _norm(x1 + x2) / N1) * fat(x2, N1) * spectral.psi_annulus(_norm(x1) / N1)

    def chi2(x1, x2):
        return angle_at_least(angle_between(x1 + x2, x1), 2 * math.pi / 3, 2 * math.pi / 3 + 8 * s)

    def chi3(x1, x2):
        return angle_at_most(_fold(angle_between(x1 + x2, x2)), max(a - 8 * s3, 0.0), a)

    def rho1(x1, x2):
        return chi1(x1, x2)

    def rho2(x1, x2):
        return (1 - chi1(x1, x2)) * chi2(x1, x2)

    def rho3(x1, x2):
        return (1 - chi1(x1, x2)) * (1 - chi2(x1, x2)) * chi3(x1, x2)

    def rho4(x1, x2):
        return (1 - chi1(x1, x2)) * (1 - chi2(x1, x2)) * (1 - chi3(x1, x2))

    bt = N1**-1.5 if N1 <= 1 else 1.0 / N1
    bx = (_jb(N1) / N1) ** 0.51 * N2 / _jb(N2)
    tbx = (_jb(N1) / N1) ** 1.5 / _jb(N2)
    far = N1 >= 1 and N1 >= 8 * N2
    if far:
        bx = min(bx, N2 / N1)
        tbx = min(tbx, 1.0 / N1)
    regions = [
        Region(1, "time", rho1, {"bT": 1.0 / N1}, lambda x1, x2: np.full(np.shape(x1)[:-1], N1 * _jb(N1))),
        Region(2, "time", rho2, {"bT": bt}),
        Region(3, "time", rho3, {"bT": bt}),
        Region(
            4,
            "space",
            rho4,
            {"bX": bx, "tbX": tbx},
            lambda x1, x2: np.full(np.shape(x1)[:-1], N1 if far else N1 * _jb(N2) / _jb(N1)),
        ),
    ]
    angles = [("01", 2 * math.pi / 3, 2 * math.pi / 3 + 8 * s)]
    lo3 = max(a - 8 * s3, 0.0)
    angles += [("02", lo3, a), ("02", math.pi - a, math.pi - lo3)]
    radii = [(1, c * N1) for c in (0.5, 0.55, 1.0, 1.1)] + [(2, c * N1) for c in (0.25, 0.275, 2.0, 2.2)]
    return RegionFamily("plain2", N1, N2, regions, thresholds=th, angles=angles, radii=radii)


def _mixed_family(N1, N2, th, C):
    s = th.sep
    regions = []
    omitted = []
    ones = lambda x1, x2: np.ones(np.shape(x1)[:-1])  # noqa: E731
    if N1 <= N2 / 64.0:
        regions.append(
            Region(1, "time", ones, {"bT": 1.0 / N2}, lambda x1, x2: np.full(np.shape(x1)[:-1], N2 * _jb(N2)))
        )
        omitted += [(j, "region 1 covers N1 <= N2/64") for j in range(2, 9)]
        return RegionFamily("mixed", N1, N2, regions, omitted, th, C)
    omitted.append((1, "needs N1 <= N2/64"))

    def chi2(x1, x2):
        return angle_at_least(angle_between(x1 + x2, x1), 2 * math.pi / 3, 2 * math.pi / 3 + 8 * s)

    def chi3(x1, x2):
        return angle_at_most(_fold(angle_between(x1 + x2, x2)), math.pi / 3, math.pi / 3 + 8 * s)

    a6 = max(math.pi / 2, math.pi - 2 * th.narrow * N1)
    s6 = s * N1

    def chi6(x1, x2):
        return angle_at_least(angle_between(x1 + x2, x2), a6, min(a6 + 8 * s6, math.pi))

    a7 = min(math.pi / 6, 2 * th.narrow * N1)

    def chi7(x1, x2):
        return angle_at_most(angle_between(x1 + x2, x2), max(a7 - 8 * s6, 0.0), a7)

    regions.append(Region(2, "time", chi2, {"bT": 1.0}))
    if C <= N1 <= 64 * N2:
        regions.append(Region(3, "time", lambda x1, x2: (1 - chi2(x1, x2)) * chi3(x1, x2), {"bT": 1.0}))
        regions.append(
            Region(
                4,
                "angular",
                lambda x1, x2: (1 - chi2(x1, x2)) * (1 - chi3(x1, x2)),
                {"b_ang": 1.0, "b1_ang": 1.0, "b2_ang": 1.0, "tb_ang": 1.0},
                lambda x1, x2: _norm(x1 + x2) ** 2,
            )
        )
    else:
        omitted += [(3, "needs C <= N1 <= 64 N2"), (4, "needs C <= N1 <= 64 N2")]
    if N1 >= C and N2 < N1 / 64.0:
        regions.append(Region(5, "space", lambda x1, x2: 1 - chi2(x1, x2), {"bX": N2 / N1, "tbX": 1.0 / N1}))
    else:
        omitted.append((5, "needs N1 >= C and N2 < N1/64"))
    if N2 / 32.0 <= N1 < C:
        regions.append(
            Region(6, "time", lambda x1, x2: (1 - chi2(x1, x2)) * chi6(x1, x2), {"bT": 1.0 / (N1 * math.sqrt(N2))})
        )
        regions.append(
            Region(
                7,
                "space",
                lambda x1, x2: (1 - chi2(x1, x2)) * (1 - chi6(x1, x2)) * chi7(x1, x2),
                {"bX": N2 / math.sqrt(N1), "tbX": N1**-1.5},
            )
        )
        regions.append(
            Region(
                8,
                "space",
                lambda x1, x2: (1 - chi2(x1, x2)) * (1 - chi6(x1, x2)) * (1 - chi7(x1, x2)),
                {"bX": 1.0 / math.sqrt(N1), "tbX": 1.0 / (math.sqrt(N1) * N2)},
            )
        )
    else:
        omitted += [(j, "needs N2/32 <= N1 < C") for j in (6, 7, 8)]
    if not regions:
        raise UnsupportedDyad(f"no mixed region applies at ({N1}, {N2})")
    indices = {r.index for r in regions}
    angles = [("01", 2 * math.pi / 3, 2 * math.pi / 3 + 8 * s)]
    if 3 in indices:
        angles += [("02", math.pi / 3, math.pi / 3 + 8 * s), ("02", 2 * math.pi / 3 - 8 * s, 2 * math.pi / 3)]
    if 6 in indices:
        angles += [("02", a6, min(a6 + 8 * s6, math.pi)), ("02", max(a7 - 8 * s6, 0.0), a7)]
    return RegionFamily("mixed", N1, N2, regions, omitted, th, C, angles=angles)


def region3_lower_bound_holds(C, thresholds=STRICT, n=100_000, seed=0):
    """Does |Phi| >= |xi||xi2|/2 hold on sampled mixed Region-3 support at scales >= C?"""
    rng = np.random.default_rng(seed)
    n = max(n // 6, 1)
    for N1 in (C, 2 * C):
        for N2 in (N1 / 2, N1, 2 * N1):
            fam = _mixed_family(N1, N2, thresholds, C)
            reg = [r for r in fam.regions if r.index == 3]
            if not reg:
                continue
            x1, x2 = support_samples(N1, N2, n, rng)
            w = fam.weight(x1, x2) * reg[0].rho(x1, x2)
            sel = w > 0
            if not sel.any():
                continue
            phi = np.abs(phase("mixed", x1[sel], x2[sel]))
            lb = 0.5 * _norm(x1[sel] + x2[sel]) * _norm(x2[sel])
            if np.any(phi < lb):
                return False
    return True


def default_mixed_C(thresholds=STRICT, candidates=None):
    """Smallest power of two C for which the Region-3 lower bound holds on samples."""
    if candidates is None:
        candidates = [2.0**j for j in range(-3, 9)]
    for C in candidates:
        if region3_lower_bound_holds(C, thresholds):
            return C
    return candidates[-1]


_C_CACHE = {}


def build_region_family(kind, N1, N2, thresholds=STRICT, C=None):
    _check_kind(kind)
    for N in (N1, N2):
        if not spectral.is_dyadic(N):
            raise UnsupportedDyad(f"{N} is not a power of two")
    if kind == "conj2":
        return _conj2_family(N1, N2, thresholds)
    if kind == "plain2":
        return _plain2_family(N1, N2, thresholds)
    if C is None:
        if thresholds not in _C_CACHE:
            _C_CACHE[thresholds] = default_mixed_C(thresholds)
        C = _C_CACHE[thresholds]
    return _mixed_family(N1, N2, thresholds, C)


# --- sampling -------------------------------------------------------------------------------------


def _random_dirs(n, rng, d=3):
    u = rng.normal(size=(n, d))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def support_samples(N1, N2, n, rng, d=3):
    """Pairs with |xi_j| in the open fattened annulus (N_j/4, 11 N_j/5)."""
    r1 = N1 * np.exp(rng.uniform(math.log(0.25), math.log(2.2), size=n))
    r2 = N2 * np.exp(rng.uniform(math.log(0.25), math.log(2.2), size=n))
    return _random_dirs(n, rng, d) * r1[:, None], _random_dirs(n, rng, d) * r2[:, None]


def boundary_samples(family, n, rng, pool=8):
    """Samples where some region cutoff is strictly between 0 and 1."""
    x1, x2 = support_samples(family.N1, family.N2, pool * n, rng)
    trans = np.zeros(x1.shape[0], dtype=bool)
    for r in family.regions:
        v = r.rho(x1, x2)
        trans |= (v > 0) & (v < 1)
    idx = np.nonzero(trans)[0][:n]
    return x1[idx], x2[idx]


def _annulus_radii(N, n, rng):
    return N * np.exp(rng.uniform(math.log(0.25), math.log(2.2), size=n))


def cone_samples(family, n, rng):
    """Pairs whose output direction sits in or next to each angular cutoff transition.

    Uniform sampling almost never lands in a cone of half-width 1e-4, so for
    every declared transition (angle, lo, hi) the angle between xi and the
    named input is drawn from the transition widened by four widths on each
    side, and, for a narrow cone at 0 or pi, from the whole cone as well.  The
    output length then follows from the other input's sampled radius.
    """
    if not family.angles:
        z = np.zeros((0, 3))
        return z, z
    per = max(n // (2 * len(family.angles)), 1)
    out1, out2 = [], []
    for which, lo, hi in family.angles:
        w = max(hi - lo, 1e-15)
        draws = [rng.uniform(max(lo - 4 * w, 0.0), min(hi + 4 * w, math.pi), size=per)]
        if hi < 0.01:
            draws.append(rng.uniform(0.0, hi, size=per))
        if lo > math.pi - 0.01:
            draws.append(rng.uniform(lo, math.pi, size=per))
        theta = np.concatenate(draws)
        m = theta.size
        Na, Nb = (family.N1, family.N2) if which == "01" else (family.N2, family.N1)
        ra = _annulus_radii(Na, m, rng)
        rb = _annulus_radii(Nb, m, rng)
        ua = _random_dirs(m, rng)
        # a unit vector at angle theta from ua
        t = _random_dirs(m, rng)
        t = t - _dot(t, ua)[:, None] * ua
        t = t / np.linalg.norm(t, axis=1, keepdims=True)
        e = np.cos(theta)[:, None] * ua + np.sin(theta)[:, None] * t
        # |xi - xa| = rb with xi = s e: s^2 - 2 s ra cos(theta) + ra^2 = rb^2
        disc = rb**2 - (ra * np.sin(theta)) ** 2
        ok = disc >= 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        root = ra * np.cos(theta) + np.where(rng.random(m) < 0.5, sq, -sq)
        ok &= root > 0
        xa = ra[ok, None] * ua[ok]
        xi = root[ok, None] * e[ok]
        xb = xi - xa
        if which == "01":
            out1.append(xa)
            out2.append(xb)
        else:
            out1.append(xb)
            out2.append(xa)
    return np.concatenate(out1), np.concatenate(out2)


# --- multipliers -------------------------------------------------------------------------------


def _masked(weight, body, x1, x2, tail_shape):
    """weight * body, evaluating body only where weight != 0."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    x1, x2 = np.broadcast_arrays(x1, x2)
    lead = x1.shape[:-1]
    f1 = x1.reshape(-1, x1.shape[-1])
    f2 = x2.reshape(-1, x2.shape[-1])
    w = np.asarray(weight(f1, f2), dtype=float).reshape(-1)
    out = np.zeros((f1.shape[0],) + tail_shape)
    nz = np.nonzero(w)[0]
    if nz.size:
        vals = body(f1[nz], f2[nz])
        out[nz] = w[nz].reshape((-1,) + (1,) * len(tail_shape)) * vals
    return out.reshape(lead + tail_shape)


def _divergence_xi2(F, x1, x2, step):
    """sum_j d/d(xi2_j) F[..., i, j] at fixed xi = xi1 + xi2 (central differences)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    x1, x2 = np.broadcast_arrays(x1, x2)
    d = x1.shape[-1]
    out = 0.0
    for j in range(d):
        e = np.zeros(d)
        e[j] = step
        Fp = F(x1 - e, x2 + e)[..., :, j]
        Fm = F(x1 + e, x2 - e)[..., :, j]
        out = out + (Fp - Fm) / (2 * step)
    return out


def multipliers(family, region, A):
    """The non-resonant symbols of one region, as BilinearSymbols keyed by name."""
    N1, N2 = family.N1, family.N2
    kind = family.phase
    support = (fat_support_radius(N1), fat_support_radius(N2))
    br = family.breaks()
    br["weight"] = lambda x1, x2: region.rho(x1, x2) * fat(x1, N1) * fat(x2, N2)
    step = 2.5e-3 * br["min_angle"] * N2

    def weight(x1, x2):
        return region.rho(x1, x2) * fat(x1, N1) * fat(x2, N2)

    def common(x1, x2):
        x = x1 + x2
        return A(x1, x2) * spectral.U_symbol(_norm(x))

    out = {}
    if region.kind == "time":

        def bT_body(x1, x2):
            gxi, _ = _raw_gradients(kind, x1, x2)
            phi = phase(kind, x1, x2)
            with np.errstate(divide="ignore", invalid="ignore"):
                val = (common(x1, x2) / phi)[:, None] * gxi
            return np.where(np.isfinite(val), val, 0.0)

        out["bT"] = BilinearSymbol(lambda x1, x2: _masked(weight, bT_body, x1, x2, (3,)), name="bT", support=support, breaks=br)
    elif region.kind == "space":

        def bX_body(x1, x2):
            gxi, g2 = _raw_gradients(kind, x1, x2)
            den = np.sum(g2 * g2, axis=-1)
            return (common(x1, x2) / den)[:, None, None] * gxi[:, :, None] * g2[:, None, :]

        def bX(x1, x2):
            return _masked(weight, bX_body, x1, x2, (3, 3))

        out["bX"] = BilinearSymbol(bX, name="bX", support=support, breaks=br)
        out["tbX"] = BilinearSymbol(lambda x1, x2: _divergence_xi2(bX, x1, x2, step), name="tbX", support=support, breaks=br)
    else:

        def m_body(x1, x2):
            gxi, _ = _raw_gradients(kind, x1, x2)
            den = angular_denominator(x1, x2)
            with np.errstate(divide="ignore", invalid="ignore"):
                val = (common(x1, x2) / den)[:, None] * gxi
            return np.where(np.isfinite(val), val, 0.0)

        def m_perp(x1, x2):
            def body(a, b):
                return m_body(a, b)[:, :, None] * perp(a + b, b)[:, None, :]

            return _masked(weight, body, x1, x2, (3, 3))

        def b_j(j):
            def body(x1, x2):
                xj = x1 if j == 1 else x2
                cr = np.cross(xj, x1 + x2) / np.sum(xj * xj, axis=-1)[:, None]
                return m_body(x1, x2)[:, :, None] * cr[:, None, :]

            return lambda x1, x2: _masked(weight, body, x1, x2, (3, 3))

        def tb_body(x1, x2):
            x = x1 + x2
            u1 = x1 / _norm(x1)[:, None]
            u2 = x2 / _norm(x2)[:, None]
            vec = _dot(x, u1)[:, None] * u1 - _dot(x, u2)[:, None] * u2
            return m_body(x1, x2)[:, :, None] * vec[:, None, :]

        out["b_ang"] = BilinearSymbol(lambda x1, x2: _divergence_xi2(m_perp, x1, x2, step), name="b_ang", support=support, breaks=br)
        out["b1_ang"] = BilinearSymbol(b_j(1), name="b1_ang", support=support, breaks=br)
        out["b2_ang"] = BilinearSymbol(b_j(2), name="b2_ang", support=support, breaks=br)
        out["tb_ang"] = BilinearSymbol(lambda x1, x2: _masked(weight, tb_body, x1, x2, (3, 3)), name="tb_ang", support=support, breaks=br)
    return out


# --- audits ---------------------------------------------------------------------------------------


def denominator_values(family, region, x1, x2):
    """The quantity whose non-vanishing defines the region type."""
    if region.kind == "time":
        return np.abs(phase(family.phase, x1, x2))
    _, g2 = _raw_gradients(family.phase, x1, x2)
    if region.kind == "space":
        return _norm(g2)
    return np.abs(angular_denominator(x1, x2))


@dataclass
class RegionAudit:
    phase: str
    N1: float
    N2: float
    region: int
    kind: str
    samples: int
    min_denominator: float
    min_ratio_to_comparator: float | None
    opnorms: dict
    claimed: dict
    ratios: dict

    def as_dict(self):
        return dict(self.__dict__)


def sample_denominators(family, n=100_000, seed=0):
    """Per region: (sample count, min denominator, min denominator / comparator)."""
    rng = np.random.default_rng(seed)
    x1, x2 = support_samples(family.N1, family.N2, n, rng)
    b1, b2 = boundary_samples(family, n // 10, rng)
    c1, c2 = cone_samples(family, n // 10, rng)
    x1 = np.concatenate([x1, b1, c1])
    x2 = np.concatenate([x2, b2, c2])
    w = family.weight(x1, x2)
    out = {}
    for r in family.regions:
        sel = (w * r.rho(x1, x2)) > 0
        if not sel.any():
            out[r.index] = (0, math.inf, None)
            continue
        den = denominator_values(family, r, x1[sel], x2[sel])
        ratio = None
        if r.denominator_comparator is not None:
            ratio = float(np.min(den / r.denominator_comparator(x1[sel], x2[sel])))
        out[r.index] = (int(sel.sum()), float(den.min()), ratio)
    return out


def partition_residual(family, n=100_000, seed=0):
    rng = np.random.default_rng(seed)
    x1, x2 = support_samples(family.N1, family.N2, n, rng)
    return float(np.max(np.abs(family.partition_sum(x1, x2) - 1.0)))


def audit_family(family, A, n_samples=100_000, seed=0, opnorm=True, **op_kw):
    dens = sample_denominators(family, n_samples, seed)
    rows = []
    for r in family.regions:
        count, dmin, cmin = dens[r.index]
        ops, ratios = {}, {}
        if opnorm:
            for name, sym in multipliers(family, r, A).items():
                rep = bilinear.opnorm_axial(sym, **op_kw)
                ops[name] = rep.value
                ratios[name] = rep.value / r.bounds[name]
        rows.append(
            RegionAudit(family.phase, family.N1, family.N2, r.index, r.kind, count, dmin, cmin, ops, dict(r.bounds), ratios)
        )
    return rows


FAST_DYADS = (0.125, 0.5, 2.0, 8.0)
FULL_DYADS = tuple(2.0**j for j in range(-3, 4))


def dyad_pairs(kind, dyads):
    pairs = [(a, b) for a in dyads for b in dyads]
    if kind == "plain2":
        pairs = [(a, b) for a, b in pairs if b <= a]
    return pairs


@dataclass
class AuditReport:
    phase: str
    rows: list
    thresholds: Thresholds
    C: float | None = None

    def stability(self):
        """Per (region, multiplier): (max ratio / min ratio, min ratio, max ratio, count)."""
        groups = {}
        for row in self.rows:
            for name, val in row.ratios.items():
                groups.setdefault((row.region, name), []).append(val)
        out = {}
        for key, vals in groups.items():
            vals = [v for v in vals if v > 0]
            if vals:
                out[key] = (max(vals) / min(vals), min(vals), max(vals), len(vals))
        return out


def audit_bounds(kind, dyads=FAST_DYADS, A=None, beta=2.0, thresholds=STRICT, n_samples=100_000, seed=0, opnorm=True, **op_kw):
    if A is None:
        A = bilinear.A1_symbol(beta)
    rows = []
    C = None
    for N1, N2 in dyad_pairs(kind, dyads):
        fam = build_region_family(kind, N1, N2, thresholds)
        C = fam.C
        rows += audit_family(fam, A, n_samples=n_samples, seed=seed, opnorm=opnorm, **op_kw)
    return AuditReport(kind, rows, thresholds, C)
