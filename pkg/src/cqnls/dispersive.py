"""Linear dispersion of e^{-itH} in three dimensions, free of box-size limits.

For radial data with Fourier profile f(rho), using the unitary transform
f(x) = (2 pi)^{-3/2} int e^{i x.xi} f^(xi) d xi, the propagated solution is

    u(t, r) = (2 pi)^{-3/2} (4 pi / r) int_0^inf e^{-i t h(rho)} sin(rho r) f(rho) rho d rho,

with h(rho) = rho sqrt(2 + rho^2).  The integral is evaluated with
Gauss-Legendre panels whose width keeps the phase change per panel below a
quarter radian, and panels are doubled until two successive answers agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import spectral
from .errors import DyadicOutOfRange, UnresolvedOscillation, ZeroFrequency
from .resonance import h, h1

RADIAL_CONST = (2.0 * math.pi) ** -1.5 * 4.0 * math.pi


@dataclass(frozen=True)
class RadialProfile:
    """A radial Fourier profile f(rho) supported in [rho_min, rho_max]."""

    func: object
    rho_min: float
    rho_max: float
    name: str = "profile"

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        return np.where((rho >= self.rho_min) & (rho <= self.rho_max), self.func(rho), 0.0)

    def __add__(self, other):
        return RadialProfile(
            lambda r: self.func(r) * ((r >= self.rho_min) & (r <= self.rho_max))
            + other.func(r) * ((r >= other.rho_min) & (r <= other.rho_max)),
            min(self.rho_min, other.rho_min),
            max(self.rho_max, other.rho_max),
            f"{self.name}+{other.name}",
        )


def lp_profile(N):
    """The annular Littlewood-Paley bump psi(rho / N), supported in [N/2, 11N/10]."""
    return RadialProfile(lambda r: spectral.psi_annulus(r / N), 0.5 * N, 1.1 * N, f"psi({N})")


def gaussian_profile(a=1.0, rho_max=None):
    """exp(-a rho^2), truncated where it is below 1e-28."""
    if rho_max is None:
        rho_max = math.sqrt(64.0 / a)
    return RadialProfile(lambda r: np.exp(-a * r * r), 0.0, rho_max, f"gauss({a})")


def _nodes(p, n_panels, n_gl):
    gx, gw = np.polynomial.legendre.leggauss(n_gl)
    edges = np.linspace(p.rho_min, p.rho_max, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    rho = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    w = (half[:, None] * gw[None, :]).ravel()
    return rho, w


def _evaluate(p, t, r, n_panels, n_gl, chunk):
    rho, w = _nodes(p, n_panels, n_gl)
    amp = np.exp(-1j * t * h(rho)) * p(rho) * rho * w
    out = np.empty(r.size, dtype=complex)
    step = max(1, chunk // max(rho.size, 1))
    for a in range(0, r.size, step):
        rr = r[a : a + step]
        # sin(rho r) / r, continuous at r = 0
        kern = rho[None, :] * np.sinc(np.outer(rr, rho) / math.pi)
        out[a : a + step] = kern @ amp
    return RADIAL_CONST * out


def required_panels(p, t, r_max, rate_cap=0.25):
    rate = abs(t) * float(h1(p.rho_max)) + r_max
    return max(32, int(math.ceil((p.rho_max - p.rho_min) * rate / rate_cap)))


def radial_propagate(p, t, r, tol=1e-8, n_gl=8, max_nodes=4_000_000, max_doublings=8, chunk=2**22):
    """u(t, r) for the radial profile ``p``; r may be an array."""
    if t < 0:
        raise ValueError("radial_propagate takes t >= 0; use conjugation for negative times")
    r = np.atleast_1d(np.asarray(r, dtype=float))
    r_max = float(np.max(np.abs(r))) if r.size else 0.0
    n = required_panels(p, t, r_max)
    if 2 * n * n_gl > max_nodes:
        raise UnresolvedOscillation(
            f"resolving t={t}, r_max={r_max} needs {2 * n * n_gl} nodes, above the budget {max_nodes}"
        )
    prev = _evaluate(p, t, r, n, n_gl, chunk)
    for _ in range(max_doublings):
        n *= 2
        if n * n_gl > max_nodes:
            break
        cur = _evaluate(p, t, r, n, n_gl, chunk)
        scale = max(float(np.max(np.abs(cur))), 1e-300)
        if float(np.max(np.abs(cur - prev))) <= tol * scale:
            return cur
        prev = cur
    raise UnresolvedOscillation(f"panel doubling did not reach tolerance {tol} at t={t}")


def radial_l2(p, t, r_max, n_r=4000):
    """(int |u(t, r)|^2 4 pi r^2 dr)^(1/2) by Gauss-Legendre in r."""
    gx, gw = np.polynomial.legendre.leggauss(16)
    panels = max(1, n_r // 16)
    edges = np.linspace(0.0, r_max, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    r = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    w = (half[:, None] * gw[None, :]).ravel()
    u = radial_propagate(p, t, r)
    return math.sqrt(float(np.sum(4.0 * math.pi * r * r * w * np.abs(u) ** 2)))


def profile_l2(p):
    """Plancherel: ||f||_2 = (int |f(rho)|^2 4 pi rho^2 drho)^(1/2)."""
    rho, w = _nodes(p, 256, 16)
    return math.sqrt(float(np.sum(4.0 * math.pi * rho * rho * w * np.abs(p(rho)) ** 2)))


def grid_coefficients(grid, p):
    """Fourier-series coefficients of the radial function with profile p on a 3D grid."""
    return (2.0 * math.pi) ** -1.5 * (2.0 * math.pi / grid.L) ** 3 * p(grid.xi_abs)


def grid_propagate(grid, p, t):
    """The same evolution on a periodic grid, for cross-checks at small t."""
    c = grid_coefficients(grid, p) * np.exp(-1j * t * grid.H)
    return spectral.to_physical(grid, c)


# --- sup-norm decay --------------------------------------------------------------------------


def sup_norm(p, t, n_coarse=400, n_fine=64, r_max=None):
    """max_r |u(t, r)|: coarse scan, then local refinement around the best cells."""
    if r_max is None:
        r_max = t * float(h1(p.rho_max)) * 1.1 + 40.0 / max(p.rho_max, 1e-3)
    rc = np.linspace(0.0, r_max, n_coarse)
    uc = np.abs(radial_propagate(p, t, rc))
    order = np.argsort(uc)[::-1][:3]
    dr = rc[1] - rc[0]
    best_val, best_r = float(uc[order[0]]), float(rc[order[0]])
    for i in order:
        rf = np.linspace(max(rc[i] - dr, 0.0), rc[i] + dr, n_fine)
        uf = np.abs(radial_propagate(p, t, rf))
        j = int(np.argmax(uf))
        if uf[j] > best_val:
            best_val, best_r = float(uf[j]), float(rf[j])
    return best_val, best_r


def kernel_l1(p, r_max=None, n_r=20000):
    """||f||_1 in physical space, from the t = 0 radial transform."""
    if r_max is None:
        r_max = 400.0 / max(p.rho_max, 1e-3)
    gx, gw = np.polynomial.legendre.leggauss(16)
    panels = max(1, n_r // 16)
    edges = np.linspace(0.0, r_max, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    r = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
    w = (half[:, None] * gw[None, :]).ravel()
    u = radial_propagate(p, 0.0, r, max_nodes=4_000_000)
    return float(np.sum(4.0 * math.pi * r * r * w * np.abs(u)))


def envelope(N, t):
    t = np.asarray(t, dtype=float)
    return np.minimum(np.minimum(N**3, N**2 / t), N**0.5 * t**-1.5)


def fit_slope(times, values, window):
    lo, hi = window
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    sel = (times >= lo) & (times <= hi)
    if sel.sum() < 3:
        return None
    return float(np.polyfit(np.log(times[sel]), np.log(values[sel]), 1)[0])


@dataclass
class DecayReport:
    N: float
    times: np.ndarray
    sup: np.ndarray
    argmax_r: np.ndarray
    l1: float
    envelope: np.ndarray
    ratio: np.ndarray
    slopes: dict = field(default_factory=dict)

    def ratio_spread(self):
        return float(np.max(self.ratio) / np.min(self.ratio))

    def rows(self):
        for i in range(self.times.size):
            yield {
                "N": self.N,
                "t": float(self.times[i]),
                "sup": float(self.sup[i]),
                "argmax_r": float(self.argmax_r[i]),
                "envelope": float(self.envelope[i]),
                "ratio": float(self.ratio[i]),
            }


def regime_windows(N):
    """(flat, wave-like, dispersive) time windows of the decay envelope."""
    return {
        "flat": (0.0, 0.5 / N),
        "t^-1": (2.0 / N, 0.5 * N**-3),
        "t^-3/2": (2.0 * N**-3, math.inf),
    }


def dispersive_audit(N, times, windows=None):
    if N <= 0 or N > 1 or not spectral.is_dyadic(N):
        raise DyadicOutOfRange(f"dispersive_audit needs a dyadic 0 < N <= 1, got {N}")
    p = lp_profile(N)
    times = np.asarray(times, dtype=float)
    sup = np.empty(times.size)
    arg = np.empty(times.size)
    for i, t in enumerate(times):
        sup[i], arg[i] = sup_norm(p, float(t))
    l1 = kernel_l1(p)
    env = envelope(N, times) * l1
    ratio = sup / env
    if windows is None:
        windows = regime_windows(N)
    slopes = {name: fit_slope(times, sup, w) for name, w in windows.items()}
    return DecayReport(N, times, sup, arg, l1, env, ratio, slopes)


# --- Hessian of H ----------------------------------------------------------------------------------


def hessian_eigs(r):
    """(radial, tangential) Hessian eigenvalues of H at |xi| = r; tangential has multiplicity 2."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ZeroFrequency("the Hessian of H is singular at xi = 0")
    lam_r = 2.0 * r * (3.0 + r * r) / (2.0 + r * r) ** 1.5
    lam_t = 2.0 * (1.0 + r * r) / (r * np.sqrt(2.0 + r * r))
    return lam_r, lam_t


def _grad_H(x):
    r = np.linalg.norm(x)
    return float(h1(r)) / r * x


def fd_hessian_eigs(r, rel_step=1e-3, direction=None):
    """Eigenvalues of a central-difference Hessian of H (differences of grad H, Richardson)."""
    if r <= 0:
        raise ZeroFrequency("the Hessian of H is singular at xi = 0")
    if direction is None:
        direction = np.array([1.0, 2.0, 2.0]) / 3.0
    x = r * np.asarray(direction, dtype=float)
    step = rel_step * r

    def hess(hh):
        M = np.empty((3, 3))
        for j in range(3):
            e = np.zeros(3)
            e[j] = hh
            M[:, j] = (_grad_H(x + e) - _grad_H(x - e)) / (2 * hh)
        return 0.5 * (M + M.T)

    M = (4.0 * hess(0.5 * step) - hess(step)) / 3.0
    ev = np.linalg.eigvalsh(M)
    # the radial eigenvector is the direction of x
    u = x / r
    lam_r = float(u @ M @ u)
    others = sorted(ev, key=lambda v: abs(v - lam_r))[1:]
    return lam_r, float(np.mean(others)), ev


def hessian_audit(radii=None):
    """Worst relative disagreement of formula vs finite differences over ``radii``."""
    if radii is None:
        radii = np.logspace(-3, 3, 100)
    worst = 0.0
    for r in radii:
        lr, lt = hessian_eigs(r)
        fr, ft, _ = fd_hessian_eigs(float(r))
        worst = max(worst, abs(fr - lr) / abs(lr), abs(ft - lt) / abs(lt))
    return worst
