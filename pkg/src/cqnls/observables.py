"""Norms, vector fields and decay/scattering diagnostics.

The weighted vector field is J(t) = exp(-itH) x exp(itH).  On the Fourier
side x acts as i grad_xi, so J(t) = x - t grad H(D), with
grad H(xi) = h'(|xi|) xi/|xi| and h'(r) = (2 + 2r^2)/sqrt(2 + r^2).  Vector
quantities are returned as lists with one field per axis; their L^2 norm is
the square root of the summed squares.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import model, spectral
from .errors import BadWindow, InsufficientHorizon

TRUSTED_CONTAMINATION = 1e-6


def h_prime(r):
    r = np.asarray(r, dtype=float)
    return (2.0 + 2.0 * r * r) / np.sqrt(2.0 + r * r)


def grad_H_tables(grid):
    """Vector symbol grad H(xi), zero at xi = 0."""
    r = grid.xi_abs
    fac = np.zeros(grid.shape)
    nz = r > 0
    fac[nz] = h_prime(r[nz]) / r[nz]
    return [fac * k for k in grid.freqs()]


def vector_l2(grid, comps):
    return math.sqrt(sum(spectral.l2_norm(grid, c) ** 2 for c in comps))


def j_apply(grid, v, t, form="expanded"):
    """J(t) v as a list of d fields."""
    if form == "conjugation":
        f = spectral.propagate(grid, v, -t)
        return [spectral.propagate(grid, spectral.multiply_by_x(grid, f, a), t) for a in range(grid.d)]
    if form == "expanded":
        vh = spectral.fft(v)
        return [
            spectral.multiply_by_x(grid, v, a) - t * spectral.ifft(g * vh)
            for a, g in enumerate(grad_H_tables(grid))
        ]
    raise ValueError(f"unknown form {form!r}")


@dataclass
class XNormReport:
    sobolev: float
    weighted: float
    angular: float
    total: float
    boundary_contamination: float
    angular_omitted: bool = False

    @property
    def trusted(self):
        return self.boundary_contamination < TRUSTED_CONTAMINATION

    def as_dict(self):
        out = asdict(self)
        out["trusted"] = self.trusted
        return out


def x_norm(grid, state, t=None):
    """||<grad> v|| + ||J(t) v|| + ||(x cross grad) v|| at time t (default state.t)."""
    v = state.v
    if t is None:
        t = state.t
    sob = spectral.l2_norm(grid, spectral.apply_japanese(grid, v))
    wei = vector_l2(grid, j_apply(grid, v, t, "expanded"))
    if grid.d >= 2:
        ang = vector_l2(grid, spectral.angular_components(grid, v))
    else:
        ang = 0.0
    f = spectral.propagate(grid, v, -t) if t else v
    contam = max(spectral.boundary_contamination(grid, v), spectral.boundary_contamination(grid, f))
    return XNormReport(sob, wei, ang, sob + wei + ang, contam, angular_omitted=grid.d == 1)


def profile(grid, v, t):
    """f(t) = exp(itH) v(t)."""
    return spectral.propagate(grid, v, -t)


def boundary_phase(grid, psi):
    """Phase of the mean of psi over the shell within L/8 of the box boundary."""
    lim = 0.5 * grid.L - grid.L / 8.0
    edge = np.zeros(grid.shape, dtype=bool)
    for c in grid.coords():
        edge = edge | (np.abs(c) >= lim)
    return float(np.angle(np.mean(psi[edge])))


def wraparound_horizon(grid, v, rel=1e-12):
    """L / (2 max group speed) over the significant part of the spectrum of v."""
    p = np.abs(spectral.fft(v)) ** 2
    if p.max() == 0:
        return math.inf
    xi = grid.xi_abs[p > rel * p.max()].max()
    return grid.L / (2.0 * float(h_prime(xi)))


def diagnostics_record(grid, state, beta):
    """Scalar diagnostics of a VState (the CSV row of a trajectory)."""
    v = state.v
    u = model.u_from_v(grid, state)
    psi = 1.0 + u
    jv = spectral.apply_japanese(grid, v)
    ang = spectral.angular_components(grid, v) if grid.d >= 2 else []
    xr = x_norm(grid, state)
    uinv_v = spectral.apply_Uinv(grid, v)
    rec = {
        "t": float(state.t),
        "energy": model.energy(grid, psi, beta),
        "v_L2": spectral.l2_norm(grid, v),
        "v_L6": spectral.lr_norm(grid, v, 6),
        "v_Linf": spectral.lr_norm(grid, v, math.inf),
        "Uinv_v_L6": spectral.lr_norm(grid, uinv_v, 6),
        "u_L2": spectral.l2_norm(grid, u),
        "sob_L2": xr.sobolev,
        "sob_L6": spectral.lr_norm(grid, jv, 6),
        "ang_L2": xr.angular,
        "ang_L6": _vector_lr(grid, ang, 6) if ang else 0.0,
        "weighted_L2": xr.weighted,
        "x_total": xr.total,
        "u2_mean": float(state.u2_mean),
        "u1_mean": float(np.mean(v.real)),
        "zero_mode_discarded": float(abs(np.mean(v.imag))),
        "boundary_contamination": xr.boundary_contamination,
        "boundary_phase": boundary_phase(grid, psi),
    }
    return rec


def _vector_lr(grid, comps, r):
    mag = np.sqrt(sum(np.abs(c) ** 2 for c in comps))
    return spectral.lr_norm(grid, mag, r)


# --- Strichartz accumulators --------------------------------------------------------


class StrichartzAccumulator:
    """Running L^inf_t L^2_x sups and trapezoid integrals of ||.||_6^2.

    Fed ``sob_L2, sob_L6, ang_L2, ang_L6`` per record; the L^2_t L^6_x norm is
    the square root of the integral accumulator.
    """

    KEYS = ("sob", "ang")

    def __init__(self):
        self.sup = {k: 0.0 for k in self.KEYS}
        self.integral = {k: 0.0 for k in self.KEYS}
        self._last = None

    def update(self, t, rec):
        for k in self.KEYS:
            self.sup[k] = max(self.sup[k], rec[f"{k}_L2"])
        if self._last is not None:
            t0, r0 = self._last
            for k in self.KEYS:
                self.integral[k] += 0.5 * (t - t0) * (r0[f"{k}_L6"] ** 2 + rec[f"{k}_L6"] ** 2)
        self._last = (t, {f"{k}_L6": rec[f"{k}_L6"] for k in self.KEYS})

    def as_dict(self):
        out = {}
        for k in self.KEYS:
            out[f"S_{k}_sup_L2"] = self.sup[k]
            out[f"S_{k}_L2t_L6"] = math.sqrt(self.integral[k])
            out[f"S_{k}"] = self.sup[k] + math.sqrt(self.integral[k])
        return out


def strichartz_accumulate(times, records):
    """Series of running S-norm components along a trajectory slice."""
    acc = StrichartzAccumulator()
    out = []
    for t, rec in zip(times, records):
        acc.update(t, rec)
        out.append(acc.as_dict())
    return out


# --- decay fits ----------------------------------------------------------------------


@dataclass
class DecayFit:
    exponent: float
    window: tuple
    residual: float
    npoints: int


def fit_power_law(times, values, window):
    """Least-squares slope of log(values) against log(times) on the window."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    ta, tb = window
    if not (tb > ta >= 1.0):
        raise BadWindow(f"window {window} must satisfy t_b > t_a >= 1")
    if times.size == 0 or ta < times.min() - 1e-12 or tb > times.max() + 1e-12:
        raise BadWindow(f"window {window} is not inside the trajectory span")
    sel = (times >= ta - 1e-12) & (times <= tb + 1e-12) & (values > 0)
    if sel.sum() < 2:
        raise BadWindow(f"window {window} holds fewer than two samples")
    x = np.log(times[sel])
    y = np.log(values[sel])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return DecayFit(float(coef[0]), (ta, tb), resid, int(sel.sum()))


DECAY_NORMS = {"L6_of_v": "v_L6", "L6_of_Uinv_v": "Uinv_v_L6", "Lr": "v_Linf"}


def decay_audit(trajectory, norm, window):
    key = DECAY_NORMS.get(norm, norm)
    return fit_power_law(trajectory.times, trajectory.series(key), window)


# --- scattering --------------------------------------------------------------------


@dataclass
class ScatteringReport:
    pairs: list
    h1: list
    angular: list
    weighted: list
    epsilon_hat: float

    def strictly_decreasing(self):
        return all(b < a for a, b in zip(self.h1, self.h1[1:]))


def scattering_monitor(grid, snapshots, min_pairs=3):
    """Cauchy defects of f(t) = exp(itH) v(t) between dyadic times s and 2s."""
    times = sorted(snapshots)
    pairs = [(s, 2 * s) for s in times if any(abs(2 * s - u) < 1e-9 for u in times) and s > 0]
    if len(pairs) < min_pairs:
        raise InsufficientHorizon(f"need {min_pairs} dyadic pairs, have {len(pairs)}")
    lookup = {round(t, 9): snapshots[t] for t in times}
    h1, ang, wei = [], [], []
    for s, s2 in pairs:
        a, b = lookup[round(s, 9)], lookup[round(s2, 9)]
        df = profile(grid, b.v, s2) - profile(grid, a.v, s)
        h1.append(spectral.l2_norm(grid, spectral.apply_japanese(grid, df)))
        ang.append(vector_l2(grid, spectral.angular_components(grid, df)) if grid.d >= 2 else 0.0)
        wei.append(vector_l2(grid, [spectral.multiply_by_x(grid, df, k) for k in range(grid.d)]))
    s_arr = np.array([p[0] for p in pairs])
    d_arr = np.array(h1)
    if np.all(d_arr > 0):
        slope = np.polyfit(np.log(s_arr), np.log(d_arr), 1)[0]
        eps_hat = float(-slope)
    else:
        eps_hat = math.inf
    return ScatteringReport(pairs, h1, ang, wei, eps_hat)


def linear_solution_residual(grid, u_plus, t):
    """Relative residual of (i d_t + Delta) u - 2 Re u for u = V^-1 exp(-itH) V u_plus.

    The time derivative is taken exactly through d_t v = -i H v.  The mean of
    u2, which v does not see, moves by d_t mean(u2) = -2 mean(u1).
    """
    state = model.v_from_u(grid, u_plus)
    vt = spectral.propagate(grid, state.v, t)
    dvt = -1j * spectral.apply_H(grid, vt)
    mean_u1 = float(np.mean(state.v.real))
    u = model.u_from_v(grid, model.VState(vt, state.u2_mean - 2.0 * t * mean_u1, t))
    du = dvt.real + 1j * (spectral.apply_Uinv(grid, dvt.imag).real - 2.0 * mean_u1)
    res = 1j * du + spectral.laplacian(grid, u) - 2.0 * u.real
    scale = spectral.l2_norm(grid, spectral.laplacian(grid, u)) + spectral.l2_norm(grid, u)
    return spectral.l2_norm(grid, res) / scale


# --- measured ratio diagnostics ---------------------------------------------------------


def low_frequency_ratio(grid, v, t=0.0):
    """(||U^-2 v||_6 + ||U^-1 v||_2) / X-norm."""
    uinv = spectral.apply_Uinv(grid, v)
    uinv2 = spectral.apply_Uinv(grid, uinv)
    xr = x_norm(grid, model.VState(v, 0.0, t))
    return (spectral.lr_norm(grid, uinv2, 6) + spectral.l2_norm(grid, uinv)) / xr.total


def weighted_bound_ratios(grid, state, t):
    """||x u_{>1}||_2 / (<t> X) and ||x u_{<=1}||_6 / (<t>^{2/9} X)."""
    u = model.u_from_v(grid, state)
    hi = spectral.apply_multiplier(u, spectral.lp_symbol("gt", grid.xi_abs))
    lo = spectral.apply_multiplier(u, spectral.lp_symbol("leq", grid.xi_abs))
    xn = x_norm(grid, state, t).total
    br = math.sqrt(1.0 + t * t)
    xhi = vector_l2(grid, [spectral.multiply_by_x(grid, hi, a) for a in range(grid.d)])
    xlo = _vector_lr(grid, [spectral.multiply_by_x(grid, lo, a) for a in range(grid.d)], 6)
    return xhi / (br * xn), xlo / (br ** (2.0 / 9.0) * xn)
