"""Time integrators and trajectory orchestration.

Two independent schemes advance the same dynamics:

* ``strang_psi``: Strang splitting of the psi equation.  The kinetic half
  steps are the multiplier exp(-i dt/2 |xi|^2); the potential substep
  psi -> psi exp(-i dt V(|psi|^2)) is exact because it preserves |psi|.
* ``ifrk4_v``: classical RK4 on the profile g(t) = exp(itH) v(t), written in
  Lawson form so only the unitary factors exp(-i s H) ever multiply v.  The
  mean of u2, invisible to v, is advanced by its own ODE alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft

from . import model, observables, spectral
from .errors import FieldBlowup

SOLVERS = ("strang_psi", "ifrk4_v", "both")


def _check_blowup(grid, w, threshold, t):
    if threshold is None:
        return
    nrm = math.sqrt(grid.cell * float(np.vdot(w, w).real))
    if not math.isfinite(nrm) or nrm > threshold:
        raise FieldBlowup(f"||psi - 1||_2 = {nrm:.3e} exceeds {threshold:.3e} at t = {t:.6g}", t=t)


class StrangSolver:
    """Strang splitting on psi.

    With ``linear=True`` the potential substep is replaced by the exact flow of
    the linearized potential term, u2 -> u2 - 2 dt u1, so the scheme targets
    exp(-itH) instead of the nonlinear flow.
    """

    def __init__(self, grid, beta, dt, dealias=True, linear=False, blowup=None):
        self.grid = grid
        self.beta = float(beta)
        self.dt = float(dt)
        self.dealias = dealias
        self.linear = linear
        self.blowup = blowup
        self.half = np.exp(-0.5j * self.dt * grid.xi2)

    def _potential_substep(self, psi):
        if self.linear:
            u = psi - 1.0
            return 1.0 + (u.real + 1j * (u.imag - 2.0 * self.dt * u.real))
        rho = psi.real**2 + psi.imag**2
        return psi * np.exp(-1j * self.dt * model.potential(rho, self.beta))

    def step(self, psi, t=0.0):
        w = spectral.ifft(spectral.fft(psi) * self.half)
        w = self._potential_substep(w)
        wh = spectral.fft(w)
        if self.dealias and not self.linear:  # the linear substep makes no products to alias
            wh = wh * self.grid.dealias_mask
        out = spectral.ifft(wh * self.half)
        _check_blowup(self.grid, out - 1.0, self.blowup, t + self.dt)
        return out


class IFRK4Solver:
    """Integrating-factor RK4 on v (Lawson form).

    v is stored as the real-FFT coefficients of its real and imaginary parts,
    X = (R, I).  Because H is even, exp(-i s H) acts on that pair as the real
    rotation (R, I) -> (cos R + sin I, cos I - sin R) with cos = cos(sH),
    sin = sin(sH), so every array in the hot loop is half size.  The mean of
    u2 is the scalar ``m2``; ``zero_mode='project'`` pins it to 0.
    """

    def __init__(self, grid, beta, dt, dealias=True, linear=False, zero_mode="track", blowup=None):
        if zero_mode not in ("track", "project"):
            raise ValueError(f"zero_mode must be 'track' or 'project', got {zero_mode!r}")
        self.grid = grid
        self.beta = float(beta)
        self.dt = float(dt)
        self.dealias = dealias
        self.linear = linear
        self.zero_mode = zero_mode
        self.blowup = blowup
        self.M = grid.npoints
        half = grid.m // 2 + 1
        cut = (Ellipsis, slice(0, half))
        self._H = grid.H[cut]
        self._U = grid.U[cut]
        self._Uinv = grid.Uinv[cut]
        self._mask = grid.dealias_mask[cut] if dealias else None
        self._rot_half = (np.cos(0.5 * self.dt * self._H), np.sin(0.5 * self.dt * self._H))
        self._rot_full = (np.cos(self.dt * self._H), np.sin(self.dt * self._H))

    # --- representation -------------------------------------------------
    def _rfft(self, a):
        return sfft.rfftn(a, workers=spectral.FFT_WORKERS)

    def _irfft(self, a):
        return sfft.irfftn(a, s=self.grid.shape, workers=spectral.FFT_WORKERS)

    def to_pair(self, v):
        return np.stack([self._rfft(v.real), self._rfft(v.imag)])

    def from_pair(self, X):
        return self._irfft(X[0]) + 1j * self._irfft(X[1])

    @staticmethod
    def _rotate(rot, X):
        c, s = rot
        return np.stack([c * X[0] + s * X[1], c * X[1] - s * X[0]])

    def u_from_pair(self, X, m2):
        return self._irfft(X[0]) + 1j * (self._irfft(self._Uinv * X[1]) + m2)

    # --- right-hand side ----------------------------------------------------
    def rhs(self, X, m2):
        """(-i N_v as a pair, d m2/dt) at the given stage."""
        mean_u1 = X[0].flat[0].real / self.M
        dm2 = 0.0 if self.zero_mode == "project" else -2.0 * mean_u1
        if self.linear:
            return np.zeros_like(X), dm2
        u1 = self._irfft(X[0])
        u2 = self._irfft(self._Uinv * X[1]) + m2
        re, im = model.nonlinearity_re_im(u1, u2, self.beta)
        re_h = self._rfft(re)
        im_h = self._rfft(im)
        if self.zero_mode == "track":
            dm2 -= re_h.flat[0].real / self.M
        if self._mask is not None:
            re_h *= self._mask
            im_h *= self._mask
        # -i (U re + i im) = im - i U re
        return np.stack([im_h, -self._U * re_h]), dm2

    def step_pair(self, X, m2):
        dt = self.dt
        rh, rf = self._rot_half, self._rot_full
        k1, l1 = self.rhs(X, m2)
        k2, l2 = self.rhs(self._rotate(rh, X + 0.5 * dt * k1), m2 + 0.5 * dt * l1)
        hX = self._rotate(rh, X)
        k3, l3 = self.rhs(hX + 0.5 * dt * k2, m2 + 0.5 * dt * l2)
        k4, l4 = self.rhs(self._rotate(rf, X) + dt * self._rotate(rh, k3), m2 + dt * l3)
        Xn = self._rotate(rf, X) + (dt / 6.0) * (
            self._rotate(rf, k1) + 2.0 * self._rotate(rh, k2 + k3) + k4
        )
        mn = m2 + (dt / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4)
        return Xn, mn

    def advance(self, state, nsteps):
        X = self.to_pair(state.v)
        m2 = 0.0 if self.zero_mode == "project" else state.u2_mean
        t = state.t
        for _ in range(nsteps):
            X, m2 = self.step_pair(X, m2)
            t += self.dt
            if not np.isfinite(X[0].flat[0]):
                raise FieldBlowup(f"non-finite state at t = {t:.6g}", t=t)
        if self.blowup is not None:
            _check_blowup(self.grid, self.u_from_pair(X, m2), self.blowup, t)
        return model.VState(v=self.from_pair(X), u2_mean=float(m2), t=t)

    def step(self, state):
        return self.advance(state, 1)


def step_strang_psi(grid, psi, dt, beta, dealias=True, linear=False, blowup=None):
    return StrangSolver(grid, beta, dt, dealias=dealias, linear=linear, blowup=blowup).step(psi)


def step_ifrk4_v(grid, state, dt, beta, dealias=True, linear=False, zero_mode="track", blowup=None):
    solver = IFRK4Solver(grid, beta, dt, dealias=dealias, linear=linear, zero_mode=zero_mode, blowup=blowup)
    return solver.step(state)


# --- orchestration -------------------------------------------------------------------


@dataclass
class SimConfig:
    d: int = 3
    m: int = 64
    L: float = 64.0
    beta: float = 2.0
    eps: float = 0.05
    sigma: float | None = None
    dt: float = 1e-3
    t_end: float = 4.0
    cadence: float = 0.25
    solver: str = "strang_psi"
    zero_mode: str = "track"
    dealias: bool = True
    linear: bool = False
    blowup_threshold: float = 1e3
    max_dt: float = 0.1
    dyadic_snapshots: bool = False
    checkpoint_every: float = 0.0
    checkpoint_dir: str | None = None

    def validate(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.dt > self.max_dt:
            raise ValueError(f"dt = {self.dt} exceeds the configured maximum {self.max_dt}")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}")
        for name in ("t_end", "cadence", "checkpoint_every"):
            val = getattr(self, name)
            if val and abs(val / self.dt - round(val / self.dt)) > 1e-9:
                raise ValueError(f"{name} = {val} is not a multiple of dt = {self.dt}")
        if self.cadence <= 0:
            raise ValueError("cadence must be positive")

    def grid(self):
        return spectral.make_grid(self.d, self.m, self.L)


@dataclass
class Trajectory:
    solver: str
    times: list = field(default_factory=list)
    records: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict)

    def append(self, t, record):
        if self.times and not t > self.times[-1]:
            raise ValueError("trajectory times must increase strictly")
        for k, v in record.items():
            if isinstance(v, float) and not math.isfinite(v):
                raise FieldBlowup(f"non-finite diagnostic {k} at t = {t}", t=t)
        self.times.append(t)
        self.records.append(record)

    def series(self, key):
        return np.array([r[key] for r in self.records])


@dataclass
class RunResult:
    config: SimConfig
    trajectories: dict
    cross: list = field(default_factory=list)

    @property
    def trajectory(self):
        return next(iter(self.trajectories.values()))


def _dyadic_steps(cfg, nsteps):
    out = set()
    s = 1.0
    while s <= cfg.t_end + 1e-12:
        k = round(s / cfg.dt)
        if k <= nsteps:
            out.add(k)
        s *= 2.0
    return out


def _run_single(cfg, grid, solver_name, u0, on_checkpoint=None, keep_fields=False):
    nsteps = round(cfg.t_end / cfg.dt)
    every = round(cfg.cadence / cfg.dt)
    ckpt = round(cfg.checkpoint_every / cfg.dt) if cfg.checkpoint_every else 0
    snaps = _dyadic_steps(cfg, nsteps) if cfg.dyadic_snapshots else set()
    traj = Trajectory(solver=solver_name)
    marks = sorted(set(range(0, nsteps + 1, every)) | snaps | {nsteps} | (set(range(0, nsteps + 1, ckpt)) if ckpt else set()))
    acc = observables.StrichartzAccumulator()

    def record(state, k):
        t = k * cfg.dt
        if k % every == 0 or k == nsteps:
            rec = observables.diagnostics_record(grid, state, cfg.beta)
            acc.update(t, rec)
            rec.update(acc.as_dict())
            traj.append(t, rec)
            if keep_fields:
                traj.fields[t] = model.u_from_v(grid, state)
        if k in snaps:
            traj.snapshots[t] = model.VState(v=state.v.copy(), u2_mean=state.u2_mean, t=t)
        if ckpt and k % ckpt == 0 and on_checkpoint is not None:
            on_checkpoint(solver_name, state)

    if solver_name == "strang_psi":
        solver = StrangSolver(grid, cfg.beta, cfg.dt, cfg.dealias, cfg.linear, cfg.blowup_threshold)
        psi = 1.0 + u0
        k = 0
        record(model.v_from_u(grid, u0, 0.0), 0)
        for target in marks[1:] if marks and marks[0] == 0 else marks:
            while k < target:
                psi = solver.step(psi, k * cfg.dt)
                k += 1
            record(model.v_from_u(grid, psi - 1.0, k * cfg.dt), k)
    else:
        solver = IFRK4Solver(grid, cfg.beta, cfg.dt, cfg.dealias, cfg.linear, cfg.zero_mode, cfg.blowup_threshold)
        state = model.v_from_u(grid, u0, 0.0)
        if cfg.zero_mode == "project":
            state.u2_mean = 0.0
        k = 0
        record(state, 0)
        for target in marks[1:] if marks and marks[0] == 0 else marks:
            state = solver.advance(state, target - k)
            k = target
            state.t = k * cfg.dt
            record(state, k)
    return traj


def run(cfg, u0=None, on_checkpoint=None, keep_fields=False):
    """Integrate to ``t_end`` and collect diagnostics at the configured cadence."""
    cfg.validate()
    grid = cfg.grid()
    if u0 is None:
        u0 = model.default_initial_u(grid, cfg.eps, cfg.sigma)
    names = ["strang_psi", "ifrk4_v"] if cfg.solver == "both" else [cfg.solver]
    keep = cfg.solver == "both" or keep_fields
    trajs = {n: _run_single(cfg, grid, n, u0, on_checkpoint, keep) for n in names}
    res = RunResult(config=cfg, trajectories=trajs)
    if cfg.solver == "both":
        res.cross = cross_difference(grid, trajs["strang_psi"], trajs["ifrk4_v"], u0)
    return res


def cross_difference(grid, a, b, u0):
    """||psi_a - psi_b||_2 / ||psi_0 - 1||_2 at the common record times."""
    ref = spectral.l2_norm(grid, u0)
    out = []
    for t in a.times:
        ua, ub = a.fields[t], b.fields[t]
        out.append((t, spectral.l2_norm(grid, ua - ub) / ref))
    return out


# --- temporal convergence -----------------------------------------------------------


@dataclass
class ConvergenceStudy:
    solver: str
    dts: list
    differences: list  # ||u_dt - u_{dt/2}||_2 / ||u_0||_2 for consecutive pairs
    orders: list  # log2 of successive difference ratios


def final_field(cfg, solver, dt, u0):
    """u at cfg.t_end from one solver at step dt."""
    run_cfg = replace(cfg, solver=solver, dt=dt, cadence=cfg.t_end, dyadic_snapshots=False, checkpoint_every=0.0)
    res = run(run_cfg, u0=u0, keep_fields=True)
    traj = res.trajectories[solver]
    return traj.fields[traj.times[-1]]


def convergence_study(cfg, solver, dts, u0=None):
    """Self-convergence orders from runs at successively halved steps.

    ``dts`` must be decreasing by factors of two; with k steps the study
    yields k - 1 differences and k - 2 orders.
    """
    dts = [float(x) for x in dts]
    if len(dts) < 3:
        raise ValueError("a convergence study needs at least three step sizes")
    for a, b in zip(dts, dts[1:]):
        if abs(a / b - 2.0) > 1e-12:
            raise ValueError(f"step sizes must halve successively, got {a} then {b}")
    grid = cfg.grid()
    if u0 is None:
        u0 = model.default_initial_u(grid, cfg.eps, cfg.sigma)
    ref = spectral.l2_norm(grid, u0)
    fields = [final_field(cfg, solver, dt, u0) for dt in dts]
    diffs = [spectral.l2_norm(grid, a - b) / ref for a, b in zip(fields, fields[1:])]
    orders = [math.log2(a / b) for a, b in zip(diffs, diffs[1:])]
    return ConvergenceStudy(solver, dts, diffs, orders)
