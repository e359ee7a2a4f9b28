"""Periodic grids, Fourier multipliers and Littlewood-Paley projections.

Fields are plain complex ``ndarray`` objects of shape ``(m,) * d`` sampled at
centered coordinates ``x in [-L/2, L/2)``.  Fourier coefficients use the
Fourier-series convention

    f(x) = sum_k c_k exp(i xi_k . x),   xi_k = 2 pi k / L,

so that ``c = to_coefficients(grid, f)`` and the physical L^2 norm obeys
Parseval with constant ``L**d``:  ``||f||_2**2 = L**d * sum |c_k|**2``.  This is
the single place the normalization constant lives; every norm in the package
goes through :func:`l2_norm` / :func:`lr_norm`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import BadAxis, DyadicOutOfRange, GridTooLarge, NonPowerOfTwo, SymbolSingularity

MAX_POINTS = 2**24
FFT_WORKERS = 1


def _is_power_of_two(n):
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    d: int
    m: int
    L: float

    @property
    def shape(self):
        return (self.m,) * self.d

    @property
    def npoints(self):
        return self.m**self.d

    @property
    def h(self):
        return self.L / self.m

    @property
    def dk(self):
        return 2.0 * math.pi / self.L

    @property
    def nyquist(self):
        return math.pi * self.m / self.L

    @property
    def volume(self):
        return self.L**self.d

    @property
    def cell(self):
        return self.h**self.d

    @cached_property
    def x1d(self):
        return -0.5 * self.L + self.h * np.arange(self.m)

    @cached_property
    def k1d(self):
        # integer lattice index in FFT order: 0, 1, ..., m/2-1, -m/2, ..., -1
        return np.fft.fftfreq(self.m, d=1.0 / self.m)

    @cached_property
    def xi1d(self):
        return self.dk * self.k1d

    def coords(self):
        """Broadcastable coordinate arrays, one per axis."""
        return [self._axis_view(self.x1d, a) for a in range(self.d)]

    def freqs(self):
        """Broadcastable frequency arrays (FFT order), one per axis."""
        return [self._axis_view(self.xi1d, a) for a in range(self.d)]

    def _axis_view(self, arr, axis):
        shape = [1] * self.d
        shape[axis] = self.m
        return arr.reshape(shape)

    @cached_property
    def xi2(self):
        out = np.zeros(self.shape)
        for f in self.freqs():
            out = out + f**2
        return out

    @cached_property
    def xi_abs(self):
        return np.sqrt(self.xi2)

    @cached_property
    def r2(self):
        out = np.zeros(self.shape)
        for c in self.coords():
            out = out + c**2
        return out

    @cached_property
    def sign(self):
        # (-1)^(k_1+...+k_d): phase from the centered origin
        s = np.ones(self.shape)
        for a in range(self.d):
            s = s * self._axis_view(np.where(self.k1d.astype(int) % 2 == 0, 1.0, -1.0), a)
        return s

    @cached_property
    def dealias_mask(self):
        cut = self.m / 3.0
        mask = np.ones(self.shape, dtype=bool)
        for a in range(self.d):
            mask = mask & (np.abs(self._axis_view(self.k1d, a)) <= cut)
        return mask

    # operator symbol tables, zero mode set to 0 for the singular ones
    @cached_property
    def japanese(self):
        return np.sqrt(2.0 + self.xi2)

    @cached_property
    def H(self):
        return self.xi_abs * self.japanese

    @cached_property
    def U(self):
        return self.xi_abs / self.japanese

    @cached_property
    def Uinv(self):
        out = np.zeros(self.shape)
        nz = self.xi_abs > 0
        out[nz] = self.japanese[nz] / self.xi_abs[nz]
        return out

    def dyadic_range(self):
        """(lowest, highest) dyadic N for which projections are meaningful.

        The lowest scale lies below the first lattice shell, so that
        ``phi(2 xi / N_lo)`` vanishes off the zero mode; the highest covers the
        lattice corner, so that ``phi(xi / N_hi) = 1`` everywhere.
        """
        lo = 2.0 ** math.floor(math.log2(self.dk))
        hi = 2.0 ** math.ceil(math.log2(self.nyquist * math.sqrt(self.d)))
        return lo, hi

    def dyadic_scales(self):
        lo, hi = self.dyadic_range()
        n = int(round(math.log2(hi / lo)))
        return [lo * 2.0**j for j in range(n + 1)]


def make_grid(d, m, L, max_points=MAX_POINTS):
    if d not in (1, 2, 3):
        raise ValueError(f"dimension must be 1, 2 or 3, got {d}")
    if not _is_power_of_two(m) or m < 8:
        raise NonPowerOfTwo(f"points per axis must be a power of two >= 8, got {m}")
    if not L > 0:
        raise ValueError(f"box length must be positive, got {L}")
    if m**d > max_points:
        raise GridTooLarge(f"{m}^{d} points exceeds the cap of {max_points}")
    return Grid(int(d), int(m), float(L))


# --- transforms and norms ---------------------------------------------------


def fft(f):
    return sfft.fftn(f, workers=FFT_WORKERS)


def ifft(c):
    return sfft.ifftn(c, workers=FFT_WORKERS)


def to_coefficients(grid, f):
    return fft(f) * grid.sign / grid.npoints


def to_physical(grid, c):
    return ifft(c * grid.sign) * grid.npoints


def l2_norm(grid, f):
    return math.sqrt(grid.cell * float(np.sum(np.abs(f) ** 2)))


def coeff_l2_norm(grid, c):
    return math.sqrt(grid.volume * float(np.sum(np.abs(c) ** 2)))


def lr_norm(grid, f, r):
    a = np.abs(f)
    if math.isinf(r):
        return float(a.max())
    return (grid.cell * float(np.sum(a**r))) ** (1.0 / r)


def mean(grid, f):
    return np.mean(f)


# --- radial symbols ----------------------------------------------------------


def japanese_symbol(r):
    return np.sqrt(2.0 + np.asarray(r, dtype=float) ** 2)


def H_symbol(r):
    r = np.asarray(r, dtype=float)
    return r * np.sqrt(2.0 + r**2)


def U_symbol(r):
    r = np.asarray(r, dtype=float)
    return r / np.sqrt(2.0 + r**2)


def Uinv_symbol(r):
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        return np.sqrt(2.0 + r**2) / r


def abs_power_symbol(s):
    def sym(r):
        with np.errstate(divide="ignore"):
            return np.asarray(r, dtype=float) ** s

    return sym


def propagator_symbol(t):
    """Symbol of exp(-i t H)."""

    def sym(r):
        return np.exp(-1j * t * H_symbol(r))

    return sym


def symbol_array(grid, symbol, zero_value):
    """Tabulate a radial symbol on the lattice.

    ``zero_value`` is mandatory: singular symbols (U^-1, |nabla|^-1) have no
    value at xi = 0 and the caller decides what the zero mode becomes.
    """
    nz = grid.xi_abs > 0
    vals = np.asarray(symbol(grid.xi_abs[nz]))
    out = np.empty(grid.shape, dtype=np.result_type(vals, np.asarray(zero_value), float))
    out[nz] = vals
    out[~nz] = zero_value
    bad = ~np.isfinite(out)
    if bad.any():
        idx = np.argwhere(bad)[0]
        xi = [float(grid.xi1d[i]) for i in idx]
        raise SymbolSingularity(f"symbol is not finite at xi = {xi}", xi=xi)
    return out


def apply_multiplier(f, table):
    return ifft(fft(f) * table)


def apply_radial_multiplier(grid, f, symbol, zero_value):
    return apply_multiplier(f, symbol_array(grid, symbol, zero_value))


def apply_H(grid, f):
    return apply_multiplier(f, grid.H)


def apply_U(grid, f):
    return apply_multiplier(f, grid.U)


def apply_Uinv(grid, f):
    return apply_multiplier(f, grid.Uinv)


def apply_japanese(grid, f):
    return apply_multiplier(f, grid.japanese)


def propagate(grid, f, t):
    """exp(-i t H) f."""
    return apply_multiplier(f, np.exp(-1j * t * grid.H))


def zero_mode_amplitude(f):
    """Mean of f: the amplitude a zero-mode-killing symbol discards."""
    return complex(np.mean(f))


def gradient(grid, f):
    fh = fft(f)
    return [ifft(1j * k * fh) for k in grid.freqs()]


def laplacian(grid, f):
    return ifft(-grid.xi2 * fft(f))


# --- Littlewood-Paley ----------------------------------------------------------


def smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
        return a / (a + b)


def phi_bump(r):
    """Radial bump: 1 on |xi| <= 1, 0 on |xi| >= 11/10."""
    return smooth_step((1.1 - np.asarray(r, dtype=float)) / 0.1)


def psi_annulus(r):
    r = np.asarray(r, dtype=float)
    return phi_bump(r) - phi_bump(2.0 * r)


def psi_fat(r):
    r = np.asarray(r, dtype=float)
    return psi_annulus(2.0 * r) + psi_annulus(r) + psi_annulus(0.5 * r)


LP_KINDS = ("leq", "at", "gt", "fat_at")


def lp_symbol(kind, r):
    if kind == "leq":
        return phi_bump(r)
    if kind == "at":
        return psi_annulus(r)
    if kind == "gt":
        return 1.0 - phi_bump(r)
    if kind == "fat_at":
        return psi_fat(r)
    raise ValueError(f"unknown projection kind {kind!r}")


def is_dyadic(N):
    if N <= 0:
        return False
    e = math.log2(N)
    return abs(e - round(e)) < 1e-12


def lp_project(grid, f, kind, N):
    if not is_dyadic(N):
        raise DyadicOutOfRange(f"N = {N} is not a power of two")
    lo, hi = grid.dyadic_range()
    if not (lo * (1 - 1e-12) <= N <= hi * (1 + 1e-12)):
        raise DyadicOutOfRange(f"N = {N} outside representable range [{lo}, {hi}]")
    return apply_multiplier(f, lp_symbol(kind, grid.xi_abs / N))


# --- physical-space weights ----------------------------------------------------


def _check_axis(grid, axis):
    if not (0 <= axis < grid.d):
        raise BadAxis(f"axis {axis} out of range for d = {grid.d}")


def multiply_by_x(grid, f, axis):
    _check_axis(grid, axis)
    return grid.coords()[axis] * f


def angular_momentum(grid, f, plane):
    """(x_j d_k - x_k d_j) f for plane = (j, k), derivatives spectral."""
    j, k = plane
    if grid.d < 2:
        raise BadAxis("angular momentum needs d >= 2")
    _check_axis(grid, j)
    _check_axis(grid, k)
    if j == k:
        raise BadAxis("plane needs two distinct axes")
    fh = fft(f)
    xi = grid.freqs()
    x = grid.coords()
    return x[j] * ifft(1j * xi[k] * fh) - x[k] * ifft(1j * xi[j] * fh)


def angular_planes(d):
    """Planes whose generators form x cross grad (one plane in 2D)."""
    if d == 3:
        return [(1, 2), (2, 0), (0, 1)]
    if d == 2:
        return [(0, 1)]
    return []


def angular_components(grid, f):
    return [angular_momentum(grid, f, p) for p in angular_planes(grid.d)]


def boundary_contamination(grid, f):
    """Fraction of ||f||^2 within L/8 of the box boundary."""
    x = grid.coords()
    edge = np.zeros(grid.shape, dtype=bool)
    lim = 0.5 * grid.L - grid.L / 8.0
    for c in x:
        edge = edge | (np.abs(c) >= lim)
    w = np.abs(f) ** 2
    total = float(np.sum(w))
    if total == 0.0:
        return 0.0
    return float(np.sum(w[edge])) / total
