"""Model parameters, the nonlinearity, the diagonalizing map and the energy.

The physical equation is

    (i d_t + Delta) psi = alpha1 psi - alpha3 |psi|^2 psi + alpha5 |psi|^4 psi,

with |psi| -> c at infinity.  Writing psi(t, x) = c phi(b^2 t, b x) with
b^2 = c^2 p'(c^2) turns it into the normalized form

    (i d_t + Delta) phi = (|phi|^2 - 1)(beta (|phi|^2 - 1) + 1) phi,

beta = alpha5 c^2 / p'(c^2), because p(c^2 s) = c^2 p'(c^2)(s - 1) + alpha5 c^4 (s - 1)^2
when p(c^2) = 0.  The perturbation u = phi - 1 then solves
(i d_t + Delta) u = 2 u1 + N(u).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import spectral
from .errors import DegenerateRoot, FieldBlowup, NoStableEquilibrium


@dataclass(frozen=True)
class RawParams:
    alpha1: float
    alpha3: float
    alpha5: float

    def p(self, x):
        return self.alpha1 - self.alpha3 * x + self.alpha5 * x * x

    def dp(self, x):
        return -self.alpha3 + 2.0 * self.alpha5 * x


@dataclass(frozen=True)
class NormalizedModel:
    beta: float
    c: float
    time_scale: float
    space_scale: float
    amplitude_scale: float


def _positive_roots(raw):
    a1, a3, a5 = raw.alpha1, raw.alpha3, raw.alpha5
    if a5 == 0.0:
        if a3 == 0.0:
            if a1 == 0.0:
                raise DegenerateRoot("p vanishes identically, so p' = 0 at every root")
            return []
        roots = [a1 / a3]
    else:
        disc = a3 * a3 - 4.0 * a5 * a1
        if disc < 0.0:
            return []
        sq = math.sqrt(disc)
        roots = sorted({(a3 - sq) / (2.0 * a5), (a3 + sq) / (2.0 * a5)})
    return [r for r in roots if r > 0.0]


def normalize(raw, tol=1e-12):
    """Reduce (alpha1, alpha3, alpha5) to the normalized model."""
    roots = _positive_roots(raw)
    if not roots:
        raise NoStableEquilibrium(f"p(x) = {raw.alpha1} - {raw.alpha3} x + {raw.alpha5} x^2 has no positive root")
    scale = max(abs(raw.alpha1), abs(raw.alpha3), abs(raw.alpha5), 1e-300)
    slopes = [(r, raw.dp(r)) for r in roots]
    stable = [(r, s) for r, s in slopes if s > tol * scale]
    if not stable:
        if all(abs(s) <= tol * scale for _, s in slopes):
            raise DegenerateRoot("p'(c^2) = 0 at every positive root")
        raise NoStableEquilibrium("no positive root of p has p' > 0")
    c2, dp = stable[0]
    b2 = c2 * dp
    return NormalizedModel(
        beta=raw.alpha5 * c2 / dp,
        c=math.sqrt(c2),
        time_scale=b2,
        space_scale=math.sqrt(b2),
        amplitude_scale=math.sqrt(c2),
    )


# --- nonlinearity ----------------------------------------------------------------


def nonlinearity_parts(u, beta):
    """Homogeneous parts {2: N2, 3: N3, 4: N4, 5: N5} of N(u)."""
    u = np.asarray(u)
    u1 = u.real
    u2 = u.imag
    a2 = u1 * u1 + u2 * u2
    with np.errstate(over="raise", invalid="raise"):
        try:
            parts = {
                2: (3.0 + 4.0 * beta) * u1 * u1 + u2 * u2 + 2j * u1 * u2,
                3: a2 * u + 4.0 * beta * (a2 * u1 + u * u1 * u1),
                4: beta * (a2 * a2 + 4.0 * a2 * u * u1),
                5: beta * a2 * a2 * u,
            }
        except FloatingPointError as exc:
            raise FieldBlowup(f"overflow evaluating the nonlinearity: {exc}") from None
    for k, v in parts.items():
        if not np.all(np.isfinite(v)):
            raise FieldBlowup(f"non-finite values in N_{k}")
    return parts


def nonlinearity(u, beta):
    p = nonlinearity_parts(u, beta)
    return p[2] + p[3] + p[4] + p[5]


def nonlinearity_re_im(u1, u2, beta):
    """Real and imaginary parts of N(u) from real arrays u1, u2.

    Same polynomial as :func:`nonlinearity`, regrouped into real arithmetic
    for the time-stepping hot loop.
    """
    a2 = u1 * u1
    q = a2 + u2 * u2
    q2 = q * q
    qa = q * u1
    b4 = 4.0 * beta
    re = (3.0 + b4) * a2 + u2 * u2 + (1.0 + b4) * qa + b4 * a2 * u1 + beta * q2 + b4 * qa * u1 + beta * q2 * u1
    im = u2 * (2.0 * u1 + q + b4 * a2 + b4 * qa + beta * q2)
    return re, im


def potential(rho, beta):
    """(|psi|^2 - 1)(beta(|psi|^2 - 1) + 1) as a function of rho = |psi|^2."""
    s = rho - 1.0
    return s * (beta * s + 1.0)


def nv_of_u(grid, u, beta, dealias=False):
    """N_v(u) = U Re N(u) + i Im N(u)."""
    n = nonlinearity(u, beta)
    nh_re = spectral.fft(n.real)
    nh_im = spectral.fft(n.imag)
    out = grid.U * nh_re + 1j * nh_im
    if dealias:
        out = out * grid.dealias_mask
    return spectral.ifft(out)


# --- diagonalizing map -------------------------------------------------------------


@dataclass
class VState:
    """Diagonal variable v = u1 + i U u2 plus the mean of u2 that U discards."""

    v: np.ndarray
    u2_mean: float
    t: float = 0.0


def v_from_u(grid, u, t=0.0):
    u = np.asarray(u, dtype=complex)
    u2 = u.imag
    v = u.real + 1j * spectral.apply_U(grid, u2).real
    return VState(v=v, u2_mean=float(np.mean(u2)), t=t)


def u_from_v(grid, state):
    v = state.v
    u2 = spectral.apply_Uinv(grid, v.imag).real + state.u2_mean
    return v.real + 1j * u2


def psi_from_u(u):
    return 1.0 + u


def u_from_psi(psi):
    return psi - 1.0


# --- energy --------------------------------------------------------------------------


def energy(grid, psi, beta):
    """Integral of |grad psi|^2/2 + (|psi|^2-1)^2/4 + beta (|psi|^2-1)^3/6."""
    grad = spectral.gradient(grid, psi)
    kinetic = sum(np.abs(g) ** 2 for g in grad)
    s = np.abs(psi) ** 2 - 1.0
    dens = 0.5 * kinetic + 0.25 * s * s + (beta / 6.0) * s * s * s
    return grid.cell * float(np.sum(dens))


def default_initial_u(grid, eps=0.05, sigma=None):
    """eps (1 + i) exp(-|x|^2 / sigma^2), centered, sigma = L/16 by default."""
    if sigma is None:
        sigma = grid.L / 16.0
    return eps * (1.0 + 1.0j) * np.exp(-grid.r2 / sigma**2)
