"""Field generators shared by the test modules."""

import numpy as np

from cqnls import bilinear, model, spectral


def smooth_field(grid, rng, amplitude=0.05, width=None, complex_valued=True):
    """A random sum of off-centre Gaussians, negligible at the box edge."""
    width = grid.L / 12.0 if width is None else width
    x = grid.coords()
    out = np.zeros(grid.shape, dtype=complex)
    for _ in range(3):
        c = rng.uniform(-grid.L / 10, grid.L / 10, size=grid.d)
        r2 = sum((xa - ca) ** 2 for xa, ca in zip(x, c))
        amp = rng.normal() + (1j * rng.normal() if complex_valued else 0.0)
        out = out + amp * np.exp(-r2 / width**2)
    return amplitude * out


def band_limited(grid, rng, K, amplitude=0.05):
    """Random field whose Fourier coefficients vanish outside |k_a| <= K."""
    c = np.zeros(grid.shape, dtype=complex)
    sl = tuple(np.r_[0 : K + 1, grid.m - K : grid.m] for _ in range(grid.d))
    ix = np.ix_(*sl)
    shape = c[ix].shape
    c[ix] = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    f = spectral.to_physical(grid, c)
    return amplitude * f / np.max(np.abs(f))


def normal_form_oracle(grid, st, beta):
    """Quadratic part of (i d_t - H)(v + b(v)) with b = B[v1, v1] - B[w2, w2], from the linear flow.

    i d_t v - H v = U Re N + i Im N, and along the linear flow d_t u1 = -Lap u2 and
    d_t u2 = (Lap - 2) u1, so i Db(v)[d_t v] can be formed without any normal-form algebra.
    """
    u = model.u_from_v(grid, st)
    p2 = model.nonlinearity_parts(u, beta)[2]
    Bs = bilinear.BilinearSymbol(bilinear.B_symbol)

    def bil(f, g):
        return bilinear.apply_bilinear(grid, Bs, f, g)

    v1 = u.real.astype(complex)
    w2 = (u.imag - st.u2_mean).astype(complex)
    dt_v1 = -spectral.laplacian(grid, w2)
    dt_w2 = spectral.laplacian(grid, v1) - 2.0 * v1
    db = 2.0 * bil(dt_v1, v1) - 2.0 * bil(dt_w2, w2)
    b = bil(v1, v1) - bil(w2, w2)
    return spectral.apply_U(grid, p2.real.astype(complex)) + 1j * p2.imag + 1j * db - spectral.apply_H(grid, b)

