import numpy as np

from greenop.lattice import Field


def band_limited_field(grid, seed, kmax=4, jmax=4, zero_mean=True):
    """Random field whose spectrum lives on fixed absolute frequency indices.

    The coefficient table depends only on (seed, kmax, jmax, n), so refining
    the grid samples the same underlying function on more points.
    """
    rng = np.random.default_rng(seed)
    n = grid.n
    shape = (2 * kmax + 1,) + (2 * jmax + 1,) * n
    coeff = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    u_hat = np.zeros(grid.shape, dtype=complex)
    ks = range(-kmax, kmax + 1)
    js = range(-jmax, jmax + 1)

    def place(idx_freq, idx_coeff):
        u_hat[idx_freq] = coeff[idx_coeff]

    if n == 1:
        for a, k in enumerate(ks):
            for b, j in enumerate(js):
                place((k % grid.Nt, j % grid.Nx), (a, b))
    elif n == 2:
        for a, k in enumerate(ks):
            for b, j in enumerate(js):
                for c, l in enumerate(js):
                    place((k % grid.Nt, j % grid.Nx, l % grid.Nx), (a, b, c))
    else:
        for a, k in enumerate(ks):
            for b, j in enumerate(js):
                for c, l in enumerate(js):
                    for d, m in enumerate(js):
                        place((k % grid.Nt, j % grid.Nx, l % grid.Nx, m % grid.Nx),
                              (a, b, c, d))
    if zero_mean:
        u_hat[(0,) * (1 + n)] = 0.0
    # physical normalization independent of the grid resolution
    data = np.fft.ifftn(u_hat) * (grid.Nt * grid.Nx ** n) / (grid.Lt * grid.Lx ** n)
    return Field(grid, data)
