"""Deterministic coefficient fixtures.

Every generator is a pure function of (grid, seed, parameters).  Random
fields are band-limited trigonometric polynomials whose mode amplitudes are
drawn on absolute frequency indices, so the same seed produces samples of
the same underlying function on every grid resolution; refinement studies
stay coherent.
"""

from __future__ import annotations

import itertools
import zlib

import numpy as np

from .lattice import SpaceTimeGrid
from .norms import ExponentPair, coefficient_size
from .operators import CoefficientSet, identity_matrix_field

__all__ = (
    "identity_coefficients",
    "random_elliptic",
    "random_lower_order",
    "coulomb_potential",
    "checkerboard",
    "generate_coefficients",
    "GENERATOR_NAMES",
)


def _seeded_rng(name: str, seed: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))


def _trig_field(grid: SpaceTimeGrid, rng, kmax: int, jmax: int) -> np.ndarray:
    """Random real trigonometric polynomial with sup bound exactly 1.

    Coefficients are drawn in a fixed order over absolute indices, then the
    field is divided by the analytic bound sum |c|, never by a sampled max,
    so the result is resolution-independent.
    """
    if kmax >= grid.Nt // 2 or jmax >= grid.Nx // 2:
        raise ValueError("band exceeds the grid Nyquist range")
    coefs = {}
    bound = 0.0
    for k in range(-kmax, kmax + 1):
        for js in itertools.product(range(-jmax, jmax + 1), repeat=grid.n):
            c = rng.standard_normal() + 1j * rng.standard_normal()
            coefs[(k,) + js] = c
            bound += abs(c)
    spec = np.zeros(grid.shape, dtype=complex)
    for (k, *js), c in coefs.items():
        spec[(k % grid.Nt,) + tuple(j % grid.Nx for j in js)] = c
    values = np.fft.ifftn(spec) * np.prod(grid.shape)
    return values.real / bound


def identity_coefficients(grid: SpaceTimeGrid) -> CoefficientSet:
    """A = Id, no lower-order terms."""
    n = grid.n
    lead = (1,) * (1 + n)
    return CoefficientSet(grid=grid, A=identity_matrix_field(grid),
                          avec=np.zeros(lead + (n,)),
                          bvec=np.zeros(lead + (n,)), a0=np.zeros(lead))


def random_elliptic(grid: SpaceTimeGrid, lam: float, Lam: float, seed: int = 0,
                    complex_part: float = 0.3, real: bool = False,
                    kmax: int = 2, jmax: int = 2) -> CoefficientSet:
    """Random elliptic matrix field with guaranteed Garding constants.

    The Hermitian part is mid*Id + rho*H with ||H(t,x)|| <= n pointwise, so
    its eigenvalues never leave [lam, Lam - skew budget]; an optional
    skew-Hermitian part of norm <= budget keeps the total spectral norm
    below Lam while leaving the ellipticity constant untouched.
    """
    if not 0 < lam <= Lam:
        raise ValueError("requires 0 < lam <= Lam")
    if not 0 <= complex_part <= 1:
        raise ValueError("complex_part must lie in [0, 1]")
    rng = _seeded_rng("random_elliptic", seed)
    n = grid.n
    skew_budget = 0.0 if real else complex_part * (Lam - lam) / 2
    top = Lam - skew_budget

    def hermitian_noise():
        entries = np.zeros(grid.shape + (n, n), dtype=complex)
        for c in range(n):
            entries[..., c, c] = _trig_field(grid, rng, kmax, jmax)
            for j in range(c + 1, n):
                re = _trig_field(grid, rng, kmax, jmax)
                im = 0.0 if real else _trig_field(grid, rng, kmax, jmax)
                entries[..., c, j] = re + 1j * im
                entries[..., j, c] = re - 1j * im
        return entries

    mid = (lam + top) / 2
    rho = (top - lam) / (2 * n)
    A = mid * identity_matrix_field(grid) + rho * hermitian_noise()
    if skew_budget > 0:
        K = hermitian_noise()  # ||K|| <= n pointwise
        A = A + 1j * (skew_budget / n) * K
    lead = (1,) * (1 + n)
    return CoefficientSet(grid=grid, A=A, avec=np.zeros(lead + (n,)),
                          bvec=np.zeros(lead + (n,)), a0=np.zeros(lead))


def random_lower_order(grid: SpaceTimeGrid, P_target: float,
                       pair: ExponentPair, seed: int = 0,
                       lorentz: bool = False, kmax: int = 2,
                       jmax: int = 2) -> CoefficientSet:
    """Random first/zero order fields rescaled to hit P_target exactly.

    The aggregate size is homogeneous of degree one in a joint scaling of
    (avec, bvec, a0), so one measurement and one division land on target to
    round-off.
    """
    if P_target < 0:
        raise ValueError("P_target must be non-negative")
    rng = _seeded_rng("random_lower_order", seed)
    n = grid.n
    avec = np.stack([_trig_field(grid, rng, kmax, jmax)
                     + 1j * _trig_field(grid, rng, kmax, jmax)
                     for _ in range(n)], axis=-1)
    bvec = np.stack([_trig_field(grid, rng, kmax, jmax)
                     + 1j * _trig_field(grid, rng, kmax, jmax)
                     for _ in range(n)], axis=-1)
    a0 = _trig_field(grid, rng, kmax, jmax) + 1j * _trig_field(grid, rng, kmax, jmax)
    raw = CoefficientSet(grid=grid, A=identity_matrix_field(grid),
                         avec=avec, bvec=bvec, a0=a0)
    measured = coefficient_size(raw, pair, lorentz=lorentz)
    scale = 0.0 if P_target == 0 else P_target / measured
    return CoefficientSet(grid=grid, A=raw.A, avec=scale * avec,
                          bvec=scale * bvec, a0=scale * a0)


def coulomb_potential(grid: SpaceTimeGrid, c: complex, M: float) -> CoefficientSet:
    """A = Id plus the inverse-square potential c * min(|x|^-2, M), n = 3.

    Distances are taken to the nearest periodic image of the origin; the
    height cut M stands in for the Hardy singularity the lattice cannot
    resolve.
    """
    if grid.n != 3:
        raise ValueError("the inverse-square scenario is three-dimensional")
    if M <= 0:
        raise ValueError("truncation height M must be positive")
    d = np.minimum(grid.xs, grid.Lx - grid.xs)
    d2 = (d[:, None, None] ** 2 + d[None, :, None] ** 2
          + d[None, None, :] ** 2)
    with np.errstate(divide="ignore"):
        pot = np.minimum(1.0 / d2, M)
    a0 = complex(c) * pot[None, ...]
    lead = (1,) * 4
    return CoefficientSet(grid=grid, A=identity_matrix_field(grid),
                          avec=np.zeros(lead + (3,)),
                          bvec=np.zeros(lead + (3,)), a0=a0)


def checkerboard(grid: SpaceTimeGrid, contrast: float, blocks: int = 2) -> CoefficientSet:
    """Piecewise-constant scalar A alternating between 1 and contrast.

    Space is tiled into blocks^n congruent cubes with alternating parity;
    the field is discontinuous, time-independent, and has Garding constants
    (min(1, contrast), max(1, contrast)) exactly.
    """
    if contrast <= 0:
        raise ValueError("contrast must be positive")
    if blocks < 1 or grid.Nx % blocks != 0:
        raise ValueError("blocks must divide the spatial resolution")
    cell_idx = (np.arange(grid.Nx) * blocks) // grid.Nx
    parity = np.zeros((1,) + grid.spatial_shape, dtype=int)
    for c in range(grid.n):
        shape = [1] * (1 + grid.n)
        shape[1 + c] = grid.Nx
        parity = parity + cell_idx.reshape(shape)
    scalar = np.where(parity % 2 == 0, 1.0, contrast)
    A = scalar[..., None, None] * np.eye(grid.n)
    lead = (1,) * (1 + grid.n)
    return CoefficientSet(grid=grid, A=A, avec=np.zeros(lead + (grid.n,)),
                          bvec=np.zeros(lead + (grid.n,)), a0=np.zeros(lead))


GENERATOR_NAMES = ("identity", "random_elliptic", "random_lower_order",
                   "coulomb", "checkerboard")


def generate_coefficients(name: str, grid: SpaceTimeGrid, seed: int = 0,
                          params: dict | None = None) -> CoefficientSet:
    """Dispatch by generator id; deterministic for (name, seed)."""
    params = dict(params or {})
    if name == "identity":
        return identity_coefficients(grid)
    if name == "random_elliptic":
        return random_elliptic(grid, lam=params.pop("lam"),
                               Lam=params.pop("Lam"), seed=seed, **params)
    if name == "random_lower_order":
        pair = params.pop("pair")
        if not isinstance(pair, ExponentPair):
            pair = ExponentPair(*pair)
        return random_lower_order(grid, P_target=params.pop("P_target"),
                                  pair=pair, seed=seed, **params)
    if name == "coulomb":
        c = params.pop("c")
        if isinstance(c, (list, tuple)):
            c = complex(c[0], c[1])
        return coulomb_potential(grid, c=c, M=params.pop("M"))
    if name == "checkerboard":
        return checkerboard(grid, contrast=params.pop("contrast"), **params)
    raise ValueError(f"unknown generator {name!r}")
