"""Discrete periodic space-time lattice and its Fourier-multiplier calculus.

Everything downstream (norms, operators, solvers, propagators) is built on the
objects defined here: the grid, complex scalar fields over the full lattice or
over one time slice, the normalized transforms between physical and frequency
representations, and diagonal frequency multipliers (fractional time
derivatives, Hilbert transform in time, heat resolvent, variational weight).

Normalization convention: the forward transform carries the quadrature weight
dt*dx^n so that discrete sums reproduce continuum integrals, and the inverse
divides it out.  Parseval then reads

    sum |u|^2 * dt*dx^n  =  sum |u_hat|^2 / (Lt*Lx^n).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = (
    "SpaceTimeGrid",
    "Field",
    "SpatialField",
    "MultiplierSymbol",
    "make_grid",
    "forward_transform",
    "inverse_transform",
    "apply_multiplier",
    "time_fraction",
    "spatial_fraction",
    "hilbert_t",
    "heat_resolvent",
    "vdot_weight",
    "vdot_inverse_weight",
    "custom_symbol",
    "gradient",
    "divergence",
    "spatial_gradient",
    "time_derivative",
    "inner",
    "l2_norm",
    "spatial_inner",
    "spatial_l2_norm",
)


def _is_pow2(m: int) -> bool:
    return m >= 1 and (m & (m - 1)) == 0


@dataclass(frozen=True)
class SpaceTimeGrid:
    """Periodic space-time lattice: n spatial axes of Nx points, Nt time points."""

    n: int       # spatial dimension, 1..3
    Nx: int      # points per spatial axis (power of two)
    Lx: float    # spatial period
    Nt: int      # time points (power of two)
    Lt: float    # time period
    # FFT-ordered frequency tables, filled in __post_init__
    tau_fft: np.ndarray = field(init=False, repr=False, compare=False)
    xi_fft: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ValueError(f"spatial dimension must be 1, 2 or 3, got {self.n}")
        for name, m in (("Nx", self.Nx), ("Nt", self.Nt)):
            if m < 8 or not _is_pow2(m):
                raise ValueError(f"{name} must be a power of two >= 8, got {m}")
        if not (self.Lx > 0 and self.Lt > 0):
            raise ValueError("periods Lx, Lt must be positive")
        tau = 2.0 * np.pi / self.Lt * np.fft.fftfreq(self.Nt, d=1.0 / self.Nt)
        xi = 2.0 * np.pi / self.Lx * np.fft.fftfreq(self.Nx, d=1.0 / self.Nx)
        object.__setattr__(self, "tau_fft", tau)
        object.__setattr__(self, "xi_fft", xi)

    # -- geometry ----------------------------------------------------------

    @property
    def dt(self) -> float:
        return self.Lt / self.Nt

    @property
    def dx(self) -> float:
        return self.Lx / self.Nx

    @property
    def cell(self) -> float:
        """Quadrature weight of one space-time cell, dt*dx^n."""
        return self.dt * self.dx ** self.n

    @property
    def shape(self) -> tuple:
        return (self.Nt,) + (self.Nx,) * self.n

    @property
    def spatial_shape(self) -> tuple:
        return (self.Nx,) * self.n

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.Nt)

    @property
    def xs(self) -> np.ndarray:
        """Coordinates along one spatial axis."""
        return self.dx * np.arange(self.Nx)

    # -- frequency tables ---------------------------------------------------

    @property
    def tau(self) -> np.ndarray:
        """Time frequencies 2*pi*k/Lt, k = -Nt/2..Nt/2-1, ascending."""
        return np.sort(self.tau_fft)

    @property
    def xi(self) -> np.ndarray:
        """Spatial frequencies 2*pi*j/Lx along one axis, ascending."""
        return np.sort(self.xi_fft)

    def tau_bc(self) -> np.ndarray:
        """FFT-ordered tau broadcast against the full lattice shape."""
        return self.tau_fft.reshape((self.Nt,) + (1,) * self.n)

    def xi_bc(self, axis: int) -> np.ndarray:
        """FFT-ordered xi along spatial axis `axis`, broadcastable to the lattice."""
        shape = [1] * (1 + self.n)
        shape[1 + axis] = self.Nx
        return self.xi_fft.reshape(shape)

    def xi2_bc(self) -> np.ndarray:
        """|xi|^2 on the FFT-ordered lattice, broadcastable shape."""
        out = np.zeros((1,) * (1 + self.n))
        for c in range(self.n):
            out = out + self.xi_bc(c) ** 2
        return out

    def time_index(self, t: float) -> int:
        """Grid index of the time cell containing t (t must sit on the grid)."""
        k = int(round(t / self.dt)) % self.Nt
        if abs(k * self.dt - t % self.Lt) > 1e-9 * max(self.dt, 1.0):
            raise ValueError(f"time {t} is not on the grid (dt={self.dt})")
        return k


@dataclass
class Field:
    """Complex scalar samples over the full space-time lattice, time-major."""

    grid: SpaceTimeGrid
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape != self.grid.shape:
            raise ValueError(
                f"field shape {self.data.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("field contains non-finite entries")

    def copy(self) -> "Field":
        return Field(self.grid, self.data.copy())

    def slice_at(self, k: int) -> "SpatialField":
        """Spatial slice at time index k (periodic)."""
        return SpatialField(self.grid, self.data[k % self.grid.Nt].copy())


@dataclass
class SpatialField:
    """Complex scalar samples over one time slice."""

    grid: SpaceTimeGrid
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape != self.grid.spatial_shape:
            raise ValueError(
                f"slice shape {self.data.shape} does not match grid "
                f"{self.grid.spatial_shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("slice contains non-finite entries")

    def copy(self) -> "SpatialField":
        return SpatialField(self.grid, self.data.copy())


@dataclass(frozen=True)
class MultiplierSymbol:
    """Diagonal frequency multiplier: values per FFT-ordered (tau_k, xi_j)."""

    grid: SpaceTimeGrid
    kind: str
    values: np.ndarray  # broadcastable to grid.shape, FFT ordering


def make_grid(n: int, Nx: int, Lx: float, Nt: int, Lt: float) -> SpaceTimeGrid:
    """Build a periodic lattice; counts must be powers of two >= 8."""
    return SpaceTimeGrid(n=n, Nx=Nx, Lx=float(Lx), Nt=Nt, Lt=float(Lt))


# ---------------------------------------------------------------------------
# transforms


def forward_transform(u: Field) -> Field:
    """DFT with quadrature normalization: u_hat = fftn(u) * dt*dx^n."""
    return Field(u.grid, np.fft.fftn(u.data) * u.grid.cell)


def inverse_transform(u_hat: Field) -> Field:
    """Inverse of forward_transform."""
    return Field(u_hat.grid, np.fft.ifftn(u_hat.data) / u_hat.grid.cell)


def apply_multiplier(u: Field, m: MultiplierSymbol) -> Field:
    """Pointwise frequency multiplication: ifftn(m * fftn(u)).

    The quadrature factors of the normalized transform pair cancel, so the
    plain FFT pair is used directly.
    """
    if m.grid is not u.grid and m.grid != u.grid:
        raise ValueError("multiplier and field live on different grids")
    return Field(u.grid, np.fft.ifftn(m.values * np.fft.fftn(u.data)))


# ---------------------------------------------------------------------------
# multiplier factories


def time_fraction(grid: SpaceTimeGrid, alpha: float) -> MultiplierSymbol:
    r"""Fractional time derivative D_t^alpha, symbol |tau|^alpha.

    The tau = 0 row is set to zero for alpha != 0 (projection of the
    time-constant modes; for negative alpha this is the zero-mode projection
    that makes the inverse well defined).
    """
    tau = grid.tau_bc()
    vals = np.zeros(tau.shape)
    nz = tau != 0
    if alpha == 0:
        vals = np.ones(tau.shape)
    else:
        vals[nz] = np.abs(tau[nz]) ** alpha
    return MultiplierSymbol(grid, f"TimeFraction({alpha})", vals)


def spatial_fraction(grid: SpaceTimeGrid, s: float) -> MultiplierSymbol:
    """Fractional Laplacian (-Lap)^{s/2}, symbol |xi|^s, zero row at xi = 0."""
    xi2 = grid.xi2_bc()
    vals = np.zeros(xi2.shape)
    nz = xi2 != 0
    if s == 0:
        vals = np.ones(xi2.shape)
    else:
        vals[nz] = xi2[nz] ** (s / 2.0)
    return MultiplierSymbol(grid, f"SpatialFraction({s})", vals)


def hilbert_t(grid: SpaceTimeGrid) -> MultiplierSymbol:
    """Hilbert transform in time, symbol i*sgn(tau) with sgn(0) = 0."""
    return MultiplierSymbol(grid, "HilbertT", 1j * np.sign(grid.tau_bc()))


def heat_resolvent(grid: SpaceTimeGrid) -> MultiplierSymbol:
    """Symbol 1/(i*tau + |xi|^2); the joint zero mode is projected out."""
    denom = 1j * grid.tau_bc() + grid.xi2_bc()
    vals = np.zeros(denom.shape, dtype=complex)
    nz = denom != 0
    vals[nz] = 1.0 / denom[nz]
    return MultiplierSymbol(grid, "HeatResolvent", vals)


def vdot_weight(grid: SpaceTimeGrid) -> MultiplierSymbol:
    """Homogeneous variational weight (|tau| + |xi|^2)^{1/2}."""
    vals = np.sqrt(np.abs(grid.tau_bc()) + grid.xi2_bc())
    return MultiplierSymbol(grid, "VdotWeight", vals)


def vdot_inverse_weight(grid: SpaceTimeGrid) -> MultiplierSymbol:
    """Reciprocal of vdot_weight with the joint zero mode projected out."""
    w = np.abs(grid.tau_bc()) + grid.xi2_bc()
    vals = np.zeros(w.shape)
    nz = w != 0
    vals[nz] = 1.0 / np.sqrt(w[nz])
    return MultiplierSymbol(grid, "VdotInverseWeight", vals)


def custom_symbol(grid: SpaceTimeGrid, values: np.ndarray, kind: str = "Custom") -> MultiplierSymbol:
    """Wrap an explicit FFT-ordered symbol table."""
    values = np.asarray(values)
    np.broadcast_shapes(values.shape, grid.shape)  # raises on mismatch
    return MultiplierSymbol(grid, kind, values)


# ---------------------------------------------------------------------------
# differential operators (spectral)


def gradient(u: Field) -> tuple:
    """Spectral gradient: one Field per spatial axis (multiplication by i*xi_c)."""
    g = u.grid
    u_hat = np.fft.fftn(u.data)
    return tuple(
        Field(g, np.fft.ifftn(1j * g.xi_bc(c) * u_hat)) for c in range(g.n)
    )


def divergence(components) -> Field:
    """Spectral divergence of an n-component vector field.

    Adjoint-consistent with gradient: <grad u, F> = -<u, div F> exactly in the
    discrete inner product.
    """
    components = tuple(components)
    g = components[0].grid
    if len(components) != g.n:
        raise ValueError(f"expected {g.n} components, got {len(components)}")
    out = np.zeros(g.shape, dtype=complex)
    for c, comp in enumerate(components):
        if comp.grid != g:
            raise ValueError("divergence components on mismatched grids")
        out += np.fft.ifftn(1j * g.xi_bc(c) * np.fft.fftn(comp.data))
    return Field(g, out)


def spatial_gradient(psi: SpatialField) -> tuple:
    """Spectral gradient of a single time slice."""
    g = psi.grid
    psi_hat = np.fft.fftn(psi.data)
    out = []
    for c in range(g.n):
        shape = [1] * g.n
        shape[c] = g.Nx
        xi_c = g.xi_fft.reshape(shape)
        out.append(SpatialField(g, np.fft.ifftn(1j * xi_c * psi_hat)))
    return tuple(out)


def time_derivative(u: Field) -> Field:
    """Spectral d/dt, symbol i*tau."""
    g = u.grid
    return Field(g, np.fft.ifftn(1j * g.tau_bc() * np.fft.fftn(u.data)))


# ---------------------------------------------------------------------------
# inner products


def inner(u: Field, v: Field) -> complex:
    """Discrete space-time inner product sum(u * conj(v)) * dt*dx^n."""
    return complex(np.vdot(v.data, u.data) * u.grid.cell)


def l2_norm(u: Field) -> float:
    return float(np.linalg.norm(u.data.ravel()) * np.sqrt(u.grid.cell))


def spatial_inner(a: SpatialField, b: SpatialField) -> complex:
    """Slice inner product sum(a * conj(b)) * dx^n."""
    return complex(np.vdot(b.data, a.data) * a.grid.dx ** a.grid.n)


def spatial_l2_norm(a: SpatialField) -> float:
    return float(np.linalg.norm(a.data.ravel()) * np.sqrt(a.grid.dx ** a.grid.n))
