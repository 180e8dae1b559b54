r"""Coefficient sets, weak-form pairings, ellipticity, and hidden coercivity.

The operator under study is

    L u = -div(A grad u + avec u) + bvec . grad u + a0 u

applied pseudo-spectrally: derivatives in frequency space, coefficient
products at lattice points.  The hidden-coercivity certificate tests
(d_t + L + kappa) against (Id + delta H_t)u on random band-limited probes,
which is the quadratic form whose lower bound makes the whole construction
invertible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import (
    Field,
    SpaceTimeGrid,
    SpatialField,
    apply_multiplier,
    divergence,
    gradient,
    hilbert_t,
    inner,
    spatial_gradient,
    time_derivative,
)
from .norms import v_norm, vdot_norm

__all__ = (
    "CoefficientSet",
    "EllipticityBounds",
    "CoercivityCertificate",
    "identity_matrix_field",
    "apply_L",
    "apply_H",
    "pairing",
    "garding_constants",
    "davies_conjugate",
    "coercivity_certificate",
    "probe_field",
)


def identity_matrix_field(grid: SpaceTimeGrid) -> np.ndarray:
    """Constant identity matrix, broadcastable over the lattice."""
    n = grid.n
    return np.broadcast_to(np.eye(n, dtype=complex), (1,) * (1 + n) + (n, n))


@dataclass
class CoefficientSet:
    """Coefficient fields of L, each broadcastable over the space-time lattice.

    Shapes: A has trailing axes (n, n), avec and bvec trailing axis (n,), a0
    none.  Constant-in-(t,x) coefficients may be stored with size-one leading
    axes; they are never expanded in memory.
    """

    grid: SpaceTimeGrid
    A: np.ndarray
    avec: np.ndarray
    bvec: np.ndarray
    a0: np.ndarray

    def __post_init__(self):
        g = self.grid
        n = g.n
        self.A = np.asarray(self.A, dtype=complex)
        self.avec = np.asarray(self.avec, dtype=complex)
        self.bvec = np.asarray(self.bvec, dtype=complex)
        self.a0 = np.asarray(self.a0, dtype=complex)
        checks = (
            ("A", self.A, g.shape + (n, n)),
            ("avec", self.avec, g.shape + (n,)),
            ("bvec", self.bvec, g.shape + (n,)),
            ("a0", self.a0, g.shape),
        )
        for name, arr, target in checks:
            try:
                np.broadcast_shapes(arr.shape, target)
            except ValueError as exc:
                raise ValueError(f"{name} shape {arr.shape} does not broadcast "
                                 f"to {target}") from exc
            if arr.ndim != len(target):
                raise ValueError(f"{name} must have {len(target)} axes "
                                 f"(size-one axes for constant directions)")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")

    def adjoint(self) -> "CoefficientSet":
        """Coefficients of the formal adjoint L*."""
        return CoefficientSet(
            grid=self.grid,
            A=np.conj(np.swapaxes(self.A, -1, -2)),
            avec=np.conj(self.bvec),
            bvec=np.conj(self.avec),
            a0=np.conj(self.a0),
        )

    def is_trivial_lower_order(self) -> bool:
        return (np.abs(self.avec).max() == 0 and np.abs(self.bvec).max() == 0
                and np.abs(self.a0).max() == 0)


@dataclass(frozen=True)
class EllipticityBounds:
    """Pointwise Garding constants: lam = min eigenvalue of the Hermitian
    part, Lam = max spectral norm, both over all lattice points."""

    lam: float
    Lam: float

    def __post_init__(self):
        if not (self.lam <= self.Lam < np.inf):
            raise ValueError("requires lam <= Lam < inf")

    @property
    def elliptic(self) -> bool:
        return self.lam > 0

    @property
    def delta(self) -> float:
        """The coercivity parameter lam/(1+Lam)."""
        return self.lam / (1.0 + self.Lam)


@dataclass(frozen=True)
class CoercivityCertificate:
    """Outcome of the probe-based hidden-coercivity check."""

    delta: float
    kappa: float
    mode: str
    min_ratio: float
    probes: int
    threshold: float
    passed: bool
    seed: int


# ---------------------------------------------------------------------------
# operator application and pairings


def apply_L(coeffs: CoefficientSet, u: Field) -> Field:
    """Pseudo-spectral application of L to a field."""
    g = coeffs.grid
    if u.grid != g:
        raise ValueError("field and coefficients on different grids")
    n = g.n
    grads = gradient(u)
    flux = []
    for c in range(n):
        # products with the full-shape field keep every accumulator full-shape
        acc = coeffs.avec[..., c] * u.data
        for j in range(n):
            acc = acc + coeffs.A[..., c, j] * grads[j].data
        flux.append(Field(g, acc))
    out = -divergence(flux).data
    for c in range(n):
        out = out + coeffs.bvec[..., c] * grads[c].data
    out = out + coeffs.a0 * u.data
    return Field(g, out)


def apply_H(coeffs: CoefficientSet, u: Field, kappa: float = 0.0) -> Field:
    """(d_t + L + kappa) u."""
    out = time_derivative(u).data + apply_L(coeffs, u).data
    if kappa:
        out = out + kappa * u.data
    return Field(coeffs.grid, out)


def pairing(coeffs: CoefficientSet, u: Field, v: Field, kappa: float = 0.0) -> complex:
    """Sesquilinear form <d_t u, v> + <A grad u + avec u, grad v>
    + <bvec . grad u + a0 u, v> + kappa <u, v>."""
    g = coeffs.grid
    if u.grid != g or v.grid != g:
        raise ValueError("pairing arguments on different grids")
    n = g.n
    gu = gradient(u)
    gv = gradient(v)
    total = inner(time_derivative(u), v)
    for c in range(n):
        flux_c = coeffs.avec[..., c] * u.data
        for j in range(n):
            flux_c = flux_c + coeffs.A[..., c, j] * gu[j].data
        total += complex(np.vdot(gv[c].data, np.broadcast_to(flux_c, g.shape)) * g.cell)
    lower = coeffs.a0 * u.data
    for c in range(n):
        lower = lower + coeffs.bvec[..., c] * gu[c].data
    total += complex(np.vdot(v.data, np.broadcast_to(lower, g.shape)) * g.cell)
    if kappa:
        total += kappa * inner(u, v)
    return total


def garding_constants(coeffs: CoefficientSet) -> EllipticityBounds:
    """Pointwise ellipticity bounds of A over the lattice.

    The lower constant is the smallest eigenvalue of the Hermitian part
    (A+A^H)/2, which implies the integrated lower bound used by the
    coercivity argument; lam <= 0 is allowed and flags a non-elliptic set.
    """
    A = coeffs.A
    herm = 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))
    lam = float(np.linalg.eigvalsh(herm)[..., 0].min())
    Lam = float(np.linalg.svd(A, compute_uv=False)[..., 0].max())
    return EllipticityBounds(lam=lam, Lam=Lam)


def davies_conjugate(coeffs: CoefficientSet, h: SpatialField,
                     grad_h: tuple | None = None) -> CoefficientSet:
    """Coefficients of e^h (d_t + L) e^{-h} for a real time-independent h.

    The elliptic part is unchanged; the lower-order fields pick up
    a += -A grad h, b += A^T grad h, a0 += -A grad h . grad h + (a - b) . grad h.
    grad_h may be supplied analytically (tuple of SpatialFields) for
    piecewise-affine h whose spectral gradient would ring.
    """
    g = coeffs.grid
    if np.abs(h.data.imag).max() > 0:
        raise ValueError("conjugation weight h must be real-valued")
    if grad_h is None:
        grad_h = spatial_gradient(h)
    n = g.n
    # time-independent spatial gradients, broadcast over the time axis
    gh = [np.asarray(grad_h[c].data)[None, ...] for c in range(n)]
    if any(np.abs(comp.imag).max() > 1e-12 * (1 + np.abs(comp).max()) for comp in gh):
        raise ValueError("grad h must be real-valued")
    gh = [comp.real for comp in gh]

    Agh = []  # (A grad h)_c
    Atgh = []  # (A^T grad h)_c
    for c in range(n):
        acc = 0.0
        acc_t = 0.0
        for j in range(n):
            acc = acc + coeffs.A[..., c, j] * gh[j]
            acc_t = acc_t + coeffs.A[..., j, c] * gh[j]
        Agh.append(acc)
        Atgh.append(acc_t)

    a0_extra = 0.0
    for c in range(n):
        a0_extra = a0_extra - Agh[c] * gh[c]
        a0_extra = a0_extra + (coeffs.avec[..., c] - coeffs.bvec[..., c]) * gh[c]

    avec_new = np.stack([coeffs.avec[..., c] - Agh[c] for c in range(n)], axis=-1)
    bvec_new = np.stack([coeffs.bvec[..., c] + Atgh[c] for c in range(n)], axis=-1)
    return CoefficientSet(
        grid=g,
        A=coeffs.A,
        avec=avec_new,
        bvec=bvec_new,
        a0=coeffs.a0 + a0_extra,
    )


# ---------------------------------------------------------------------------
# hidden coercivity


def probe_field(grid: SpaceTimeGrid, rng, mode: str = "homogeneous") -> Field:
    """Random complex Gaussian field band-limited to a quarter of the grid.

    Frequencies are restricted to |k| <= Nt/4, |j| <= Nx/4 so coefficient
    products stay clear of aliasing; the probe is normalized to unit
    variational norm (homogeneous or inhomogeneous).
    """
    kcap, jcap = grid.Nt // 4, grid.Nx // 4
    kidx = np.fft.fftfreq(grid.Nt, d=1.0 / grid.Nt).astype(int)
    jidx = np.fft.fftfreq(grid.Nx, d=1.0 / grid.Nx).astype(int)
    mask = (np.abs(kidx) <= kcap).reshape((grid.Nt,) + (1,) * grid.n)
    for c in range(grid.n):
        shape = [1] * (1 + grid.n)
        shape[1 + c] = grid.Nx
        mask = mask & (np.abs(jidx) <= jcap).reshape(shape)
    u_hat = np.zeros(grid.shape, dtype=complex)
    count = int(mask.sum())
    u_hat[mask] = rng.standard_normal(count) + 1j * rng.standard_normal(count)
    u_hat[(0,) * (1 + grid.n)] = 0.0
    u = Field(grid, np.fft.ifftn(u_hat))
    norm = vdot_norm(u) if mode == "homogeneous" else v_norm(u)
    u.data /= norm
    return u


def coercivity_certificate(coeffs: CoefficientSet, kappa: float, delta: float,
                           probes: int = 32, seed: int = 0,
                           mode: str = "homogeneous",
                           threshold: float | None = None) -> CoercivityCertificate:
    """Probe-based lower bound for Re <(H+kappa)u, (Id+delta H_t)u>.

    The ratio against ||u||^2 in the homogeneous (or inhomogeneous) norm is
    minimized over `probes` independent band-limited random fields; the
    default pass threshold is delta/2 (homogeneous) or delta/4
    (inhomogeneous).  Deterministic for a given seed.
    """
    if probes < 1:
        raise ValueError("need at least one probe")
    if delta <= 0:
        raise ValueError("delta must be positive")
    if mode not in ("homogeneous", "inhomogeneous"):
        raise ValueError(f"unknown mode {mode!r}")
    if threshold is None:
        threshold = delta / 2 if mode == "homogeneous" else delta / 4
    g = coeffs.grid
    ht = hilbert_t(g)
    ratios = []
    for sub in np.random.SeedSequence(seed).spawn(probes):
        rng = np.random.default_rng(sub)
        u = probe_field(g, rng, mode=mode)
        hu = apply_H(coeffs, u, kappa=kappa)
        test = Field(g, u.data + delta * apply_multiplier(u, ht).data)
        num = np.real(inner(hu, test))
        denom = (vdot_norm(u) if mode == "homogeneous" else v_norm(u)) ** 2
        ratios.append(num / denom)
    min_ratio = float(min(ratios))
    return CoercivityCertificate(
        delta=delta, kappa=kappa, mode=mode, min_ratio=min_ratio,
        probes=probes, threshold=float(threshold),
        passed=bool(min_ratio >= threshold), seed=seed,
    )
