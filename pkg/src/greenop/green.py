"""Green columns, propagator matrices, and the identities they must satisfy.

A Green column is the space-time orbit t -> G(t, s) psi obtained by solving
the periodic variational problem with a one-cell Dirac datum at time s.  The
raw discrete solve smears the jump at t = s over neighbouring slices, so every
column goes through a singularity exchange: subtract the discrete solution of
a constant-coefficient reference problem (same Dirac datum) and add back the
exact time-periodized reference orbit.  The reference shares the leading-order
singularity, so the swap restores the sharp jump without touching the smooth
remainder.

Propagator matrices collect column slices at a single readout time.  On top
of them sit the defect functionals: Chapman-Kolmogorov, adjoint symmetry,
causality, and the Duhamel representation of Cauchy solutions.
"""

import concurrent.futures
from dataclasses import dataclass, field

import numpy as np

from .lattice import Field, SpaceTimeGrid, SpatialField, divergence, spatial_l2_norm
from .operators import (
    CoefficientSet,
    CoercivityCertificate,
    coercivity_certificate,
    garding_constants,
)
from .solver import SolveReport, SolverConfig, solve_variational

__all__ = [
    "Trajectory",
    "PropagatorMatrix",
    "green_column",
    "pi_limits",
    "propagator",
    "chapman_kolmogorov_defect",
    "adjoint_defect",
    "causality_defect",
    "kappa_independence_defect",
    "solve_cauchy",
    "representation_defect",
]

PROPAGATOR_FLAGS = ("green", "fundamental")


@dataclass
class Trajectory:
    """One Green column: the orbit of a single source (s, psi).

    `data[k]` holds G(t_k, s) psi for the damped operator (kappa included in
    the solve); `right_limit` and `left_limit` are the slices one step after
    and before the source, which discretize the one-sided limits at t = s.
    """

    s: float
    source_index: int
    data: Field
    right_limit: SpatialField
    left_limit: SpatialField
    psi: SpatialField
    kappa: float
    adjoint: bool = False
    report: SolveReport | None = None

    @property
    def grid(self) -> SpaceTimeGrid:
        return self.data.grid

    def slice_at_time(self, t: float) -> SpatialField:
        return self.data.slice_at(self.grid.time_index(t))

    def jump_defect(self) -> float:
        """Relative defect in the jump relation (right minus left) = psi.

        For an adjoint column the orbit runs backwards, so the roles of the
        two one-sided limits swap.
        """
        jump = self.right_limit.data - self.left_limit.data
        if self.adjoint:
            jump = -jump
        scale = spatial_l2_norm(self.psi)
        if scale == 0.0:
            return spatial_l2_norm(SpatialField(self.grid, jump))
        return spatial_l2_norm(SpatialField(self.grid, jump - self.psi.data)) / scale


@dataclass
class PropagatorMatrix:
    """Matrix of the map psi -> G(t, s) psi in the cell-value basis.

    Dense form: entries[p, q] = (G(t, s) e_q)(x_p) with e_q the unit-value
    indicator of cell q, so applying the matrix to sampled values of psi
    reproduces G(t, s) psi and row sums measure constants preservation.
    Sketch form (entries has fewer columns than cells): column i is the
    response to the random probe stored in probes[:, i].
    """

    grid: SpaceTimeGrid
    s: float
    t: float
    kappa: float
    flag: str
    entries: np.ndarray
    probes: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if self.flag not in PROPAGATOR_FLAGS:
            raise ValueError(f"unknown propagator flag {self.flag!r}")
        self.entries = np.asarray(self.entries, dtype=complex)
        dim = self.grid.Nx ** self.grid.n
        if self.entries.ndim != 2 or self.entries.shape[0] != dim:
            raise ValueError(
                f"entries shape {self.entries.shape} does not match {dim} cells")
        if self.entries.shape[1] > dim:
            raise ValueError("more sketch columns than cells")
        if self.probes is not None:
            self.probes = np.asarray(self.probes, dtype=complex)
            if self.probes.shape != self.entries.shape:
                raise ValueError("probes shape must match entries shape")

    @property
    def dim(self) -> int:
        return self.grid.Nx ** self.grid.n

    @property
    def is_sketch(self) -> bool:
        return self.entries.shape[1] < self.dim

    def apply(self, psi: SpatialField) -> SpatialField:
        if self.is_sketch:
            raise ValueError("sketched propagator cannot be applied to fields")
        if psi.grid != self.grid:
            raise ValueError("field lives on a different grid")
        out = self.entries @ psi.data.ravel()
        return SpatialField(self.grid, out.reshape(self.grid.spatial_shape))

    def operator_norm(self) -> float:
        """Largest singular value (dense); Frobenius over probes for sketches."""
        if self.is_sketch:
            return float(np.linalg.norm(self.entries, "fro") / np.sqrt(self.entries.shape[1]))
        return float(np.linalg.norm(self.entries, 2))


def _spatial_fft(values: np.ndarray) -> np.ndarray:
    return np.fft.fftn(values)


def _spatial_ifft(values: np.ndarray, axes=None) -> np.ndarray:
    if axes is None:
        return np.fft.ifftn(values)
    return np.fft.ifftn(values, axes=axes)


def _dirac_datum(grid: SpaceTimeGrid, source_index: int, psi: SpatialField) -> Field:
    """Cell-indicator Dirac in time: one slice carrying psi / dt.

    Under the lattice quadrature this datum has exactly the DFT coefficients
    e^{-i tau_k s} psi_hat_j of the point source, so the discrete reference
    solve below responds to the same right-hand side as the exact one.
    """
    data = np.zeros(grid.shape, dtype=complex)
    data[source_index] = psi.data / grid.dt
    return Field(grid, data)


def _reference_diffusivity(coeffs: CoefficientSet) -> float:
    bounds = garding_constants(coeffs)
    return 0.5 * (bounds.lam + bounds.Lam)


def _reference_discrete(grid: SpaceTimeGrid, datum: Field, kappa: float,
                        c_ref: float, sign: float) -> np.ndarray:
    """Periodic discrete solve of sign*d_t + kappa + c_ref*(-Laplace)."""
    denom = kappa + sign * 1j * grid.tau_bc() + c_ref * grid.xi2_bc()
    denom = np.broadcast_to(denom, grid.shape).copy()
    fhat = np.fft.fftn(datum.data)
    out = np.zeros_like(fhat)
    live = np.abs(denom) > 0.0
    out[live] = fhat[live] / denom[live]
    return np.fft.ifftn(out)


def _reference_exact(grid: SpaceTimeGrid, source_index: int, psi: SpatialField,
                     kappa: float, c_ref: float, sign: float) -> np.ndarray:
    """Exact time-periodized orbit of the reference operator.

    Per spatial mode the damped ODE u' + a u = delta_s (a = kappa +
    c_ref |xi|^2) has the periodic solution e^{-a e}/(1 - e^{-a Lt}) at
    elapsed time e in (0, Lt).  The source slice is read as the midpoint
    (1 + w)/(2 (1 - w)), matching the two-sided average of the jump.  The
    undamped zero mode (a = 0) periodizes to the sawtooth 1/2 - e/Lt whose
    source slice value 0 keeps the same midpoint convention; with that
    choice the sampled sawtooth is exactly mean-free over the period.
    `sign = -1` runs the orbit backwards (adjoint reference).
    """
    Nt, Lt, dt = grid.Nt, grid.Lt, grid.dt
    steps = np.arange(Nt)
    if sign > 0:
        elapsed = ((steps - source_index) % Nt) * dt
    else:
        elapsed = ((source_index - steps) % Nt) * dt

    a = np.broadcast_to(kappa + c_ref * grid.xi2_bc()[0], grid.spatial_shape)
    amp = np.zeros((Nt,) + grid.spatial_shape)
    damped = a > 0.0
    if np.any(damped):
        ad = a[damped]
        w = np.exp(-ad * Lt)
        amp[:, damped] = np.exp(-elapsed[:, None] * ad[None, :]) / (1.0 - w)
        amp[source_index, damped] = (1.0 + w) / (2.0 * (1.0 - w))
    if np.any(~damped):
        amp[:, ~damped] = (0.5 - elapsed / Lt)[:, None]
        amp[source_index, ~damped] = 0.0

    psi_hat = _spatial_fft(psi.data)
    return _spatial_ifft(amp * psi_hat[None], axes=tuple(range(1, 1 + grid.n)))


def green_column(coeffs: CoefficientSet, cfg: SolverConfig, s: float,
                 psi: SpatialField, certificate: CoercivityCertificate | None = None,
                 adjoint: bool = False, exchange: bool = True,
                 force: bool = False) -> Trajectory:
    """Solve for the Green column of the source (s, psi).

    With `adjoint=True` the column belongs to the backward dual problem
    (-d_t + L^* + kappa), whose orbit propagates towards earlier times.
    `exchange=False` skips the singularity swap and returns the raw discrete
    solve; the defect helpers use that for linearity cross-checks.
    """
    grid = coeffs.grid
    if psi.grid != grid:
        raise ValueError("source slice lives on a different grid")
    ks = grid.time_index(s)
    datum = _dirac_datum(grid, ks, psi)
    u, report = solve_variational(coeffs, datum, cfg, certificate=certificate,
                                  force=force, adjoint=adjoint)
    if not report.converged:
        raise RuntimeError(
            f"green column solve did not converge (residual {report.residual:.3e})")

    if exchange:
        sign = -1.0 if adjoint else 1.0
        c_ref = _reference_diffusivity(coeffs)
        disc = _reference_discrete(grid, datum, cfg.kappa, c_ref, sign)
        exact = _reference_exact(grid, ks, psi, cfg.kappa, c_ref, sign)
        values = u.data - disc + exact
        if cfg.mode == "homogeneous" and cfg.kappa == 0.0:
            # the solver works on the zero-mean complement; keep the swap there
            values = values - values.mean()
        u = Field(grid, values)

    return Trajectory(
        s=float(ks * grid.dt),
        source_index=ks,
        data=u,
        right_limit=u.slice_at(ks + 1),
        left_limit=u.slice_at(ks - 1),
        psi=psi.copy(),
        kappa=cfg.kappa,
        adjoint=adjoint,
        report=report,
    )


def pi_limits(traj: Trajectory) -> tuple[SpatialField, SpatialField]:
    """One-sided limit fields (Pi^+ psi, Pi^- psi) of a column at its source."""
    return traj.right_limit, traj.left_limit


def _unit_indicator(grid: SpaceTimeGrid, flat_index: int) -> SpatialField:
    values = np.zeros(grid.spatial_shape, dtype=complex)
    values.ravel()[flat_index] = 1.0
    return SpatialField(grid, values)


def _sketch_probes(grid: SpaceTimeGrid, count: int, seed: int) -> np.ndarray:
    dim = grid.Nx ** grid.n
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EDC]))
    probes = rng.standard_normal((dim, count)) + 1j * rng.standard_normal((dim, count))
    return probes / np.linalg.norm(probes, axis=0)


def propagator(coeffs: CoefficientSet, cfg: SolverConfig, s: float, t: float,
               flag: str = "green", certificate: CoercivityCertificate | None = None,
               adjoint: bool = False, sketch: int | None = None, seed: int = 0,
               threads: int = 1, force: bool = False) -> PropagatorMatrix:
    """Assemble the matrix of psi -> G(t, s) psi by column solves.

    Dense assembly solves one column per lattice cell (unit-value indicator
    sources); `sketch=k` instead records the responses to k random unit
    probes, which is the only affordable route for n >= 2.  The fundamental
    flag rescales by e^{kappa (t - s)}, turning the damped family into the
    undamped one it certifies.  All columns share one coercivity certificate.
    """
    grid = coeffs.grid
    if flag not in PROPAGATOR_FLAGS:
        raise ValueError(f"unknown propagator flag {flag!r}")
    ks, kt = grid.time_index(s), grid.time_index(t)
    if ks == kt:
        raise ValueError("propagator readout time must differ from source time")
    if certificate is None:
        certificate = coercivity_certificate(
            coeffs, kappa=cfg.kappa, delta=cfg.delta, mode=cfg.mode)

    dim = grid.Nx ** grid.n
    if sketch is not None:
        if not 1 <= sketch < dim:
            raise ValueError("sketch size must be in [1, cells)")
        probes = _sketch_probes(grid, sketch, seed)
        sources = [SpatialField(grid, probes[:, i].reshape(grid.spatial_shape))
                   for i in range(sketch)]
    else:
        probes = None
        sources = [_unit_indicator(grid, q) for q in range(dim)]

    def column(src: SpatialField) -> np.ndarray:
        traj = green_column(coeffs, cfg, s, src, certificate=certificate,
                            adjoint=adjoint, force=force)
        return traj.data.data[kt].ravel()

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            cols = list(pool.map(column, sources))
    else:
        cols = [column(src) for src in sources]

    entries = np.stack(cols, axis=1)
    if flag == "fundamental":
        entries = entries * np.exp(cfg.kappa * (t - s))
    return PropagatorMatrix(grid=grid, s=float(ks * grid.dt), t=float(kt * grid.dt),
                            kappa=cfg.kappa, flag=flag, entries=entries, probes=probes)


def _check_compatible(a: PropagatorMatrix, b: PropagatorMatrix) -> None:
    if a.grid != b.grid:
        raise ValueError("propagators live on different grids")
    if a.kappa != b.kappa:
        raise ValueError(f"damping mismatch: {a.kappa} vs {b.kappa}")
    if a.flag != b.flag:
        raise ValueError(f"flag mismatch: {a.flag} vs {b.flag}")


def chapman_kolmogorov_defect(Gts: PropagatorMatrix, Gtr: PropagatorMatrix,
                              Grs: PropagatorMatrix) -> float:
    """Relative defect of G(t,s) = G(t,r) G(r,s) with r strictly between.

    Dense inputs compare in operator norm.  If the outer factors are
    sketches (same probes), the middle factor must be dense and the defect
    is measured in the probe Frobenius norm.
    """
    _check_compatible(Gts, Gtr)
    _check_compatible(Gts, Grs)
    r = Grs.t
    if Gtr.s != r:
        raise ValueError("factor times do not chain: G(t,r) G(r,s)")
    if Gts.s != Grs.s or Gts.t != Gtr.t:
        raise ValueError("outer times do not match the composed factors")
    lo, hi = min(Gts.s, Gts.t), max(Gts.s, Gts.t)
    if not lo < r < hi:
        raise ValueError("intermediate time must lie strictly between s and t")

    if Gts.is_sketch or Grs.is_sketch:
        if Gtr.is_sketch:
            raise ValueError("middle Chapman-Kolmogorov factor must be dense")
        if Gts.probes is None or Grs.probes is None \
                or not np.array_equal(Gts.probes, Grs.probes):
            raise ValueError("sketched factors must share identical probes")
        diff = Gts.entries - Gtr.entries @ Grs.entries
        return float(np.linalg.norm(diff, "fro") / np.linalg.norm(Gts.entries, "fro"))

    diff = Gts.entries - Gtr.entries @ Grs.entries
    return float(np.linalg.norm(diff, 2) / np.linalg.norm(Gts.entries, 2))


def adjoint_defect(Gts: PropagatorMatrix, Gst_dual: PropagatorMatrix) -> float:
    """Relative defect of G(t,s) = G~(s,t)^* against the dual propagator.

    `Gst_dual` must be assembled from adjoint column solves with source time
    t and readout s.  In the cell-value basis the L^2 pairing makes the
    relation a plain conjugate transpose, so dense inputs compare directly;
    a sketched pair compares the two cross-Grams P^* G(t,s) Q against
    (Q^* G~(s,t) P)^*.
    """
    _check_compatible(Gts, Gst_dual)
    if Gst_dual.s != Gts.t or Gst_dual.t != Gts.s:
        raise ValueError("dual propagator must run from t back to s")

    if Gts.is_sketch or Gst_dual.is_sketch:
        if not (Gts.is_sketch and Gst_dual.is_sketch):
            raise ValueError("sketched adjoint check needs both factors sketched")
        cross = Gts.probes.conj().T @ Gst_dual.entries
        dual_cross = Gst_dual.probes.conj().T @ Gts.entries
        diff = cross - dual_cross.conj().T
        return float(np.linalg.norm(diff, "fro") / max(np.linalg.norm(dual_cross, "fro"), 1e-300))

    diff = Gts.entries - Gst_dual.entries.conj().T
    return float(np.linalg.norm(diff, 2) / np.linalg.norm(Gts.entries, 2))


def causality_defect(traj: Trajectory) -> float:
    """Largest relative slice norm on the pre-source window.

    The tested window is wrapped elapsed time in [0.9 Lt, Lt - dt], i.e. the
    tenth of the period just before the source.  For a damped causal column
    only the periodic wrap-around e^{-kappa elapsed} survives there; an
    adjoint (backward) column puts its whole orbit in the window and scores
    O(1), which is the intended detection.
    """
    grid = traj.grid
    scale = spatial_l2_norm(traj.psi)
    if scale == 0.0:
        return 0.0
    steps = np.arange(grid.Nt)
    if traj.adjoint:
        elapsed = ((traj.source_index - steps) % grid.Nt) * grid.dt
    else:
        elapsed = ((steps - traj.source_index) % grid.Nt) * grid.dt
    window = elapsed >= 0.9 * grid.Lt
    worst = 0.0
    for k in np.nonzero(window)[0]:
        worst = max(worst, spatial_l2_norm(traj.data.slice_at(int(k))) / scale)
    return worst


def kappa_independence_defect(coeffs: CoefficientSet, cfg: SolverConfig,
                              kappa_other: float, s: float, t: float,
                              psi: SpatialField, force: bool = False) -> float:
    """Relative mismatch of the fundamental solution across two dampings.

    Gamma(t, s) = e^{kappa (t - s)} G_kappa(t, s) must not depend on kappa
    (up to the wrap-around tail e^{-kappa Lt} and solver tolerance).
    """
    if kappa_other <= 0 and cfg.mode == "inhomogeneous":
        raise ValueError("inhomogeneous comparison needs positive damping")
    cfg2 = SolverConfig(kappa=kappa_other, delta=cfg.delta, tol=cfg.tol,
                        max_iter=cfg.max_iter, mode=cfg.mode)
    t1 = green_column(coeffs, cfg, s, psi, force=force)
    t2 = green_column(coeffs, cfg2, s, psi, force=force)
    grid = coeffs.grid
    kt = grid.time_index(t)
    wrap = float((kt - grid.time_index(s)) % grid.Nt) * grid.dt
    g1 = t1.data.data[kt] * np.exp(cfg.kappa * wrap)
    g2 = t2.data.data[kt] * np.exp(kappa_other * wrap)
    num = spatial_l2_norm(SpatialField(grid, g1 - g2))
    den = spatial_l2_norm(SpatialField(grid, g1))
    return num / max(den, 1e-300)


def _extend_coefficients(coeffs: CoefficientSet, keep: np.ndarray) -> CoefficientSet:
    """Freeze coefficients to the canonical extension outside the kept slices.

    Outside [0, T] the operator becomes d_t + kappa - Laplace: principal part
    the identity, lower order zero.  Coefficient arrays must already carry a
    full time axis so the mask can act per slice.
    """
    grid = coeffs.grid
    n, Nt = grid.n, grid.Nt

    def full(arr: np.ndarray, tail: tuple) -> np.ndarray:
        return np.ascontiguousarray(np.broadcast_to(arr, (Nt,) + grid.spatial_shape + tail))

    mask = keep.reshape((Nt,) + (1,) * n)
    A = full(coeffs.A, (n, n))
    eye = np.eye(n)
    A = A * mask[..., None, None] + eye * (1.0 - mask[..., None, None])
    avec = full(coeffs.avec, (n,)) * mask[..., None]
    bvec = full(coeffs.bvec, (n,)) * mask[..., None]
    a0 = full(coeffs.a0, ()) * mask
    return CoefficientSet(grid=grid, A=A, avec=avec, bvec=bvec, a0=a0)


def solve_cauchy(coeffs: CoefficientSet, psi: SpatialField, T: float,
                 cfg: SolverConfig, F: tuple | None = None,
                 g: Field | None = None, h: Field | None = None,
                 certificate: CoercivityCertificate | None = None,
                 force: bool = False) -> tuple[Field, SolveReport]:
    """Initial-value solve on [0, T] via the damped periodic problem.

    The initial datum enters as a Dirac source at t = 0 and the periodic
    orbit of the canonically extended operator is damped by kappa, so the
    wrap-around contaminates [0, T] only at size e^{-kappa Lt}; the config
    must keep kappa * Lt >= ln(1/tol).  The returned field is the undamped
    solution e^{kappa t} v, zeroed outside [0, T].  Slice 0 carries the
    midpoint reading of the jump; the initial value is taken up at slice 1
    as a right limit.

    `F` (tuple of n Fields), `g`, and `h` add the divergence-form and plain
    interior sources; they must be supported in [0, T].
    """
    grid = coeffs.grid
    if cfg.mode != "inhomogeneous":
        raise ValueError("Cauchy solves need the inhomogeneous (damped) form")
    if cfg.kappa * grid.Lt < np.log(1.0 / cfg.tol) - 1e-9:
        raise ValueError(
            f"damping too weak: kappa*Lt = {cfg.kappa * grid.Lt:.3f} < ln(1/tol)")
    kT = grid.time_index(T)
    if kT == 0:
        raise ValueError("horizon T must be positive and below the period")

    times = np.arange(grid.Nt) * grid.dt
    keep = (times <= kT * grid.dt + 1e-12).astype(float)
    ext = _extend_coefficients(coeffs, keep)

    # substituting u = e^{kappa t} v sends the physical source g to e^{-kappa t} g
    decay = np.exp(-cfg.kappa * times).reshape((grid.Nt,) + (1,) * grid.n)
    rhs = _dirac_datum(grid, 0, psi).data
    outside = keep == 0.0
    for name, extra in (("g", g), ("h", h)):
        if extra is None:
            continue
        if extra.grid != grid:
            raise ValueError(f"source {name} lives on a different grid")
        if np.any(np.abs(extra.data[outside]) > 1e-12):
            raise ValueError(f"source {name} is not supported in [0, T]")
        rhs = rhs + decay * extra.data
    if F is not None:
        if len(F) != grid.n:
            raise ValueError("divergence-form source needs one field per axis")
        for Fc in F:
            if Fc.grid != grid:
                raise ValueError("divergence-form source lives on a different grid")
            if np.any(np.abs(Fc.data[outside]) > 1e-12):
                raise ValueError("divergence-form source is not supported in [0, T]")
        scaled = tuple(Field(grid, decay * Fc.data) for Fc in F)
        rhs = rhs - divergence(scaled).data

    v, report = solve_variational(ext, Field(grid, rhs), cfg,
                                  certificate=certificate, force=force)
    if not report.converged:
        raise RuntimeError(
            f"Cauchy solve did not converge (residual {report.residual:.3e})")

    # singularity exchange for the initial-datum response only; the
    # distributed sources are smooth in time and need no correction
    values = v.data
    if spatial_l2_norm(psi) > 0.0:
        c_ref = _reference_diffusivity(ext)
        datum = _dirac_datum(grid, 0, psi)
        values = values - _reference_discrete(grid, datum, cfg.kappa, c_ref, 1.0)
        values = values + _reference_exact(grid, 0, psi, cfg.kappa, c_ref, 1.0)

    growth = np.exp(cfg.kappa * times).reshape((grid.Nt,) + (1,) * grid.n)
    values = values * growth
    values[kT + 1:] = 0.0
    return Field(grid, values), report


def representation_defect(coeffs: CoefficientSet, psi: SpatialField, T: float,
                          cfg: SolverConfig, t_check: float,
                          g: Field | None = None, h: Field | None = None,
                          certificate: CoercivityCertificate | None = None) -> float:
    """Compare a Cauchy slice against its Duhamel propagator quadrature.

    The direct solve at t is matched against Gamma(t, 0) psi plus the
    quadrature sum_s Gamma(t, s) f(s) dt over the source support.  The
    source columns are raw (no singularity exchange): the discrete system
    satisfies the Duhamel identity exactly by linearity, whereas per-column
    exchange corrections do not add up to the direct solve once
    e^{kappa (t - s)} amplifies their tails.  The initial-datum column is
    exchanged, mirroring what solve_cauchy does to its psi response, so the
    correction cancels between the two routes.  Slices after t enter with
    the signed factor e^{-kappa (s - t)} and contribute only the anti-causal
    remnant of the discretization, which exactness requires keeping.
    """
    grid = coeffs.grid
    kt = grid.time_index(t_check)
    if not 0 < kt <= grid.time_index(T):
        raise ValueError("checked time must lie in (0, T]")

    u, _ = solve_cauchy(coeffs, psi, T, cfg, g=g, h=h, certificate=certificate)
    direct = u.data[kt]

    times = np.arange(grid.Nt) * grid.dt
    keep = (times <= grid.time_index(T) * grid.dt + 1e-12).astype(float)
    ext = _extend_coefficients(coeffs, keep)
    if certificate is None:
        certificate = coercivity_certificate(
            ext, kappa=cfg.kappa, delta=cfg.delta, mode=cfg.mode)

    def column_slice(ksrc: int, slice_values: np.ndarray,
                     exchange: bool = False) -> np.ndarray:
        src = SpatialField(grid, slice_values)
        traj = green_column(ext, cfg, ksrc * grid.dt, src,
                            certificate=certificate, exchange=exchange)
        return traj.data.data[kt] * np.exp(cfg.kappa * (kt - ksrc) * grid.dt)

    rep = column_slice(0, psi.data, exchange=True)
    for m in range(1, grid.time_index(T) + 1):
        slice_src = np.zeros(grid.spatial_shape, dtype=complex)
        if g is not None:
            slice_src = slice_src + g.data[m]
        if h is not None:
            slice_src = slice_src + h.data[m]
        if np.any(slice_src):
            rep = rep + column_slice(m, slice_src) * grid.dt

    num = spatial_l2_norm(SpatialField(grid, direct - rep))
    den = spatial_l2_norm(SpatialField(grid, direct))
    return num / max(den, 1e-300)
