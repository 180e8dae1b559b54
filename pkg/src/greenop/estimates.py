"""Quantitative decay verification for the assembled flow.

Three layers on top of the green module: localized L2 decay between spatial
regions (measured against the exponential profile C e^{-d^2/4c0(t-s)+w(t-s)}
and reduced, via conjugation by e^h, to plain uniform boundedness), pointwise
Gaussian kernel bounds assembled from a measured local-boundedness constant,
and the inverse-square potential scenario that probes the coercivity
threshold through the discrete Hardy quotient.

All sweeps are pure functions of their inputs and a seed; probe vectors are
drawn from named substreams so repeated calls agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .lattice import Field, SpaceTimeGrid, SpatialField, spatial_gradient, spatial_l2_norm
from .operators import CoefficientSet, coercivity_certificate, davies_conjugate
from .solver import SolverConfig
from .green import green_column
from .generators import coulomb_potential

__all__ = (
    "RegionMask",
    "DecayFit",
    "GaussianBoundParams",
    "CoulombReport",
    "ball_mask",
    "masked_l2",
    "offdiagonal_profile",
    "davies_bound_check",
    "required_kappa",
    "gaussian_mu",
    "gaussian_bound_check",
    "gaussian_entry_bounds",
    "measure_local_bound",
    "hardy_quotient",
    "coulomb_scenario",
)


# ---------------------------------------------------------------------------
# spatial regions


@dataclass
class RegionMask:
    """Boolean cell selection on the spatial lattice of a grid."""

    grid: SpaceTimeGrid
    mask: np.ndarray

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.grid.spatial_shape:
            raise ValueError(f"mask shape {self.mask.shape} does not match "
                             f"the spatial lattice {self.grid.spatial_shape}")
        if not self.mask.any():
            raise ValueError("region mask selects no cells")

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    def points(self) -> np.ndarray:
        """Integer cell indices of the region, shape (size, n)."""
        return np.argwhere(self.mask)

    def distance(self, other: "RegionMask") -> float:
        """Smallest periodic distance between cells of the two regions."""
        if other.grid != self.grid:
            raise ValueError("regions live on different grids")
        g = self.grid
        p = self.points()[:, None, :].astype(float) * g.dx
        q = other.points()[None, :, :].astype(float) * g.dx
        diff = np.abs(p - q)
        diff = np.minimum(diff, g.Lx - diff)
        return float(np.sqrt((diff ** 2).sum(axis=-1)).min())


def ball_mask(grid: SpaceTimeGrid, center, radius: float) -> RegionMask:
    """Cells within periodic distance `radius` of a point (torus ball)."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.shape != (grid.n,):
        raise ValueError(f"center needs {grid.n} coordinates")
    d2 = _torus_dist2(grid, center)
    return RegionMask(grid, d2 <= radius ** 2 + 1e-12)


def _torus_dist2(grid: SpaceTimeGrid, center: np.ndarray) -> np.ndarray:
    """Squared periodic distance of every cell from `center`, spatial shape."""
    out = np.zeros(grid.spatial_shape)
    for c in range(grid.n):
        d = np.abs(grid.xs - center[c])
        d = np.minimum(d, grid.Lx - d)
        shape = [1] * grid.n
        shape[c] = grid.Nx
        out = out + d.reshape(shape) ** 2
    return out


def masked_l2(psi: SpatialField, region: RegionMask) -> float:
    """L2 norm of a slice restricted to a region."""
    if psi.grid != region.grid:
        raise ValueError("slice and region live on different grids")
    g = psi.grid
    return float(np.sqrt(np.sum(np.abs(psi.data[region.mask]) ** 2) * g.dx ** g.n))


# ---------------------------------------------------------------------------
# off-diagonal decay profile


@dataclass(frozen=True)
class DecayFit:
    """Exponential decay envelope C e^{-d^2/4c0(t-s) + omega (t-s)}."""

    C: float
    c0: float
    omega: float
    r2: float

    def __post_init__(self):
        if not (self.C > 0 and self.c0 > 0):
            raise ValueError("decay fit needs positive prefactor and c0")
        if not 0.0 <= self.r2 <= 1.0:
            raise ValueError("r2 must lie in [0, 1]")

    def bound(self, d: float, elapsed: float) -> float:
        return self.C * math.exp(-d ** 2 / (4 * self.c0 * elapsed)
                                 + self.omega * elapsed)


def _sup_aggregate(coeffs: CoefficientSet) -> float:
    """Pointwise sup of the lower-order aggregate, P_inf convention.

    First-order fields enter squared, the zero-order one linearly; the
    square root of the sup makes omega = c0 * P_inf^2 dimensionally a rate.
    """
    agg = np.zeros(1)
    for c in range(coeffs.grid.n):
        agg = agg + np.abs(coeffs.avec[..., c]) ** 2
        agg = agg + np.abs(coeffs.bvec[..., c]) ** 2
    agg = agg + np.abs(coeffs.a0)
    return float(np.sqrt(agg.max()))


def offdiagonal_profile(coeffs: CoefficientSet, cfg: SolverConfig,
                        E: RegionMask, F: RegionMask, pairs,
                        probes: int = 5, seed: int = 0, omega_grid=None,
                        certificate=None, force: bool = False):
    """Localized decay samples of the undamped flow from F into E.

    For each (s, t) in `pairs` the value is the worst ratio
    ||Gamma(t,s) psi||_{L2(E)} / ||psi||_{L2(F)} over probes supported in F:
    the uniform indicator of F (the far-field response is driven by probe
    mass, so this one is close to maximal and keeps the per-pair values
    stable) plus `probes` random complex fields.  With d(E,F) > 0 the
    samples are fitted by least squares in the variable d^2/(t-s) after
    subtracting omega*(t-s), omega running over a discrete grid (multiples
    of the sup aggregate P_inf^2 by default; the zero-order growth rate is
    tied to the bounded part, not fitted freely).  Returns (samples, fit);
    fit is None when the regions touch (d = 0).

    Geometries with d(E,F) > Lx/4 are rejected: past a quarter period the
    nearest periodic image is ambiguous and wrap-around dominates.
    """
    grid = coeffs.grid
    if E.grid != grid or F.grid != grid:
        raise ValueError("regions and coefficients live on different grids")
    d = E.distance(F)
    if d > grid.Lx / 4:
        raise ValueError(f"region gap {d:.3g} exceeds a quarter period "
                         f"{grid.Lx / 4:.3g}; geometry rejected")
    if probes < 1:
        raise ValueError("need at least one probe per pair")
    if certificate is None:
        certificate = coercivity_certificate(coeffs, kappa=cfg.kappa,
                                             delta=cfg.delta, mode=cfg.mode)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x0FFD1A6]))
    # one probe set for the whole profile: each probe's log-ratio is then a
    # smooth curve in t-s and the per-pair max stays close to log-linear
    probe_values = [np.ones(F.size, dtype=complex)]
    for _ in range(probes):
        probe_values.append((rng.standard_normal(F.size)
                             + 1j * rng.standard_normal(F.size)) / np.sqrt(2))
    samples = []
    for s, t in pairs:
        s, t = float(s), float(t)
        if not t > s:
            raise ValueError("decay samples need t > s")
        worst = 0.0
        for pv in probe_values:
            vals = np.zeros(grid.spatial_shape, dtype=complex)
            vals[F.mask] = pv
            psi = SpatialField(grid, vals)
            traj = green_column(coeffs, cfg, s, psi, certificate=certificate,
                                force=force)
            gam = SpatialField(grid, traj.slice_at_time(t).data
                               * np.exp(cfg.kappa * (t - s)))
            worst = max(worst, masked_l2(gam, E) / spatial_l2_norm(psi))
        samples.append((s, t, d, worst))
    if d == 0.0:
        return samples, None
    if omega_grid is None:
        step = _sup_aggregate(coeffs) ** 2
        omega_grid = [k * step for k in range(9)] if step > 0 else [0.0]
    return samples, _fit_decay(samples, omega_grid)


def _fit_decay(samples, omega_grid) -> DecayFit:
    if len(samples) < 2:
        raise ValueError("decay fit needs at least two (s, t) pairs")
    d = samples[0][2]
    x = np.array([d ** 2 / (t - s) for s, t, _, _ in samples])
    elapsed = np.array([t - s for s, t, _, _ in samples])
    logv = np.log(np.maximum([v for *_, v in samples], 1e-300))
    best = None
    for omega in omega_grid:
        y = logv - omega * elapsed
        slope, intercept = np.polyfit(x, y, 1)
        res = y - (slope * x + intercept)
        sse = float(res @ res)
        if best is None or sse < best[0]:
            best = (sse, float(slope), float(intercept), float(omega), y)
    sse, slope, intercept, omega, y = best
    if slope >= 0:
        raise ValueError("no off-diagonal decay: fitted slope is non-negative")
    excess = float((y - (slope * x + intercept)).max())
    if len(samples) > 2:
        stderr = math.sqrt(sse / (len(samples) - 2))
        if excess > 3 * stderr:
            # automatic for <= 11 pairs; a breach means the profile is not
            # log-linear and the envelope interpretation would be dishonest
            raise ValueError("fitted line is not an upper envelope "
                             "(a sample exceeds it by over 3 standard errors)")
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if sst == 0 else max(0.0, 1.0 - sse / sst)
    # shift the line onto the highest sample so bound() dominates the data
    return DecayFit(C=math.exp(intercept + max(excess, 0.0)),
                    c0=-0.25 / slope, omega=omega, r2=min(r2, 1.0))


# ---------------------------------------------------------------------------
# exponential conjugation check


def required_kappa(coeffs: CoefficientSet, delta: float,
                   mode: str = "inhomogeneous", probes: int = 16,
                   seed: int = 0, start: float = 1.0,
                   cap: float = 2.0 ** 20) -> float:
    """Smallest damping in a doubling search whose certificate passes."""
    kappa = start
    while kappa <= cap:
        cert = coercivity_certificate(coeffs, kappa=kappa, delta=delta,
                                      probes=probes, seed=seed, mode=mode)
        if cert.passed:
            return kappa
        kappa *= 2
    raise ValueError(f"no damping below {cap} certifies the operator")


def davies_bound_check(coeffs: CoefficientSet, cfg: SolverConfig,
                       h: SpatialField, pairs, fit: DecayFit,
                       grad_h=None, probes: int = 5, seed: int = 0,
                       force: bool = False) -> float:
    """Worst observed/bound ratio for the e^h-conjugated flow.

    The conjugated operator picks up drift terms of size |grad h| and a
    potential of size |grad h|^2; its undamped flow must stay below
    C e^{(fit.omega + fit.c0 gamma^2)(t-s)} with gamma the Lipschitz bound
    of h.  The rates come from the decay fit; the prefactor C is measured
    here as the plain (h = 0) flow's worst ratio over the same pairs and
    probes, so h = 0 reduces the check to the uniform bound itself.  Pairs
    with gamma*sqrt(t-s) > 4 are skipped: at that range the periodic wrap
    feeds the exponential weight back in and the comparison stops being
    meaningful.

    A return value <= 1 + tolerance means the bound holds.  If the damping
    in `cfg` cannot certify the conjugated operator, the error reports a
    sufficient kappa (it grows with gamma^2).
    """
    grid = coeffs.grid
    if grad_h is None:
        grad_h = spatial_gradient(h)
    gamma2 = np.zeros(grid.spatial_shape)
    for comp in grad_h:
        gamma2 = gamma2 + np.abs(np.asarray(comp.data)) ** 2
    gamma = float(np.sqrt(gamma2.max()))
    usable = [(float(s), float(t)) for s, t in pairs
              if gamma * math.sqrt(t - s) <= 4.0]
    if not usable:
        raise ValueError("all pairs exceed the wrap guard gamma*sqrt(t-s) <= 4")
    conj = davies_conjugate(coeffs, h, grad_h=grad_h)
    cert = coercivity_certificate(conj, kappa=cfg.kappa, delta=cfg.delta,
                                  mode=cfg.mode)
    if not cert.passed:
        need = required_kappa(conj, cfg.delta, mode=cfg.mode, seed=seed)
        raise ValueError(
            f"conjugated certificate fails at kappa={cfg.kappa:g}; "
            f"kappa={need:g} suffices for |grad h| = {gamma:g}")
    plain_cert = coercivity_certificate(coeffs, kappa=cfg.kappa,
                                        delta=cfg.delta, mode=cfg.mode)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xDA71E5]))
    probe_fields = [
        SpatialField(grid, rng.standard_normal(grid.spatial_shape)
                     + 1j * rng.standard_normal(grid.spatial_shape))
        for _ in range(probes)
    ]

    def flow_ratio(cset, certificate, s, t):
        worst = 0.0
        for psi in probe_fields:
            traj = green_column(cset, cfg, s, psi, certificate=certificate,
                                force=force)
            ratio = (spatial_l2_norm(traj.slice_at_time(t))
                     * np.exp(cfg.kappa * (t - s)) / spatial_l2_norm(psi))
            worst = max(worst, ratio)
        return worst

    C_unif = max(flow_ratio(coeffs, plain_cert, s, t) for s, t in usable)
    worst = 0.0
    for s, t in usable:
        bound = C_unif * math.exp((fit.omega + fit.c0 * gamma ** 2) * (t - s))
        worst = max(worst, flow_ratio(conj, cert, s, t) / bound)
    return worst


# ---------------------------------------------------------------------------
# pointwise Gaussian kernel bound


def gaussian_mu(n: int, B: float, C: float, c0: float) -> float:
    """Composite constant of the pointwise kernel bound."""
    return ((32 * math.pi * c0) ** (n / 2) * 2 ** (n / 2)
            * math.exp(2 / c0) * (2 ** (1 + n / 2) * B * C) ** 2)


@dataclass(frozen=True)
class GaussianBoundParams:
    """Constants entering the pointwise kernel bound.

    mu is derived from (n, B, C, c0); passing it explicitly is allowed for
    round-tripping but must reproduce the formula value.
    """

    n: int
    B: float
    C: float
    c0: float
    omega: float
    rho: float = math.inf
    mu: float = field(default=math.nan)

    def __post_init__(self):
        if not (self.B > 0 and self.C > 0 and self.c0 > 0):
            raise ValueError("B, C, c0 must be positive")
        if self.omega < 0:
            raise ValueError("omega must be non-negative")
        if not self.rho > 0:
            raise ValueError("local-boundedness scale rho must be positive")
        want = gaussian_mu(self.n, self.B, self.C, self.c0)
        if math.isnan(self.mu):
            object.__setattr__(self, "mu", want)
        elif not math.isclose(self.mu, want, rel_tol=1e-9):
            raise ValueError(f"mu={self.mu:g} does not match the composite "
                             f"formula value {want:g}")


def gaussian_bound_check(props, params: GaussianBoundParams) -> float:
    """Smallest bound/|kernel| ratio over a stack of dense kernels.

    Kernels are entries/dx^n of fundamental-flag propagators.  The bound at
    gap t-s in [k rho^2, (k+1) rho^2) is
    mu^{k+1}/(16 pi c0 (t-s))^{n/2} e^{-d(x,y)^2/16c0(t-s) + omega (t-s)}
    with d the periodic distance.  A return value >= 1 means the bound holds
    everywhere; the smallest offender is returned otherwise.
    """
    margins = []
    for prop in props:
        kernel, bound = gaussian_entry_bounds(prop, params)
        margins.append(float((bound / np.maximum(kernel, 1e-300)).min()))
    if not margins:
        raise ValueError("empty propagator stack")
    return min(margins)


def gaussian_entry_bounds(prop, params: GaussianBoundParams):
    """(|kernel|, bound) matrices for one propagator, same layout as entries."""
    grid = prop.grid
    if grid.n != params.n:
        raise ValueError("propagator dimension does not match params")
    if prop.flag != "fundamental":
        raise ValueError("kernel bounds apply to the fundamental flag")
    if prop.is_sketch:
        raise ValueError("kernel bounds need dense entries")
    elapsed = prop.t - prop.s
    if elapsed <= 0:
        raise ValueError("kernel with non-positive t - s rejected")
    if math.isinf(params.rho):
        k = 0
    else:
        k = int(math.floor(elapsed / params.rho ** 2))
    d2 = _pairwise_dist2(grid)
    bound = (params.mu ** (k + 1)
             / (16 * math.pi * params.c0 * elapsed) ** (params.n / 2)
             * np.exp(-d2 / (16 * params.c0 * elapsed)
                      + params.omega * elapsed))
    kernel = np.abs(prop.entries) / grid.dx ** grid.n
    return kernel, bound


def _pairwise_dist2(grid: SpaceTimeGrid) -> np.ndarray:
    """Squared periodic distance between all pairs of cells, (dim, dim)."""
    idx = np.indices(grid.spatial_shape).reshape(grid.n, -1).astype(float)
    coords = idx * grid.dx
    out = np.zeros((coords.shape[1], coords.shape[1]))
    for c in range(grid.n):
        diff = np.abs(coords[c][:, None] - coords[c][None, :])
        diff = np.minimum(diff, grid.Lx - diff)
        out += diff ** 2
    return out


def measure_local_bound(u: Field, r: float, centers, source_times=(),
                        guard: float | None = None) -> float:
    """Measured interior-boundedness constant over parabolic cylinders.

    For each usable center (t, x) the ratio compares the squared sup of the
    slice at t over the ball of radius r against the space-time mass of u on
    the cylinder (t-4r^2, t] x B(x, 2r), scaled by r^{n+2}; B is the square
    root of the worst ratio.  Centers whose cylinder leaves the periodic
    window or comes within `guard` of a source time are skipped (the field
    is only a solution away from its sources).
    """
    g = u.grid
    if r < 2 * g.dx or r * r < 2 * g.dt:
        raise ValueError(f"radius {r:g} below grid resolution "
                         f"(needs r >= {2 * g.dx:g} and r^2 >= {2 * g.dt:g})")
    if guard is None:
        guard = 2 * g.dt
    depth = 4 * r * r
    best = None
    for tc, xc in centers:
        tc = float(tc)
        t0 = tc - depth
        if t0 < -1e-12 or tc > g.Lt - g.dt + 1e-12:
            continue  # cylinder would wrap around the period
        if any(t0 - guard <= float(s) <= tc + guard for s in source_times):
            continue
        kt = g.time_index(tc)
        k0 = int(np.floor(t0 / g.dt + 1e-9)) + 1
        center = np.atleast_1d(np.asarray(xc, dtype=float))
        d2 = _torus_dist2(g, center)
        ball_r = d2 <= r * r + 1e-12
        ball_2r = d2 <= 4 * r * r + 1e-12
        sup2 = float(np.abs(u.data[kt][ball_r]).max()) ** 2
        mass = float(np.sum(np.abs(u.data[k0:kt + 1][:, ball_2r]) ** 2)
                     * g.cell)
        if mass == 0:
            continue
        ratio = sup2 * r ** (g.n + 2) / mass
        best = ratio if best is None else max(best, ratio)
    if best is None:
        raise ValueError("no usable center: every cylinder hit a guard band")
    return math.sqrt(best)


# ---------------------------------------------------------------------------
# inverse-square potential scenario


@dataclass(frozen=True)
class CoulombReport:
    c: complex
    M: float
    ratio: float
    hardy_quotient: float
    passed: bool


def hardy_quotient(grid: SpaceTimeGrid, M: float, iters: int = 400,
                   seed: int = 0):
    """Largest discrete Hardy quotient <V u, u>/||grad u||^2 and its optimizer.

    Power iteration on the conjugated multiplier (-Lap)^{-1/2} V (-Lap)^{-1/2}
    over zero-mean fields; V is the truncated inverse-square potential of
    height M.  Deterministic for a given seed.
    """
    if grid.n != 3:
        raise ValueError("the inverse-square scenario is three-dimensional")
    V = coulomb_potential(grid, 1.0, M).a0[0].real
    xi2 = grid.xi2_bc()[0]
    live = xi2 > 0
    inv_sqrt = np.zeros(grid.spatial_shape)
    inv_sqrt[live] = xi2[live] ** -0.5
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xC0C0]))
    w = rng.standard_normal(grid.spatial_shape)
    w = np.fft.ifftn(np.fft.fftn(w) * live).real
    w /= np.linalg.norm(w)
    q = 0.0
    for _ in range(iters):
        u = np.fft.ifftn(inv_sqrt * np.fft.fftn(w))
        tw = np.fft.ifftn(inv_sqrt * np.fft.fftn(V * u)).real
        q_new = float(w.ravel() @ tw.ravel())
        w = tw / np.linalg.norm(tw)
        if abs(q_new - q) < 1e-13 * max(abs(q_new), 1.0):
            q = q_new
            break
        q = q_new
    optimizer = np.fft.ifftn(inv_sqrt * np.fft.fftn(w)).real
    return q, SpatialField(grid, optimizer / np.linalg.norm(optimizer))


def _rayleigh_quotient(grid: SpaceTimeGrid, V: np.ndarray,
                       u: np.ndarray) -> float:
    """<V u, u> / ||grad u||^2 for a spatial field with zero mean."""
    uh = np.fft.fftn(u)
    xi2 = grid.xi2_bc()[0]
    grad2 = float(np.sum(xi2 * np.abs(uh) ** 2) / u.size)
    pot = float(np.sum(V * np.abs(u) ** 2))
    return pot / grad2


def coulomb_scenario(grid: SpaceTimeGrid, c: complex, M: float,
                     probes: int = 8, seed: int = 0,
                     iters: int = 400) -> CoulombReport:
    """Coercivity probe for -Lap + c * (truncated |x|^-2) on the 3-torus.

    The minimal Rayleigh-type ratio Re<L u, u>/||grad u||^2 over the probe
    set equals 1 + Re(c) * Q(u) for the inverse-square potential, so the
    probe set always includes the power-iteration near-optimizer of the
    Hardy quotient; random band-limited probes document the spread.  The
    report passes when the minimal ratio stays positive (the lower-bound
    route to invertibility applies); it is monotone non-decreasing in Re c
    by construction.
    """
    if grid.n != 3:
        raise ValueError("the inverse-square scenario is three-dimensional")
    V = coulomb_potential(grid, 1.0, M).a0[0].real
    q_max, _ = hardy_quotient(grid, M, iters=iters, seed=seed)
    quotients = [q_max]
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xC001]))
    for _ in range(probes):
        vals = rng.standard_normal(grid.spatial_shape)
        vals = vals - vals.mean()
        quotients.append(_rayleigh_quotient(grid, V, vals))
    ratio = min(1.0 + complex(c).real * q for q in quotients)
    return CoulombReport(c=complex(c), M=float(M), ratio=float(ratio),
                         hardy_quotient=float(q_max), passed=bool(ratio > 0))
