r"""Mixed Lebesgue/Lorentz norms, variational norms, and exponent-pair algebra.

The exponent algebra is exact: reciprocals are Fractions (with infinity encoded
as reciprocal 0), so admissibility and compatibility are decided without float
comparisons.  Lorentz norms are evaluated in closed form on the discrete
rearrangement (a step function with uniform step width), which makes
L^{p,p} = L^p an identity rather than an approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .lattice import (
    Field,
    SpatialField,
    apply_multiplier,
    gradient,
    l2_norm,
    spatial_fraction,
    time_fraction,
)

__all__ = (
    "ExponentPair",
    "LorentzIndex",
    "CoefficientSize",
    "is_admissible",
    "is_compatible",
    "conjugate_pair",
    "mixed_lebesgue_norm",
    "lorentz_norm",
    "mixed_lorentz_norm",
    "vdot_norm",
    "vdot_norm_forms",
    "v_norm",
    "vdot_dual_norm",
    "v_dual_norm",
    "h_theta_norm",
    "coefficient_size",
    "epsilon_decomposition",
    "gagliardo_nirenberg_ratio",
    "embedding_ratio",
)

INF = math.inf


def _recip(x) -> Fraction:
    """Reciprocal as an exact Fraction; infinity maps to 0."""
    if x == INF:
        return Fraction(0)
    f = Fraction(x) if not isinstance(x, float) else Fraction(x).limit_denominator(10 ** 9)
    if f <= 0:
        raise ValueError(f"exponent must be positive or inf, got {x}")
    return 1 / f


@dataclass(frozen=True)
class ExponentPair:
    """A time/space exponent pair (r, q); use math.inf for essential sup."""

    r: object
    q: object

    def __post_init__(self):
        rr, rq = _recip(self.r), _recip(self.q)
        if rr > 1 or rq > 1:
            raise ValueError("exponents must be >= 1")
        object.__setattr__(self, "_rr", rr)
        object.__setattr__(self, "_rq", rq)

    @property
    def recip_r(self) -> Fraction:
        return self._rr

    @property
    def recip_q(self) -> Fraction:
        return self._rq

    def __repr__(self):
        return f"ExponentPair(r={self.r}, q={self.q})"


@dataclass(frozen=True)
class LorentzIndex:
    """Lorentz exponents (p, s): primary p in [1, inf), secondary s in [1, inf]."""

    p: float
    s: float

    def __post_init__(self):
        if not (1 <= self.p < INF):
            raise ValueError(f"primary exponent must be in [1, inf), got {self.p}")
        if not (1 <= self.s):
            raise ValueError(f"secondary exponent must be >= 1, got {self.s}")


@dataclass
class CoefficientSize:
    """The (small, bounded) sizes of a lower-order coefficient decomposition."""

    P_small: float                   # mixed-norm size of the above-height part
    P_inf: float                     # sup bound of the below-height part
    epsilon: float                   # requested smallness
    height: float = math.nan         # truncation height that was used
    truncation_failed: bool = False  # sup-in-time pairs cannot be truncated in general

    def __post_init__(self):
        for v in (self.P_small, self.P_inf, self.epsilon):
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError("coefficient sizes must be finite and nonnegative")


# ---------------------------------------------------------------------------
# exponent-pair algebra


def is_admissible(p: ExponentPair, n: int) -> bool:
    """1/r + n/(2q) = n/4 with 2 <= r, q < inf (both endpoints at inf excluded)."""
    rr, rq = p.recip_r, p.recip_q
    relation = rr + Fraction(n, 2) * rq == Fraction(n, 4)
    bounds = 0 < rr <= Fraction(1, 2) and 0 < rq <= Fraction(1, 2)
    return relation and bounds


def is_compatible(p: ExponentPair, n: int) -> bool:
    """1/r + n/(2q) = 1 with 1 < r, q <= inf."""
    rr, rq = p.recip_r, p.recip_q
    relation = rr + Fraction(n, 2) * rq == 1
    bounds = rr < 1 and rq < 1
    return relation and bounds


def conjugate_pair(p: ExponentPair) -> ExponentPair:
    """The pair (2 r', 2 q') built from the Hoelder conjugates of (r, q).

    A pair is compatible for lower-order coefficients exactly when its
    conjugate is admissible.
    """
    def half_conj(recip: Fraction):
        new = (1 - recip) / 2
        return INF if new == 0 else 1 / new

    return ExponentPair(half_conj(p.recip_r), half_conj(p.recip_q))


# ---------------------------------------------------------------------------
# mixed Lebesgue norms


def _lp_along(values: np.ndarray, recip: Fraction, weight: float) -> np.ndarray:
    """l^p norm with quadrature weight along the last axis; recip = 1/p (0 = sup)."""
    if recip == 0:
        return values.max(axis=-1)
    p = float(1 / recip)
    return (np.sum(values ** p, axis=-1) * weight) ** (1.0 / p)


def mixed_lebesgue_norm(u: Field, pair: ExponentPair) -> float:
    """Discrete (L^r_t L^q_x) norm with dt, dx^n quadrature weights."""
    g = u.grid
    mags = np.abs(u.data).reshape(g.Nt, -1)
    per_slice = _lp_along(mags, pair.recip_q, g.dx ** g.n)
    return float(_lp_along(per_slice[None, :], pair.recip_r, g.dt)[0])


# ---------------------------------------------------------------------------
# Lorentz norms


def lorentz_norm(samples, idx: LorentzIndex, cell_volume: float) -> float:
    r"""Lorentz norm of a sampled function with uniform cell measure.

    The decreasing rearrangement of the samples is a step function f* with
    steps of width cell_volume; the defining integral

        ( s/p \int_0^\infty (t^{1/p} f*(t))^s dt/t )^{1/s}

    is evaluated in closed form over the steps.  For s = inf the supremum of
    t^{1/p} f*(t) is attained at right step endpoints.
    """
    if isinstance(samples, (SpatialField, Field)):
        samples = samples.data
    a = np.sort(np.abs(np.asarray(samples)).ravel())[::-1]
    a = a[a > 0]
    if a.size == 0:
        return 0.0
    v = float(cell_volume)
    edges = v * np.arange(a.size + 1)
    if idx.s == INF:
        return float(np.max(edges[1:] ** (1.0 / idx.p) * a))
    sp = idx.s / idx.p
    increments = edges[1:] ** sp - edges[:-1] ** sp
    return float(np.sum(a ** idx.s * increments) ** (1.0 / idx.s))


def mixed_lorentz_norm(u: Field, time_idx: LorentzIndex, space_idx: LorentzIndex) -> float:
    """Inner Lorentz norm per time slice, outer Lorentz norm of the profile."""
    g = u.grid
    cell_x = g.dx ** g.n
    profile = np.array([
        lorentz_norm(u.data[k], space_idx, cell_x) for k in range(g.Nt)
    ])
    return lorentz_norm(profile, time_idx, g.dt)


# ---------------------------------------------------------------------------
# variational norms


def _project_zero_mode(u: Field) -> np.ndarray:
    u_hat = np.fft.fftn(u.data)
    u_hat[(0,) * (1 + u.grid.n)] = 0.0
    return u_hat


def vdot_norm_forms(u: Field) -> tuple:
    """Homogeneous variational norm computed two independent ways.

    Returns (multiplier form, derivative form): the weighted frequency sum
    with weight (|tau|+|xi|^2)^{1/2}, and (||grad u||^2 + ||D_t^{1/2}u||^2)^{1/2}.
    The joint zero mode is projected out first.
    """
    g = u.grid
    u_hat = _project_zero_mode(u)
    w = np.abs(g.tau_bc()) + g.xi2_bc()
    freq_weight = float(np.sqrt(np.sum(w * np.abs(u_hat) ** 2) / (g.Nt * g.Nx ** g.n) * g.cell))
    u_proj = Field(g, np.fft.ifftn(u_hat))
    grad_sq = sum(l2_norm(c) ** 2 for c in gradient(u_proj))
    dt_half = l2_norm(apply_multiplier(u_proj, time_fraction(g, 0.5)))
    return freq_weight, float(np.sqrt(grad_sq + dt_half ** 2))


def vdot_norm(u: Field) -> float:
    return vdot_norm_forms(u)[0]


def v_norm(u: Field) -> float:
    """Inhomogeneous norm (||u||_{L2}^2 + ||grad u||^2 + ||D_t^{1/2}u||^2)^{1/2}."""
    g = u.grid
    u_hat = np.fft.fftn(u.data)
    w = 1.0 + np.abs(g.tau_bc()) + g.xi2_bc()
    return float(np.sqrt(np.sum(w * np.abs(u_hat) ** 2) / (g.Nt * g.Nx ** g.n) * g.cell))


def _dual_norm(f: Field, offset: float) -> float:
    g = f.grid
    f_hat = np.fft.fftn(f.data)
    w = offset + np.abs(g.tau_bc()) + g.xi2_bc()
    w = np.broadcast_to(w, g.shape)
    mask = w > 0
    total = np.sum(np.abs(f_hat[mask]) ** 2 / w[mask])
    return float(np.sqrt(total / (g.Nt * g.Nx ** g.n) * g.cell))


def vdot_dual_norm(f: Field) -> float:
    """Dual norm with weight (|tau|+|xi|^2)^{-1/2}; the zero mode is dropped."""
    return _dual_norm(f, 0.0)


def v_dual_norm(f: Field, kappa: float = 1.0) -> float:
    """Dual norm with weight (kappa+|tau|+|xi|^2)^{-1/2} (inhomogeneous)."""
    if kappa <= 0:
        raise ValueError("kappa must be positive in the inhomogeneous dual norm")
    return _dual_norm(f, kappa)


def h_theta_norm(w: Field, theta: float) -> float:
    r"""Norm of the space {D_t^{\theta/2}(-Lap)^{(1-\theta)/2} g : g in L^2}.

    Computed as the weighted frequency sum with weight
    |tau|^{-theta/2} |xi|^{-(1-theta)}; coefficients sitting on modes where the
    forward weight vanishes mean w is not in the space, and are rejected.
    """
    if not 0 <= theta < 1:
        raise ValueError(f"theta must be in [0,1), got {theta}")
    g = w.grid
    w_hat = np.fft.fftn(w.data)
    scale = np.abs(w_hat).max()
    tau = np.broadcast_to(np.abs(g.tau_bc()), g.shape)
    xi2 = np.broadcast_to(g.xi2_bc(), g.shape)
    dead = np.zeros(g.shape, dtype=bool)
    if theta > 0:
        dead |= tau == 0
    dead |= xi2 == 0
    if scale > 0 and np.abs(w_hat[dead]).max(initial=0.0) > 1e-12 * scale:
        raise ValueError("field has frequency mass where the weight vanishes")
    live = ~dead
    weight = np.zeros(g.shape)
    if theta > 0:
        weight[live] = tau[live] ** (-theta) * xi2[live] ** (-(1 - theta))
    else:
        weight[live] = xi2[live] ** (-1.0)
    total = np.sum(weight[live] * np.abs(w_hat[live]) ** 2)
    return float(np.sqrt(total / (g.Nt * g.Nx ** g.n) * g.cell))


# ---------------------------------------------------------------------------
# coefficient sizes and the height-truncation decomposition


def _component_field(grid, values) -> Field:
    return Field(grid, np.ascontiguousarray(values, dtype=complex))


def coefficient_size(coeffs, pair: ExponentPair, lorentz: bool = False) -> float:
    """Aggregate size of the lower-order coefficients in the compatible norm.

    The first-order fields enter through the norm of their modulus squared
    (taken to the power 1/2), the zero-order field enters linearly.  With
    lorentz=True the mixed weak norms (r,inf)/(q,inf) replace the Lebesgue
    ones.
    """
    if not is_compatible(pair, coeffs.grid.n):
        raise ValueError(f"{pair} is not compatible for lower order coefficients")
    g = coeffs.grid

    def measure(values) -> float:
        f = _component_field(g, values)
        if lorentz:
            r = INF if pair.recip_r == 0 else float(1 / pair.recip_r)
            q = INF if pair.recip_q == 0 else float(1 / pair.recip_q)
            if r == INF:
                # weak norm in time degenerates to the sup over slices
                profile = np.array([
                    lorentz_norm(f.data[k], LorentzIndex(q, INF), g.dx ** g.n)
                    for k in range(g.Nt)])
                return float(profile.max())
            return mixed_lorentz_norm(f, LorentzIndex(r, INF), LorentzIndex(q, INF))
        return mixed_lebesgue_norm(f, pair)

    a2 = np.sum(np.abs(coeffs.avec) ** 2, axis=-1)
    b2 = np.sum(np.abs(coeffs.bvec) ** 2, axis=-1)
    return float(np.sqrt(measure(a2)) + np.sqrt(measure(b2)) + measure(np.abs(coeffs.a0)))


def epsilon_decomposition(coeff: Field, pair: ExponentPair, eps: float):
    """Split a coefficient at a truncation height into small + bounded parts.

    Returns (small, bounded, report): small is the part above the height (its
    mixed norm is <= eps), bounded the part below (sup <= height), and the sum
    reconstructs the input exactly.  For sup-in-time pairs the truncation
    argument is only valid for time-independent coefficients; other inputs get
    report.truncation_failed = True (the split is still returned).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    g = coeff.grid
    if not is_compatible(pair, g.n):
        raise ValueError(f"{pair} is not compatible for lower order coefficients")
    mags = np.abs(coeff.data)

    def above_norm(height: float) -> float:
        small = np.where(mags > height, coeff.data, 0.0)
        return mixed_lebesgue_norm(Field(g, small), pair)

    failed = False
    if pair.recip_r == 0:
        time_variation = np.abs(coeff.data - coeff.data[:1]).max()
        if time_variation > 1e-12 * max(mags.max(), 1.0):
            failed = True

    # smallest height (zero or a sample value) whose above-part norm is
    # <= eps; the norm is monotone non-increasing in the height and vanishes
    # at the sample maximum
    levels = np.unique(np.concatenate(([0.0], mags.ravel())))
    lo, hi = 0, levels.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if above_norm(float(levels[mid])) <= eps:
            hi = mid
        else:
            lo = mid + 1
    height = float(levels[lo])
    small_data = np.where(mags > height, coeff.data, 0.0)
    bounded_data = coeff.data - small_data
    small = Field(g, small_data)
    bounded = Field(g, bounded_data)
    report = CoefficientSize(
        P_small=above_norm(height),
        P_inf=float(np.abs(bounded_data).max()),
        epsilon=eps,
        height=height,
        truncation_failed=failed,
    )
    return small, bounded, report


# ---------------------------------------------------------------------------
# Gagliardo-Nirenberg ratio


def gagliardo_nirenberg_ratio(u: Field, alpha: tuple, m: int, pair: ExponentPair,
                              interval: tuple | None = None) -> float:
    """LHS/RHS of the interpolation inequality, without the constant.

    LHS: ||d^alpha u|| in L^r over the time interval with spatial Lorentz
    (q,2) norm.  RHS: ||grad^m u||_{L^2 L^2}^{2/r} * ||u||_{L^inf L^2}^{1-2/r}.
    The exponents must satisfy 1/r + n/(2mq) = (n+2|alpha|)/(4m) with
    2 <= r, q < inf.
    """
    g = u.grid
    n = g.n
    if len(alpha) != n or any(a < 0 for a in alpha):
        raise ValueError(f"multi-index must have {n} nonnegative entries")
    a_order = sum(alpha)
    if not (0 <= a_order <= m):
        raise ValueError("|alpha| must be between 0 and m")
    rr, rq = pair.recip_r, pair.recip_q
    if rr + Fraction(n, 2 * m) * rq != Fraction(n + 2 * a_order, 4 * m):
        raise ValueError("exponent pair violates the interpolation relation")
    if not (0 < rr <= Fraction(1, 2) and 0 < rq <= Fraction(1, 2)):
        raise ValueError("exponents must lie in [2, inf)")

    if interval is None:
        k0, k1 = 0, g.Nt
    else:
        k0, k1 = g.time_index(interval[0]), g.time_index(interval[1])
        if k1 <= k0:
            raise ValueError("empty time interval")

    # spectral d^alpha
    u_hat = np.fft.fftn(u.data)
    sym = np.ones((1,) * (1 + n), dtype=complex)
    for c, a_c in enumerate(alpha):
        if a_c:
            sym = sym * (1j * g.xi_bc(c)) ** a_c
    du = np.fft.ifftn(sym * u_hat)

    r = float(1 / rr)
    q = float(1 / rq)
    cell_x = g.dx ** n
    profile = np.array([
        lorentz_norm(du[k], LorentzIndex(q, 2.0), cell_x) for k in range(k0, k1)
    ])
    lhs = float((np.sum(profile ** r) * g.dt) ** (1.0 / r))
    if lhs == 0.0:
        return 0.0

    grad_m = apply_multiplier(u, spatial_fraction(g, float(m)))
    sq = np.sum(np.abs(grad_m.data[k0:k1]) ** 2) * g.cell
    slice_l2 = np.sqrt(np.sum(np.abs(u.data[k0:k1]) ** 2, axis=tuple(range(1, 1 + n))) * cell_x)
    sup_l2 = float(slice_l2.max())
    rhs = float(np.sqrt(sq) ** (2.0 / r) * sup_l2 ** (1.0 - 2.0 / r))
    if rhs == 0:
        raise ValueError("zero denominator in the interpolation ratio")
    return lhs / rhs


def embedding_ratio(u: Field, pair: ExponentPair) -> float:
    """Mixed Lorentz (r,2)x(q,2) norm over the homogeneous variational norm."""
    denom = vdot_norm(u)
    if denom == 0:
        raise ValueError("zero variational norm")
    r = float(1 / pair.recip_r)
    q = float(1 / pair.recip_q)
    num = mixed_lorentz_norm(u, LorentzIndex(r, 2.0), LorentzIndex(q, 2.0))
    return num / denom
