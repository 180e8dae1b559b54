"""Manifest-driven batch front-end.

Usage: ``greenop <command> --manifest run.json [--threads N] [--out dir]``.

Commands: verify (identity suite: jump, composition, adjointness, causality),
green (one column as a GOF1 field), cauchy (initial-value evolution), offdiag
(localized decay profile and exponent fit), gaussian (pointwise kernel bound
audit with measured constants), coulomb (inverse-square coupling sweep), gn
(interpolation-ratio suite), norms (mixed Lorentz norm sweep).

Every run writes ``summary.json`` with {command, pass, checks, wall_time};
each check row records the identity it tests in its "anchor" field.  CSV
artifacts are UTF-8 with a mandatory header row.  Exit codes: 0 all checks
pass, 1 a check failed, 2 the manifest violates the schema or a geometric
precondition, 3 the solver did not converge (summary still written).

Manifests are JSON validated against the schema shipped both as package data
and at docs/schema.json.  Solver keys (kappa, delta, tol, max_iter, mode) sit
at the top level; "coefficients" is a component-manifest path or a named
generator with its own seed.  All remaining randomness flows from the root
"seed" through numpy SeedSequence spawns keyed [seed, counter] (counter 0:
source slices, counter 1: the gn/norms field stream, one child per field
index), so a manifest reproduces byte-identical check values at a fixed
thread count.  GREENOP_THREADS overrides --threads.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from importlib import resources

import jsonschema
import numpy as np

from .estimates import (
    GaussianBoundParams,
    ball_mask,
    coulomb_scenario,
    gaussian_entry_bounds,
    measure_local_bound,
    offdiagonal_profile,
)
from .generators import generate_coefficients
from .green import (
    adjoint_defect,
    causality_defect,
    chapman_kolmogorov_defect,
    green_column,
    propagator,
    representation_defect,
    solve_cauchy,
)
from .io import read_coefficient_manifest, read_field, read_spatial_field, write_field
from .lattice import Field, SpatialField, make_grid
from .norms import (
    ExponentPair,
    LorentzIndex,
    gagliardo_nirenberg_ratio,
    mixed_lebesgue_norm,
    mixed_lorentz_norm,
)
from .operators import coercivity_certificate
from .solver import SolverConfig

__all__ = ("main", "run_manifest", "load_schema")

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_SCHEMA = 2
EXIT_SOLVER = 3

ANCHORS = {
    "coercivity_hom": "Re<Hu, (Id + delta H_t)u> >= delta/2 ||u||^2",
    "coercivity_inhom": "Re<H_kappa u, (Id + delta H_t)u> >= delta/4 ||u||_kappa^2",
    "converged": "||H_kappa^{-1} f||_V <= (4/delta) ||f||_V'",
    "jump": "Pi^+ psi - Pi^- psi = psi",
    "chapman_kolmogorov": "G(t,s) = G(t,r) G(r,s)",
    "adjoint": "G(t,s)^* = G~(s,t)",
    "causality": "G(t,s) = 0 for t < s",
    "representation": "u(t) = Gamma(t,0) psi + int_0^t Gamma(t,s) f(s) ds",
    "offdiag": "||Gamma(t,s) psi||_{L^2(E)} <= C e^{-d(E,F)^2/(4 c0 (t-s))} ||psi||",
    "gaussian": ("|Gamma(t,s,x,y)| <= mu^{k+1} (16 pi c0 (t-s))^{-n/2} "
                 "e^{-d(x,y)^2/(16 c0 (t-s)) + omega (t-s)}"),
    "coulomb": "1 + Re(c) <V_M u,u>/||grad u||^2 > 0",
    "hardy": "sup_u <|x|^{-2} u,u>/||grad u||^2 = (2/(n-2))^2",
    "gn": ("||d^alpha u||_{L^r L^{q,2}} <= C ||grad^m u||_{L^2 L^2}^{2/r} "
           "||u||_{L^inf L^2}^{1-2/r}"),
    "lorentz_diagonal": "||f||_{L^{p,p}} = ||f||_{L^p}",
    "lorentz_monotone": "||f||_{L^{p,s'}} <= ||f||_{L^{p,s}} for s <= s'",
}


class ManifestError(ValueError):
    """Manifest fails the schema or names resources that do not exist."""


def load_schema() -> dict:
    with resources.files("greenop").joinpath("schema.json").open("rb") as fh:
        return json.load(fh)


def _check(name, value, threshold, op, anchor):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        ok = False
        value = None
    elif op == "<=":
        ok = value <= threshold
    else:
        ok = value >= threshold
    return {"name": name,
            "value": None if value is None else float(value),
            "threshold": float(threshold), "op": op, "pass": bool(ok),
            "anchor": anchor}


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _grid(man):
    g = man["grid"]
    return make_grid(g["n"], g["Nx"], g["Lx"], g["Nt"], g["Lt"])


def _cfg(man) -> SolverConfig:
    kappa = man.get("kappa", 0.0)
    mode = man.get("mode", "inhomogeneous" if kappa > 0 else "homogeneous")
    return SolverConfig(kappa=kappa, delta=man.get("delta", 0.5),
                        tol=man.get("tol", 1e-8),
                        max_iter=man.get("max_iter", 400), mode=mode)


def _coeffs(man, grid, base):
    src = man.get("coefficients")
    if src is None:
        raise ManifestError("this command needs a 'coefficients' entry")
    if isinstance(src, str):
        path = os.path.join(base, src)
        if not os.path.exists(path):
            raise ManifestError(f"coefficient manifest not found: {path}")
        return read_coefficient_manifest(path, grid)
    return generate_coefficients(src["generator"], grid,
                                 seed=src.get("seed", 0),
                                 params=src.get("params"))


def _source_slice(spec, grid, root, base) -> SpatialField:
    kind = spec["kind"]
    if kind == "lowmode":
        phase = 2 * np.pi * np.moveaxis(np.indices(grid.spatial_shape), 0, -1)[..., 0] / grid.Nx
        return SpatialField(grid, np.exp(1j * phase) + spec.get("shift", 0.3))
    if kind == "cell":
        center = np.asarray(spec["center"], dtype=float)
        if center.shape != (grid.n,):
            raise ManifestError(f"cell center needs {grid.n} coordinates")
        idx = tuple(int(round(c / grid.dx)) % grid.Nx for c in center)
        data = np.zeros(grid.spatial_shape, dtype=complex)
        data[idx] = 1.0 / grid.dx ** grid.n
        return SpatialField(grid, data)
    if kind == "random":
        rng = np.random.default_rng(np.random.SeedSequence([root, 0]))
        data = (rng.standard_normal(grid.spatial_shape)
                + 1j * rng.standard_normal(grid.spatial_shape))
        band = spec.get("band")
        if band is not None:
            hat = np.fft.fftn(data)
            for axis in range(grid.n):
                k = np.fft.fftfreq(grid.Nx, d=1.0 / grid.Nx)
                shape = [1] * grid.n
                shape[axis] = grid.Nx
                hat *= (np.abs(k) <= band).reshape(shape)
            data = np.fft.ifftn(hat)
        return SpatialField(grid, data)
    path = os.path.join(base, spec["path"])
    if not os.path.exists(path):
        raise ManifestError(f"source field not found: {path}")
    return read_spatial_field(path, grid)


def _region(spec, grid):
    return ball_mask(grid, np.asarray(spec["center"], dtype=float),
                     spec["radius"])


def _certificate(coeffs, cfg):
    cert = coercivity_certificate(coeffs, kappa=cfg.kappa, delta=cfg.delta,
                                  mode=cfg.mode)
    key = "coercivity_inhom" if cfg.mode == "inhomogeneous" else "coercivity_hom"
    row = _check("coercivity", cert.min_ratio, cert.threshold, ">=",
                 ANCHORS[key])
    return cert, row


# ---------------------------------------------------------------------------
# command bodies: each returns (checks, constants)


def _cmd_verify(man, base, outdir, threads, root):
    grid = _grid(man)
    cfg = _cfg(man)
    coeffs = _coeffs(man, grid, base)
    p = man["params"]
    s, r, t = p["s"], p["r"], p["t"]
    if not s < r < t:
        raise ValueError(f"verify needs s < r < t, got {s}, {r}, {t}")
    cert, cert_row = _certificate(coeffs, cfg)
    checks = [cert_row]
    if not cert.passed:
        return checks, {}

    psi = _source_slice({"kind": "lowmode"}, grid, root, base)
    traj = green_column(coeffs, cfg, s, psi, certificate=cert)
    thr_pair = 50 * (cfg.tol + grid.dt)
    thr_causal = max(math.exp(-0.9 * cfg.kappa * grid.Lt), 10 * cfg.tol)
    jump = traj.jump_defect()
    causal = causality_defect(traj)
    Gts = propagator(coeffs, cfg, s, t, certificate=cert, threads=threads)
    Gtr = propagator(coeffs, cfg, r, t, certificate=cert, threads=threads)
    Grs = propagator(coeffs, cfg, s, r, certificate=cert, threads=threads)
    Gst = propagator(coeffs, cfg, t, s, certificate=cert, adjoint=True,
                     threads=threads)
    ck = chapman_kolmogorov_defect(Gts, Gtr, Grs)
    adj = adjoint_defect(Gts, Gst)

    checks += [
        _check("jump", jump, 5 * grid.dt, "<=", ANCHORS["jump"]),
        _check("chapman_kolmogorov", ck, thr_pair, "<=",
               ANCHORS["chapman_kolmogorov"]),
        _check("adjoint", adj, thr_pair, "<=", ANCHORS["adjoint"]),
        _check("causality", causal, thr_causal, "<=", ANCHORS["causality"]),
    ]
    rows = [
        ["jump", s, "", "", cfg.kappa, repr(jump), repr(5 * grid.dt),
         jump <= 5 * grid.dt],
        ["chapman_kolmogorov", s, r, t, cfg.kappa, repr(ck), repr(thr_pair),
         ck <= thr_pair],
        ["adjoint", s, "", t, cfg.kappa, repr(adj), repr(thr_pair),
         adj <= thr_pair],
        ["causality", s, "", "", cfg.kappa, repr(causal), repr(thr_causal),
         causal <= thr_causal],
    ]
    _write_csv(os.path.join(outdir, p.get("report", "identity.csv")),
               ["check", "s", "r", "t", "kappa", "defect", "threshold",
                "pass"], rows)
    return checks, {}


def _cmd_green(man, base, outdir, threads, root):
    grid = _grid(man)
    cfg = _cfg(man)
    coeffs = _coeffs(man, grid, base)
    p = man["params"]
    cert, cert_row = _certificate(coeffs, cfg)
    checks = [cert_row]
    if not cert.passed:
        return checks, {}
    psi = _source_slice(p["source"], grid, root, base)
    traj = green_column(coeffs, cfg, p["s"], psi, certificate=cert)
    write_field(os.path.join(outdir, "column.gof1"), traj.data)
    rep = traj.report
    checks += [
        _check("converged", rep.residual, cfg.tol, "<=", ANCHORS["converged"]),
        _check("jump", traj.jump_defect(), 5 * grid.dt, "<=", ANCHORS["jump"]),
    ]
    return checks, {"iterations": rep.iterations}


def _cmd_cauchy(man, base, outdir, threads, root):
    grid = _grid(man)
    cfg = _cfg(man)
    coeffs = _coeffs(man, grid, base)
    p = man["params"]
    cert, cert_row = _certificate(coeffs, cfg)
    checks = [cert_row]
    if not cert.passed:
        return checks, {}
    psi = _source_slice(p["initial"], grid, root, base)
    g_src = None
    if "rhs" in p:
        g_src = read_field(os.path.join(base, p["rhs"]), grid)
    u, rep = solve_cauchy(coeffs, psi, p["T"], cfg, g=g_src, certificate=cert)
    write_field(os.path.join(outdir, "solution.gof1"), u)
    checks.append(_check("converged", rep.residual, cfg.tol, "<=",
                         ANCHORS["converged"]))
    if "t_check" in p:
        defect = representation_defect(coeffs, psi, p["T"], cfg,
                                       t_check=p["t_check"], g=g_src,
                                       certificate=cert)
        checks.append(_check("representation", defect,
                             50 * (cfg.tol + grid.dt), "<=",
                             ANCHORS["representation"]))
    return checks, {"iterations": rep.iterations}


def _cmd_offdiag(man, base, outdir, threads, root):
    grid = _grid(man)
    cfg = _cfg(man)
    coeffs = _coeffs(man, grid, base)
    p = man["params"]
    E, F = _region(p["E"], grid), _region(p["F"], grid)
    pairs = [tuple(pair) for pair in p["pairs"]]
    samples, fit = offdiagonal_profile(
        coeffs, cfg, E, F, pairs, probes=p.get("probes", 5), seed=root,
        omega_grid=p.get("omega_grid"))
    if fit is None:
        raise ValueError("regions touch: no separation to fit a profile")

    rows = []
    worst_ratio = 0.0
    for s, t, d, value in samples:
        bound = fit.bound(d, t - s)
        worst_ratio = max(worst_ratio, value / bound)
        rows.append([repr(s), repr(t), repr(d), repr(value), repr(bound),
                     value <= bound * (1 + 1e-9)])
    _write_csv(os.path.join(outdir, "offdiag.csv"),
               ["s", "t", "dEF", "value", "bound", "pass"], rows)

    checks = [
        _check("decay_slope", -0.25 / fit.c0, 0.0, "<=", ANCHORS["offdiag"]),
        _check("fit_r2", fit.r2, p.get("r2_min", 0.95), ">=",
               ANCHORS["offdiag"]),
        # C is lifted onto the highest sample, so only rounding can exceed 1
        _check("envelope", worst_ratio, 1 + 1e-9, "<=", ANCHORS["offdiag"]),
    ]
    constants = {"C": fit.C, "c0": fit.c0, "omega": fit.omega, "r2": fit.r2}
    return checks, constants


def _coord_label(grid, flat_index):
    if grid.n == 1:
        return repr(flat_index * grid.dx)
    idx = np.unravel_index(flat_index, grid.spatial_shape)
    return ";".join(repr(i * grid.dx) for i in idx)


def _cmd_gaussian(man, base, outdir, threads, root):
    grid = _grid(man)
    cfg = _cfg(man)
    coeffs = _coeffs(man, grid, base)
    p = man["params"]

    fp = p["fit"]
    _, fit = offdiagonal_profile(
        coeffs, cfg, _region(fp["E"], grid), _region(fp["F"], grid),
        [tuple(pair) for pair in fp["pairs"]], probes=fp.get("probes", 5),
        seed=root)

    lp = p["local"]
    bump_spec = lp["bump"]
    center = np.asarray(bump_spec["center"], dtype=float)
    coords = np.moveaxis(np.indices(grid.spatial_shape), 0, -1) * grid.dx
    d2 = np.zeros(grid.spatial_shape)
    for axis in range(grid.n):
        diff = np.abs(coords[..., axis] - center[axis])
        d2 += np.minimum(diff, grid.Lx - diff) ** 2
    bump = SpatialField(grid, np.exp(-d2 / bump_spec["width"] ** 2))
    s_b = bump_spec["s"]
    traj = green_column(coeffs, cfg, s_b, bump)
    growth = np.exp(cfg.kappa * (grid.times - s_b))
    u = Field(grid, traj.data.data * growth.reshape((grid.Nt,) + (1,) * grid.n))
    B = measure_local_bound(u, lp["r"], [tuple(c) for c in lp["centers"]],
                            source_times=(s_b,))

    kp = p["kernel"]
    props = [propagator(coeffs, cfg, kp["s"], kp["s"] + k * grid.dt,
                        flag="fundamental", threads=threads)
             for k in range(1, kp["steps"] + 1)]
    C_unif = max(prop.operator_norm() for prop in props)
    params = GaussianBoundParams(n=grid.n, B=B, C=C_unif, c0=fit.c0,
                                 omega=fit.omega,
                                 rho=p.get("rho", math.inf))

    rows = []
    worst = 0.0
    for prop in props:
        kernel, bound = gaussian_entry_bounds(prop, params)
        ratio = kernel / bound
        worst = max(worst, float(ratio.max()))
        for i in range(kernel.shape[0]):
            for j in range(kernel.shape[1]):
                rows.append([repr(prop.t), repr(prop.s),
                             _coord_label(grid, i), _coord_label(grid, j),
                             repr(float(kernel[i, j])),
                             repr(float(bound[i, j])),
                             repr(float(ratio[i, j]))])
    _write_csv(os.path.join(outdir, "gaussian.csv"),
               ["t", "s", "x", "y", "abs_kernel", "bound", "ratio"], rows)

    checks = [_check("kernel_bound", worst, 1.0, "<=", ANCHORS["gaussian"])]
    constants = {"B": B, "C": C_unif, "c0": fit.c0, "omega": fit.omega,
                 "mu": params.mu}
    return checks, constants


def _cmd_coulomb(man, base, outdir, threads, root):
    grid = _grid(man)
    p = man["params"]
    if "values" in p:
        values = [float(v) for v in p["values"]]
    elif "sweep" in p:
        sw = p["sweep"]
        values = [float(v) for v in
                  np.linspace(sw["start"], sw["stop"], sw["count"])]
    else:
        raise ManifestError("coulomb needs either 'values' or 'sweep'")
    values = sorted(values)
    window = p.get("window", [-0.30, -0.20])

    reports = [coulomb_scenario(grid, c, p["M"], probes=p.get("probes", 8),
                                seed=root) for c in values]
    ratios = [rep.ratio for rep in reports]
    _write_csv(os.path.join(outdir, "coulomb.csv"),
               ["re_c", "ratio", "pass"],
               [[repr(c), repr(rep.ratio), rep.passed]
                for c, rep in zip(values, reports)])

    crossing = None
    for (c0, r0), (c1, r1) in zip(zip(values, ratios),
                                  zip(values[1:], ratios[1:])):
        if r0 <= 0.0 < r1:
            crossing = c0 - r0 * (c1 - c0) / (r1 - r0)
            break
    diffs = np.diff(ratios)
    checks = [
        _check("monotone", float(diffs.min()) if len(diffs) else 0.0, 0.0,
               ">=", ANCHORS["coulomb"]),
        _check("sign_change_lower", crossing, window[0], ">=",
               ANCHORS["hardy"]),
        _check("sign_change_upper", crossing, window[1], "<=",
               ANCHORS["hardy"]),
    ]
    constants = {"hardy_quotient": reports[0].hardy_quotient,
                 "crossing": crossing}
    return checks, constants


def _field_stream(grid, root, count):
    for k in range(count):
        rng = np.random.default_rng(np.random.SeedSequence([root, 1, k]))
        yield k, Field(grid, rng.standard_normal(grid.shape)
                       + 1j * rng.standard_normal(grid.shape))


def _cmd_gn(man, base, outdir, threads, root):
    grid = _grid(man)
    p = man["params"]
    alpha = tuple(p["alpha"])
    pair = ExponentPair(*p["pair"])
    interval = tuple(p["interval"]) if "interval" in p else None

    rows = []
    worst = 0.0
    for k, u in _field_stream(grid, root, p["count"]):
        ratio = gagliardo_nirenberg_ratio(u, alpha, p["m"], pair,
                                          interval=interval)
        worst = max(worst, ratio)
        rows.append([k, repr(ratio)])
    _write_csv(os.path.join(outdir, "gn.csv"), ["field_id", "ratio"], rows)
    checks = [_check("max_ratio", worst, p["max_ratio"], "<=", ANCHORS["gn"])]
    return checks, {}


def _cmd_norms(man, base, outdir, threads, root):
    grid = _grid(man)
    p = man["params"]
    p_values = p.get("p_values", [2.0, 3.0])
    secondaries = sorted(p.get("secondaries", [1.5, 2.0, 3.0]))

    rows = []
    diag_worst = 0.0
    mono_worst = -math.inf
    for k, u in _field_stream(grid, root, p["count"]):
        for spec in p["rows"]:
            norm = mixed_lorentz_norm(u, LorentzIndex(spec["r"], spec["s_time"]),
                                      LorentzIndex(spec["q"], spec["s_space"]))
            rows.append([k, spec["r"], spec["q"], spec["s_time"],
                         spec["s_space"], repr(norm)])
        for pv in p_values:
            lorentz = mixed_lorentz_norm(u, LorentzIndex(pv, pv),
                                         LorentzIndex(pv, pv))
            plain = mixed_lebesgue_norm(u, ExponentPair(pv, pv))
            diag_worst = max(diag_worst, abs(lorentz - plain) / plain)
        pv = p_values[0]
        ladder = [mixed_lorentz_norm(u, LorentzIndex(pv, 2.0),
                                     LorentzIndex(pv, ss))
                  for ss in secondaries]
        for hi, lo in zip(ladder, ladder[1:]):
            mono_worst = max(mono_worst, lo / hi - 1.0)
    _write_csv(os.path.join(outdir, "norms.csv"),
               ["field_id", "r", "q", "s_time", "s_space", "norm"], rows)

    checks = [
        _check("lorentz_diagonal", diag_worst, 1e-12, "<=",
               ANCHORS["lorentz_diagonal"]),
        _check("secondary_monotonicity", mono_worst, 1e-12, "<=",
               ANCHORS["lorentz_monotone"]),
    ]
    return checks, {}


_COMMANDS = {
    "verify": _cmd_verify,
    "green": _cmd_green,
    "cauchy": _cmd_cauchy,
    "offdiag": _cmd_offdiag,
    "gaussian": _cmd_gaussian,
    "coulomb": _cmd_coulomb,
    "gn": _cmd_gn,
    "norms": _cmd_norms,
}


def _load_manifest(path, command):
    if not os.path.exists(path):
        raise ManifestError(f"manifest not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            man = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"manifest is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(man, load_schema())
    except jsonschema.ValidationError as exc:
        raise ManifestError(f"manifest violates the schema: {exc.message}") from exc
    if man["command"] != command:
        raise ManifestError(f"manifest names command {man['command']!r}, "
                            f"but {command!r} was invoked")
    return man


def _write_summary(outdir, command, checks, wall, constants=None, error=None):
    summary = {"command": command,
               "pass": error is None and all(c["pass"] for c in checks),
               "checks": checks, "wall_time": wall}
    if constants:
        summary["constants"] = constants
    if error is not None:
        summary["error"] = error
    with open(os.path.join(outdir, "summary.json"), "w",
              encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")


def run_manifest(command, manifest_path, threads=1, out=None) -> int:
    """Programmatic entry point; same contract as the console script."""
    try:
        man = _load_manifest(manifest_path, command)
    except ManifestError as exc:
        print(f"greenop: {exc}", file=sys.stderr)
        return EXIT_SCHEMA

    base = os.path.dirname(os.path.abspath(manifest_path))
    outdir = out or man.get("out")
    if outdir is None:
        print("greenop: no output directory (--out or manifest 'out')",
              file=sys.stderr)
        return EXIT_SCHEMA
    outdir = os.path.join(base, outdir) if not os.path.isabs(outdir) else outdir
    os.makedirs(outdir, exist_ok=True)

    root = man.get("seed", 0)
    start = time.perf_counter()
    try:
        checks, constants = _COMMANDS[command](man, base, outdir, threads,
                                               root)
    except (ManifestError, ValueError) as exc:
        # geometry and precondition failures are manifest defects
        print(f"greenop: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except RuntimeError as exc:
        wall = time.perf_counter() - start
        _write_summary(outdir, command, [], wall, error=str(exc))
        print(f"greenop: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    wall = time.perf_counter() - start
    _write_summary(outdir, command, checks, wall, constants=constants)
    return EXIT_OK if all(c["pass"] for c in checks) else EXIT_CHECK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="greenop",
        description="Batch verification runs for periodic parabolic Green "
                    "operators; see docs/schema.json for the manifest format.")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--manifest", required=True,
                        help="path to the JSON run manifest")
    parser.add_argument("--threads", type=int, default=1,
                        help="propagator assembly threads "
                             "(GREENOP_THREADS overrides)")
    parser.add_argument("--out", help="output directory (overrides manifest)")
    args = parser.parse_args(argv)

    threads = args.threads
    env = os.environ.get("GREENOP_THREADS")
    if env is not None:
        try:
            threads = int(env)
        except ValueError:
            print(f"greenop: GREENOP_THREADS must be an integer, got {env!r}",
                  file=sys.stderr)
            return EXIT_SCHEMA
    if threads < 1:
        print("greenop: thread count must be >= 1", file=sys.stderr)
        return EXIT_SCHEMA

    return run_manifest(args.command, args.manifest, threads=threads,
                        out=args.out)


if __name__ == "__main__":
    sys.exit(main())
