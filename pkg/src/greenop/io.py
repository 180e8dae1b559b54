"""Binary field and propagator file formats, plus coefficient manifests.

GOF1 (field): one UTF-8 JSON header line
  {"magic":"GOF1","n":...,"Nx":...,"Nt":...,"Lx":...,"Lt":...,
   "layout":"t-major","scalar":"complex-f64-le"}
terminated by a newline, followed by Nt*Nx^n interleaved little-endian IEEE-754
float64 (re, im) pairs.  A spatial slice uses the same header with "Nt": 1.

GOP1 (propagator): header {"magic":"GOP1","n","Nx","Lx","s","t","kappa","flag"}
followed by the dense Nx^n x Nx^n complex matrix, row-major, as (re, im) pairs.
"""

from __future__ import annotations

import json

import numpy as np

from .lattice import Field, SpaceTimeGrid, SpatialField, make_grid

__all__ = (
    "write_field",
    "read_field",
    "write_spatial_field",
    "read_spatial_field",
    "write_propagator",
    "read_propagator",
    "read_coefficient_manifest",
)


class FormatError(ValueError):
    """Raised when a file does not follow the declared binary layout."""


def _write_complex(fh, data: np.ndarray):
    flat = np.ascontiguousarray(data, dtype="<c16")
    fh.write(flat.tobytes())


def _read_complex(fh, count: int) -> np.ndarray:
    raw = fh.read(16 * count)
    if len(raw) != 16 * count:
        raise FormatError(f"truncated payload: expected {count} complex entries")
    return np.frombuffer(raw, dtype="<c16").astype(complex)


def _header(fh) -> dict:
    line = fh.readline()
    if not line.endswith(b"\n"):
        raise FormatError("missing newline-terminated header")
    try:
        head = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable header: {exc}") from exc
    return head


def write_field(path, u: Field):
    g = u.grid
    head = {"magic": "GOF1", "n": g.n, "Nx": g.Nx, "Nt": g.Nt,
            "Lx": g.Lx, "Lt": g.Lt, "layout": "t-major",
            "scalar": "complex-f64-le"}
    with open(path, "wb") as fh:
        fh.write((json.dumps(head) + "\n").encode("utf-8"))
        _write_complex(fh, u.data)


def write_spatial_field(path, psi: SpatialField):
    g = psi.grid
    head = {"magic": "GOF1", "n": g.n, "Nx": g.Nx, "Nt": 1,
            "Lx": g.Lx, "Lt": g.Lt, "layout": "t-major",
            "scalar": "complex-f64-le"}
    with open(path, "wb") as fh:
        fh.write((json.dumps(head) + "\n").encode("utf-8"))
        _write_complex(fh, psi.data)


def _check_gof1(head: dict):
    if head.get("magic") != "GOF1":
        raise FormatError(f"bad magic {head.get('magic')!r}, expected GOF1")
    if head.get("layout") != "t-major" or head.get("scalar") != "complex-f64-le":
        raise FormatError("unsupported layout or scalar kind")


def read_field(path, grid: SpaceTimeGrid | None = None) -> Field:
    """Read a full space-time field; grid, when given, must match the header."""
    with open(path, "rb") as fh:
        head = _header(fh)
        _check_gof1(head)
        g = make_grid(head["n"], head["Nx"], head["Lx"], head["Nt"], head["Lt"])
        if grid is not None and grid != g:
            raise FormatError(f"field grid {g} does not match expected {grid}")
        data = _read_complex(fh, g.Nt * g.Nx ** g.n).reshape(g.shape)
    return Field(g, data)


def read_spatial_field(path, grid: SpaceTimeGrid) -> SpatialField:
    """Read a one-slice field (header with "Nt": 1) against a known grid."""
    with open(path, "rb") as fh:
        head = _header(fh)
        _check_gof1(head)
        if head["Nt"] != 1:
            raise FormatError("expected a spatial slice (Nt == 1)")
        if (head["n"], head["Nx"]) != (grid.n, grid.Nx) or head["Lx"] != grid.Lx:
            raise FormatError("slice geometry does not match the grid")
        data = _read_complex(fh, grid.Nx ** grid.n).reshape(grid.spatial_shape)
    return SpatialField(grid, data)


def write_propagator(path, prop):
    head = {"magic": "GOP1", "n": prop.grid.n, "Nx": prop.grid.Nx,
            "Lx": prop.grid.Lx, "s": prop.s, "t": prop.t,
            "kappa": prop.kappa, "flag": prop.flag}
    with open(path, "wb") as fh:
        fh.write((json.dumps(head) + "\n").encode("utf-8"))
        _write_complex(fh, prop.entries)


def read_propagator(path, grid: SpaceTimeGrid):
    from .green import PropagatorMatrix

    with open(path, "rb") as fh:
        head = _header(fh)
        if head.get("magic") != "GOP1":
            raise FormatError(f"bad magic {head.get('magic')!r}, expected GOP1")
        if (head["n"], head["Nx"]) != (grid.n, grid.Nx) or head["Lx"] != grid.Lx:
            raise FormatError("propagator geometry does not match the grid")
        dim = grid.Nx ** grid.n
        entries = _read_complex(fh, dim * dim).reshape(dim, dim)
    return PropagatorMatrix(grid=grid, s=head["s"], t=head["t"],
                            kappa=head["kappa"], flag=head["flag"],
                            entries=entries)


def read_coefficient_manifest(path, grid: SpaceTimeGrid):
    """Load a CoefficientSet from a JSON manifest of GOF1 component files.

    Layout: {"A": [n*n paths, row-major], "avec": [n paths], "bvec": [n paths],
    "a0": path}.  Paths are resolved relative to the manifest location.
    """
    import os

    from .operators import CoefficientSet

    with open(path, "r", encoding="utf-8") as fh:
        man = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))

    def load(rel):
        return read_field(os.path.join(base, rel), grid).data

    n = grid.n
    if len(man["A"]) != n * n:
        raise FormatError(f"A needs {n * n} component files, got {len(man['A'])}")
    if len(man["avec"]) != n or len(man["bvec"]) != n:
        raise FormatError(f"avec/bvec need {n} component files each")
    A = np.empty(grid.shape + (n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            A[..., i, j] = load(man["A"][i * n + j])
    avec = np.empty(grid.shape + (n,), dtype=complex)
    bvec = np.empty(grid.shape + (n,), dtype=complex)
    for i in range(n):
        avec[..., i] = load(man["avec"][i])
        bvec[..., i] = load(man["bvec"][i])
    a0 = load(man["a0"])
    return CoefficientSet(grid=grid, A=A, avec=avec, bvec=bvec, a0=a0)
