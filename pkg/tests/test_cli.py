import json
import os

import jsonschema
import numpy as np
import pytest

from greenop.cli import load_schema, main, run_manifest
from greenop.estimates import gaussian_mu
from greenop.io import read_field, write_field, write_spatial_field
from greenop.lattice import Field, SpatialField, make_grid

REPO_SCHEMA = os.path.join(os.path.dirname(__file__), "..", "docs",
                           "schema.json")


def base_manifest(command, **extra):
    man = {
        "command": command,
        "grid": {"n": 1, "Nx": 32, "Lx": 20.0, "Nt": 64, "Lt": 10.0},
        "coefficients": {"generator": "identity"},
        "kappa": 2.0, "delta": 0.5, "tol": 1e-8, "mode": "inhomogeneous",
        "seed": 7,
        "out": "out",
    }
    man.update(extra)
    return man


def write_manifest(tmp_path, man, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(man))
    return str(path)


def run(tmp_path, man, name="run.json"):
    path = write_manifest(tmp_path, man, name)
    code = run_manifest(man["command"], path)
    summary = None
    summary_path = tmp_path / man.get("out", "out") / "summary.json"
    if summary_path.exists():
        summary = json.loads(summary_path.read_text())
    return code, summary


class TestSchema:
    def test_shipped_copy_matches_package_data(self):
        with open(REPO_SCHEMA, encoding="utf-8") as fh:
            assert json.load(fh) == load_schema()

    def test_schema_is_itself_valid(self):
        schema = load_schema()
        jsonschema.validators.validator_for(schema).check_schema(schema)

    def test_example_manifests_validate(self):
        schema = load_schema()
        jsonschema.validate(base_manifest(
            "verify", params={"s": 2.5, "r": 3.75, "t": 5.0}), schema)
        with pytest.raises(jsonschema.ValidationError):
            jsonschema.validate(base_manifest(
                "verify", params={"s": 2.5, "r": 3.75}), schema)
        with pytest.raises(jsonschema.ValidationError):
            jsonschema.validate(base_manifest(
                "verify", params={"s": 1, "r": 2, "t": 3}, grid={"n": 1}),
                schema)


class TestManifestHandling:
    def test_missing_manifest(self, capsys):
        assert run_manifest("verify", "/nonexistent/run.json") == 2
        assert "not found" in capsys.readouterr().err

    def test_invalid_json(self, tmp_path, capsys):
        path = tmp_path / "run.json"
        path.write_text("{not json")
        assert run_manifest("verify", str(path)) == 2
        assert "not valid JSON" in capsys.readouterr().err

    def test_schema_violation(self, tmp_path, capsys):
        man = base_manifest("verify", params={"s": 2.5, "r": 3.75})
        code, summary = run(tmp_path, man)
        assert code == 2
        assert summary is None
        assert "schema" in capsys.readouterr().err

    def test_command_mismatch(self, tmp_path, capsys):
        man = base_manifest("green",
                            params={"s": 2.5, "source": {"kind": "lowmode"}})
        path = write_manifest(tmp_path, man)
        assert run_manifest("verify", path) == 2
        assert "names command" in capsys.readouterr().err

    def test_missing_out_dir(self, tmp_path, capsys):
        man = base_manifest("verify", params={"s": 2.5, "r": 3.75, "t": 5.0})
        del man["out"]
        code, _ = run(tmp_path, man)
        assert code == 2
        assert "output directory" in capsys.readouterr().err

    def test_bad_thread_env(self, tmp_path, monkeypatch, capsys):
        man = base_manifest("verify", params={"s": 2.5, "r": 3.75, "t": 5.0})
        path = write_manifest(tmp_path, man)
        monkeypatch.setenv("GREENOP_THREADS", "many")
        assert main(["verify", "--manifest", path]) == 2
        assert "GREENOP_THREADS" in capsys.readouterr().err


class TestVerifyCommand:
    def test_identity_fixture_passes(self, tmp_path):
        man = base_manifest("verify", params={"s": 2.5, "r": 3.75, "t": 5.0})
        code, summary = run(tmp_path, man)
        assert code == 0
        assert summary["pass"] is True
        names = [c["name"] for c in summary["checks"]]
        assert names == ["coercivity", "jump", "chapman_kolmogorov",
                         "adjoint", "causality"]
        for row in summary["checks"]:
            assert set(row) == {"name", "value", "threshold", "op", "pass",
                                "anchor"}
            assert row["anchor"]
        csv_path = tmp_path / "out" / "identity.csv"
        header = csv_path.read_text().splitlines()[0]
        assert header == "check,s,r,t,kappa,defect,threshold,pass"

    def test_unordered_times_rejected(self, tmp_path):
        man = base_manifest("verify", params={"s": 5.0, "r": 3.75, "t": 2.5})
        code, summary = run(tmp_path, man)
        assert code == 2
        assert summary is None


class TestGreenCommand:
    def params(self):
        return {"s": 2.5, "source": {"kind": "cell", "center": [5.0]}}

    def test_column_artifact_round_trips(self, tmp_path):
        man = base_manifest("green", params=self.params())
        code, summary = run(tmp_path, man)
        assert code == 0
        grid = make_grid(1, 32, 20.0, 64, 10.0)
        column = read_field(tmp_path / "out" / "column.gof1", grid)
        assert np.all(np.isfinite(column.data))
        assert summary["constants"]["iterations"] >= 1

    def test_reproducible_byte_for_byte(self, tmp_path):
        man = base_manifest("green", params=self.params())
        path = write_manifest(tmp_path, man)
        run_manifest("green", path, out=str(tmp_path / "a"))
        run_manifest("green", path, out=str(tmp_path / "b"))
        a = json.loads((tmp_path / "a" / "summary.json").read_text())
        b = json.loads((tmp_path / "b" / "summary.json").read_text())
        assert json.dumps(a["checks"]) == json.dumps(b["checks"])
        assert (tmp_path / "a" / "column.gof1").read_bytes() == \
            (tmp_path / "b" / "column.gof1").read_bytes()

    def test_nonconvergence_exits_3_with_summary(self, tmp_path):
        # identity coefficients converge exactly; roughness forces iteration
        man = base_manifest(
            "green", params=self.params(), tol=1e-14, max_iter=1,
            coefficients={"generator": "random_elliptic", "seed": 3,
                          "params": {"lam": 0.75, "Lam": 1.4}})
        code, summary = run(tmp_path, man)
        assert code == 3
        assert summary["pass"] is False
        assert "converge" in summary["error"]

    def test_file_source(self, tmp_path):
        grid = make_grid(1, 32, 20.0, 64, 10.0)
        psi = SpatialField(grid, np.exp(2j * np.pi * np.arange(32) / 32))
        write_spatial_field(tmp_path / "psi.gof1", psi)
        man = base_manifest(
            "green", params={"s": 2.5,
                             "source": {"kind": "file", "path": "psi.gof1"}})
        code, summary = run(tmp_path, man)
        assert code == 0

    def test_coefficient_manifest_path(self, tmp_path):
        grid = make_grid(1, 32, 20.0, 64, 10.0)
        comp = {"A": ["A00.gof1"], "avec": ["av0.gof1"],
                "bvec": ["bv0.gof1"], "a0": "a0.gof1"}
        write_field(tmp_path / "A00.gof1", Field(grid, np.ones(grid.shape)))
        for name in ("av0", "bv0", "a0"):
            write_field(tmp_path / f"{name}.gof1",
                        Field(grid, np.zeros(grid.shape)))
        (tmp_path / "coeffs.json").write_text(json.dumps(comp))
        man = base_manifest("green", params=self.params(),
                            coefficients="coeffs.json")
        code, summary = run(tmp_path, man)
        assert code == 0
        assert summary["pass"] is True


class TestCauchyCommand:
    def test_evolution_artifact(self, tmp_path):
        man = base_manifest(
            "cauchy", params={"T": 5.0, "initial": {"kind": "lowmode"}})
        code, summary = run(tmp_path, man)
        assert code == 0
        assert (tmp_path / "out" / "solution.gof1").exists()
        names = [c["name"] for c in summary["checks"]]
        assert "converged" in names


class TestOffdiagCommand:
    def params(self, E_center=10.0):
        return {
            "E": {"center": [E_center], "radius": 0.7},
            "F": {"center": [5.0], "radius": 0.7},
            "pairs": [[2.5, 3.125], [2.5, 3.4375], [2.5, 3.75],
                      [2.5, 4.375], [2.5, 5.0], [2.5, 6.25]],
        }

    def test_identity_profile(self, tmp_path):
        man = base_manifest("offdiag", params=self.params())
        code, summary = run(tmp_path, man)
        assert code == 0
        assert 0.8 <= summary["constants"]["c0"] <= 1.3
        lines = (tmp_path / "out" / "offdiag.csv").read_text().splitlines()
        assert lines[0] == "s,t,dEF,value,bound,pass"
        assert len(lines) == 7

    def test_wide_gap_is_a_schema_error(self, tmp_path, capsys):
        man = base_manifest("offdiag", params=self.params(E_center=13.125))
        man["params"]["E"]["radius"] = 0.1
        man["params"]["F"]["radius"] = 0.1
        code, summary = run(tmp_path, man)
        assert code == 2
        assert summary is None
        assert "quarter period" in capsys.readouterr().err


class TestGaussianCommand:
    def test_kernel_audit_passes(self, tmp_path):
        man = base_manifest(
            "gaussian",
            grid={"n": 1, "Nx": 32, "Lx": 10.0, "Nt": 64, "Lt": 10.0},
            params={
                "fit": {"E": {"center": [5.0], "radius": 0.35},
                        "F": {"center": [2.5], "radius": 0.35},
                        "pairs": [[2.5, 2.8125], [2.5, 2.96875],
                                  [2.5, 3.125], [2.5, 3.4375], [2.5, 3.75]]},
                "local": {"bump": {"center": [2.5], "width": 0.8, "s": 2.5},
                          "r": 1.25,
                          "centers": [[9.375, 0.0], [9.375, 2.5],
                                      [9.375, 5.0], [9.375, 7.5]]},
                "kernel": {"s": 2.5, "steps": 2},
            })
        code, summary = run(tmp_path, man)
        assert code == 0
        const = summary["constants"]
        assert const["mu"] == pytest.approx(
            gaussian_mu(1, const["B"], const["C"], const["c0"]))
        lines = (tmp_path / "out" / "gaussian.csv").read_text().splitlines()
        assert lines[0] == "t,s,x,y,abs_kernel,bound,ratio"
        assert len(lines) == 1 + 2 * 32 * 32


class TestCoulombCommand:
    def test_sweep_brackets_the_threshold(self, tmp_path):
        man = base_manifest(
            "coulomb",
            grid={"n": 3, "Nx": 32, "Lx": 8.0, "Nt": 64, "Lt": 10.0},
            params={"M": 304.0, "values": [-0.4, -0.3, -0.2, -0.1, 0.0],
                    "window": [-0.30, -0.20], "probes": 4})
        del man["coefficients"]
        code, summary = run(tmp_path, man)
        assert code == 0
        assert summary["constants"]["crossing"] == pytest.approx(-0.2488,
                                                                 abs=2e-3)
        lines = (tmp_path / "out" / "coulomb.csv").read_text().splitlines()
        assert lines[0] == "re_c,ratio,pass"
        assert len(lines) == 6
        assert lines[1].endswith("False") and lines[-1].endswith("True")


class TestGnCommand:
    def gn_manifest(self, max_ratio):
        man = base_manifest(
            "gn", grid={"n": 1, "Nx": 32, "Lx": 10.0, "Nt": 32, "Lt": 5.0},
            params={"count": 10, "alpha": [0], "m": 1, "pair": [8, 4],
                    "max_ratio": max_ratio})
        del man["coefficients"]
        return man

    def test_ratio_suite(self, tmp_path):
        code, summary = run(tmp_path, self.gn_manifest(1.0))
        assert code == 0
        lines = (tmp_path / "out" / "gn.csv").read_text().splitlines()
        assert lines[0] == "field_id,ratio"
        assert len(lines) == 11

    def test_tight_threshold_fails_check(self, tmp_path):
        code, summary = run(tmp_path, self.gn_manifest(1e-6))
        assert code == 1
        assert summary["pass"] is False


class TestNormsCommand:
    def test_sweep_and_identities(self, tmp_path):
        man = base_manifest(
            "norms", grid={"n": 1, "Nx": 32, "Lx": 10.0, "Nt": 32, "Lt": 5.0},
            params={"count": 10,
                    "rows": [{"r": 4, "q": 2, "s_time": 2, "s_space": 2},
                             {"r": 3, "q": 3, "s_time": 3, "s_space": 3}]})
        del man["coefficients"]
        code, summary = run(tmp_path, man)
        assert code == 0
        names = {c["name"]: c for c in summary["checks"]}
        assert names["lorentz_diagonal"]["value"] <= 1e-12
        assert names["secondary_monotonicity"]["pass"]
        lines = (tmp_path / "out" / "norms.csv").read_text().splitlines()
        assert lines[0] == "field_id,r,q,s_time,s_space,norm"
        assert len(lines) == 21
