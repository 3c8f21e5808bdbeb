import json

import numpy as np
import pytest

from ensemblecontrol.cli import main
from ensemblecontrol.io import read_control_csv, sha256_file


def run(tmp_path, *argv):
    return main(["--outdir", str(tmp_path), "--no-plot", *argv])


class TestDpssCommand:
    def test_emits_ordered_eigenvalues(self, tmp_path):
        assert run(tmp_path, "dpss", "--N", "8", "--W", "0.2", "--k", "4") == 0
        rows = (tmp_path / "dpss_eigenvalues.csv").read_text().strip().splitlines()
        assert rows[0] == "order,kappa"
        kappas = [float(r.split(",")[1]) for r in rows[1:]]
        assert len(kappas) == 4
        assert all(a > b for a, b in zip(kappas, kappas[1:]))
        seq_rows = (tmp_path / "dpss_sequences.csv").read_text().strip().splitlines()
        assert seq_rows[0] == "index,v0,v1,v2,v3"
        assert len(seq_rows) == 9

    def test_bad_bandwidth_is_config_error(self, tmp_path):
        assert run(tmp_path, "dpss", "--N", "8", "--W", "0.6") == 2


class TestQpCommand:
    def test_reruns_are_byte_identical(self, tmp_path):
        d1 = tmp_path / "a"
        d2 = tmp_path / "b"
        for d in (d1, d2):
            d.mkdir()
            assert main(["--outdir", str(d), "--no-plot", "qp",
                         "--T", "3.14159", "--n", "51"]) == 0
        for name in ("qp_solution.csv", "qp_distance.csv"):
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()

    def test_solution_respects_bound(self, tmp_path):
        assert run(tmp_path, "qp", "--T", "1.0", "--n", "21") == 0
        rows = (tmp_path / "qp_solution.csv").read_text().strip().splitlines()[1:]
        u = np.array([float(r.split(",")[1]) for r in rows])
        assert np.abs(u).max() <= 1.0 + 1e-12


class TestManifest:
    def test_lists_every_output_with_valid_hash(self, tmp_path):
        assert run(tmp_path, "qp", "--T", "1.0", "--n", "11") == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["schema"] == 1
        assert "wall_time_s" in manifest
        assert manifest["versions"]["ensemblecontrol"]
        names = {e["path"] for e in manifest["outputs"]}
        assert {"qp_solution.csv", "qp_distance.csv", "qp.json"} <= names
        for entry in manifest["outputs"]:
            assert sha256_file(tmp_path / entry["path"]) == entry["sha256"]

    def test_figures_are_rendered_and_listed(self, tmp_path):
        assert main(["--outdir", str(tmp_path), "qp", "--T", "1.0",
                     "--n", "11"]) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        names = {e["path"] for e in manifest["outputs"]}
        assert "qp.png" in names
        assert (tmp_path / "qp.png").stat().st_size > 0


class TestSynthCommand:
    def test_harmonic_synthesis_and_simulation_roundtrip(self, tmp_path):
        code = run(tmp_path, "synth", "--family", "harmonic",
                   "--params", '{"omega1": -4, "omega2": 4, "T": 1}',
                   "--nt", "101", "--ns", "81", "--eps", "0.05",
                   "--x0", "[[1,0]]", "--xF", "[[0,0]]")
        assert code == 0
        t, channels = read_control_csv(tmp_path / "control.csv")
        assert len(t) == 101
        payload = json.loads((tmp_path / "synthesis.json").read_text())
        assert payload["eps_reached"] is True
        assert payload["achieved_residual"] <= 0.05
        sim = run(tmp_path, "simulate", "--family", "harmonic",
                  "--params", '{"omega1": -4, "omega2": 4, "T": 1}',
                  "--control", str(tmp_path / "control.csv"),
                  "--ns", "81", "--x0", "[[1,0]]")
        assert sim == 0
        rows = (tmp_path / "final_state.csv").read_text().strip().splitlines()[1:]
        vals = np.array([[float(x) for x in r.split(",")] for r in rows])
        final_mag = np.hypot(vals[:, 1], vals[:, 2])
        assert final_mag.max() <= 0.06

    def test_unreachable_accuracy_exits_tolerance_code(self, tmp_path):
        code = run(tmp_path, "synth", "--family", "example1",
                   "--nt", "81", "--ns", "41", "--eps", "1e-6",
                   "--x0", "[[1,0],[0,0]]", "--xF", "[[0,0],[0,0]]")
        assert code == 4

    def test_unknown_family_is_config_error(self, tmp_path):
        assert run(tmp_path, "synth", "--family", "bogus") == 2

    def test_spec_json_file(self, tmp_path):
        spec = {"schema": 1, "family": "diagonal",
                "params": {"s1": 0.5, "s2": 1.0, "T": 1.0}}
        path = tmp_path / "family.json"
        path.write_text(json.dumps(spec))
        code = run(tmp_path, "synth", "--spec-json", str(path),
                   "--nt", "41", "--ns", "11", "--eps", "0.05",
                   "--x0", "[[1,0]]", "--xF", "[[0,0]]")
        assert code == 0

    def test_spec_json_requires_schema(self, tmp_path):
        path = tmp_path / "family.json"
        path.write_text(json.dumps({"family": "diagonal"}))
        assert run(tmp_path, "synth", "--spec-json", str(path)) == 2


class TestDiagnoseCommand:
    def test_reports_residual_floor_for_stiff_family(self, tmp_path):
        code = run(tmp_path, "diagnose", "--family", "example1",
                   "--nt", "81", "--ns", "41",
                   "--x0", "[[1,0],[0,0]]", "--xF", "[[0,0],[0,0]]")
        assert code == 0
        payload = json.loads((tmp_path / "diagnosis.json").read_text())
        assert payload["range_residual"] >= 0.1
        assert payload["range_condition_met"] is False


class TestDemoCommand:
    def test_fig2_small_emits_expected_files(self, tmp_path):
        code = run(tmp_path, "demo", "fig2", "--N", "301", "--eps", "1e-4")
        assert code == 0
        for name in ("fig2_control.csv", "fig2_final_state.csv",
                     "fig2_trajectories.csv", "manifest.json"):
            assert (tmp_path / name).exists()
        rows = (tmp_path / "fig2_final_state.csv").read_text().strip().splitlines()
        assert rows[0] == "omega,x,y"
        vals = np.array([[float(x) for x in r.split(",")] for r in rows[1:]])
        assert np.hypot(vals[:, 1], vals[:, 2]).max() <= 0.05
        traj_rows = (tmp_path / "fig2_trajectories.csv").read_text().splitlines()
        assert traj_rows[0] == "omega,t,x,y"
        omegas = {float(r.split(",")[0]) for r in traj_rows[1:]}
        assert omegas == {-10.0, 0.0, 5.0}

    def test_fig5_emits_solution_and_distance_per_horizon(self, tmp_path):
        code = run(tmp_path, "demo", "fig5")
        assert code == 0
        files = {p.name for p in tmp_path.iterdir()}
        assert sum(1 for f in files if f.endswith("_solution.csv")) == 4
        assert sum(1 for f in files if f.endswith("_distance.csv")) == 4
