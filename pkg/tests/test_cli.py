import csv
import json

import pytest

from surfpc import cli
from surfpc.forces import rescale, test2_profile, write_force_csv


def run(tmp_path, *args):
    return cli.main([*args, "--out", str(tmp_path)])


class TestExitCodes:
    def test_check_ok(self, tmp_path, capsys):
        assert run(tmp_path, "check") == cli.EXIT_OK
        out = capsys.readouterr().out
        assert "PASS  dW(0) = 0 (bulk equilibrium)" in out
        summary = json.loads((tmp_path / "check_summary.json").read_text())
        assert summary["passed"]

    def test_check_broken_potential(self, tmp_path, capsys):
        # alpha/beta mismatch against rho_e breaks bulk equilibrium, not derivatives
        cfg = tmp_path / "pot.txt"
        cfg.write_text("rho_e = 2.5\n")
        assert run(tmp_path, "check", "--potential", str(cfg)) == cli.EXIT_SOLVER
        err = capsys.readouterr().err
        assert "dW(0) = 0 (bulk equilibrium)" in err

    def test_unknown_parameter(self, tmp_path):
        cfg = tmp_path / "pot.txt"
        cfg.write_text("phi_e = 10\nzeta = 1\n")
        assert run(tmp_path, "check", "--potential", str(cfg)) == cli.EXIT_CONFIG

    def test_missing_file(self, tmp_path):
        assert run(tmp_path, "check", "--potential", str(tmp_path / "nope")) == cli.EXIT_CONFIG

    def test_solver_failure(self, tmp_path):
        assert run(tmp_path, "fixed-force", "--n", "100", "--max-iter", "2") == cli.EXIT_SOLVER

    def test_force_too_large(self, tmp_path):
        path = tmp_path / "f.csv"
        write_force_csv(50.0 * rescale(test2_profile, 1.0), path)
        assert run(tmp_path, "error-budget", "--force", str(path)) == cli.EXIT_CONFIG

    def test_bad_builtin(self, tmp_path):
        assert run(tmp_path, "error-budget", "--force", "builtin:nope") == cli.EXIT_CONFIG

    def test_usage_error(self):
        with pytest.raises(SystemExit) as info:
            cli.main(["no-such-command"])
        assert info.value.code == 2


class TestOutputs:
    def test_ground_state(self, tmp_path):
        assert run(tmp_path, "ground-state", "--n", "200", "--layers", "2,5") == 0
        rows = list(csv.DictReader(open(tmp_path / "ground_state_errors.csv")))
        assert [int(r["L"]) for r in rows] == [2, 5]
        summary = json.loads((tmp_path / "ground-state_summary.json").read_text())
        assert summary["alternating_sign"]
        assert summary["surface_residual"] > 0
        prof = list(csv.DictReader(open(tmp_path / "ground_state_profiles.csv")))
        assert len(prof) == 200 and "pc_L5" in prof[0]

    def test_manifest_contents(self, tmp_path):
        assert run(tmp_path, "error-budget", "--n", "50", "--tol", "1e-9", "--lambda", "0.5,0.25") == 0
        man = json.loads((tmp_path / "error-budget_manifest.json").read_text())
        assert man["settings"]["n"] == 50
        assert man["solver"]["grad_tol"] == 1e-9
        assert man["potential"]["phi_e"] == 10.6
        rows = list(csv.DictReader(open(tmp_path / "error_budget.csv")))
        assert [float(r["lambda"]) for r in rows] == [0.5, 0.25]

    def test_manifest_replay_is_bitwise(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["fixed-force", "--n", "200", "--layers", "0,3,5", "--out", str(a)]) == 0
        assert cli.main(["fixed-force", "--manifest", str(a / "fixed-force_manifest.json"), "--out", str(b)]) == 0
        for name in ["fixed_force_errors.csv", "fixed_force_profiles.csv", "fixed-force_summary.json"]:
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_manifest_wrong_command(self, tmp_path):
        assert cli.main(["check", "--out", str(tmp_path)]) == 0
        assert cli.main(["ground-state", "--manifest", str(tmp_path / "check_manifest.json"),
                         "--out", str(tmp_path)]) == cli.EXIT_CONFIG

    def test_json_format_and_trace(self, tmp_path):
        assert run(tmp_path, "fixed-force", "--n", "150", "--layers", "5", "--format", "json", "--trace") == 0
        rows = json.loads((tmp_path / "fixed_force_errors.json").read_text())
        assert {r["L"] for r in rows} == {5}
        trace = list(csv.reader(open(tmp_path / "atomistic_trace.csv")))
        assert trace[0][0] == "iteration"

    def test_long_wavelength_from_csv(self, tmp_path):
        path = tmp_path / "f.csv"
        write_force_csv(rescale(test2_profile, 1.0), path)
        assert run(tmp_path, "long-wavelength", "--n", "200", "--lambda", "0.5,0.25", "--force", str(path)) == 0
        rows = list(csv.DictReader(open(tmp_path / "long_wavelength.csv")))
        assert len(rows) == 2

    def test_converge(self, tmp_path):
        assert run(tmp_path, "converge-L", "--layers", "2,4,6", "--ref-layer", "20") == 0
        report = json.loads((tmp_path / "corrector_L20.json").read_text())
        assert report["layer_width"] == 20
        assert 0 < report["mu_q_fit"]["mu"] < 1

    def test_module_entry_point(self, tmp_path):
        import subprocess
        import sys

        proc = subprocess.run([sys.executable, "-m", "surfpc", "check", "--out", str(tmp_path)],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "PASS" in proc.stdout
