import json
import subprocess
import sys

import numpy as np
import pytest

from nelliptic.cli import main, parse_expression
from nelliptic.errors import ParameterError
from nelliptic.grid import GridFunction, read_grid, write_grid


def run_cli(args, cwd=None):
    proc = subprocess.run(
        [sys.executable, "-m", "nelliptic.cli"] + args,
        capture_output=True,
        cwd=cwd,
    )
    return proc.returncode, proc.stdout, proc.stderr


class TestExpressions:
    def test_polynomial(self):
        f = parse_expression("0.5*(x1^2+x2^2)")
        assert f([2.0, 1.0]) == pytest.approx(2.5)

    def test_abs_and_r(self):
        f = parse_expression("abs(x1) - r/2")
        assert f([-3.0, 4.0]) == pytest.approx(3.0 - 2.5)

    def test_precedence_and_unary(self):
        f = parse_expression("-x1^2 + 2*x1*x2 - 1")
        assert f([2.0, 3.0]) == pytest.approx(-4.0 + 12.0 - 1.0)

    def test_bad_expressions(self):
        for text in ("x3", "sin(x1)", "1 +", "(x1", "abs x1"):
            with pytest.raises(ParameterError):
                parse_expression(text)


class TestGridFile:
    def test_round_trip_bits(self, tmp_path):
        rng = np.random.default_rng(0)
        g = GridFunction(2, (5, 7), (-1.0, 0.25), 1 / 3, rng.normal(size=(5, 7)))
        p1 = tmp_path / "a.grid"
        p2 = tmp_path / "b.grid"
        write_grid(g, p1)
        g2 = read_grid(p1)
        write_grid(g2, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert np.array_equal(g.values, g2.values)
        assert g2.origin == g.origin and g2.spacing == g.spacing

    def test_1d_round_trip(self, tmp_path):
        g = GridFunction(1, (9,), (-2.0,), 0.5, np.linspace(0, 1, 9))
        write_grid(g, tmp_path / "c.grid")
        g2 = read_grid(tmp_path / "c.grid")
        assert np.array_equal(g.values, g2.values)


class TestSubcommands:
    def test_probe_record(self, capsys):
        rc = main(["probe", "--op", "mc", "--rho", "1", "--samples", "40", "--pairs", "10"])
        assert rc == 0
        rec = json.loads(capsys.readouterr().out)
        assert rec["kind"] == "probe"
        assert rec["lambda_hat"] == pytest.approx(2**0.5 / 4, abs=1e-3)
        assert rec["config"]["rho"] == 1

    def test_analyze_record(self, capsys):
        rc = main(
            ["analyze", "--fixture", "slag:0.4", "--point", "0,0", "--degree", "1",
             "--levels", "5"]
        )
        assert rc == 0
        rec = json.loads(capsys.readouterr().out)
        assert rec["kind"] == "regularity"
        assert abs(rec["alpha_hat"] - 0.4) < 0.05

    def test_analyze_csv(self, tmp_path, capsys):
        csv = tmp_path / "decay.csv"
        rc = main(
            ["analyze", "--fixture", "power:1.5", "--point", "0", "--degree", "1",
             "--levels", "4", "--csv", str(csv)]
        )
        assert rc == 0
        capsys.readouterr()
        lines = csv.read_text().strip().splitlines()
        assert lines[0] == "r,E,osc"
        assert len(lines) == 6  # header + levels+1 scales

    def test_solve_and_abp(self, tmp_path, capsys):
        out = tmp_path / "u.grid"
        rc = main(
            ["solve", "--eq", "linear", "--box=-1,1", "--h", "0.125",
             "--f", "1", "--g", "0", "--out", str(out)]
        )
        assert rc == 0
        capsys.readouterr()
        rc = main(
            ["abp", "--input", str(out), "--f", "1", "--lambda", "1", "--Lambda", "1"]
        )
        assert rc == 0
        rec = json.loads(capsys.readouterr().out)
        assert rec["kind"] == "abp" and rec["sup_uminus"] > 0

    def test_check_fixture(self, capsys):
        rc = main(
            ["check", "--fixture", "quadratic", "--box=-1,1", "--h", "0.25",
             "--f", "rhs", "--side", "both", "--tol", "1e-6"]
        )
        assert rc == 0
        rec = json.loads(capsys.readouterr().out)
        assert rec["counts"]["sub"]["fail"] == 0
        assert rec["counts"]["super"]["fail"] == 0

    def test_normalize_stream(self, capsys):
        rc = main(
            ["normalize", "--fixture", "quadratic", "--point", "0,0",
             "--heights", "0.01,0.02", "--rays", "64"]
        )
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 2
        for ln in lines:
            rec = json.loads(ln)
            assert rec["kind"] == "normalize"
            assert rec["product"] == pytest.approx(0.25, rel=1e-4)

    def test_fixtures_list_and_eval(self, capsys):
        assert main(["fixtures", "list"]) == 0
        out = capsys.readouterr().out
        kinds = {json.loads(ln)["kind"] for ln in out.strip().splitlines()}
        assert kinds == {"fixtures", "fixture_claim"}
        assert main(["fixtures", "eval", "--fixture", "slag:0.4", "--point", "0.3,0.2"]) == 0
        rec = json.loads(capsys.readouterr().out)
        assert "rhs" in rec and "hess" in rec

    def test_solve_mc_expression_boundary(self, tmp_path, capsys):
        out = tmp_path / "mc.grid"
        rc = main(
            ["solve", "--eq", "mc", "--box=-1,1", "--h", "0.125", "--f", "0",
             "--g", "0.02*x1 - 0.01*x2", "--out", str(out)]
        )
        assert rc == 0
        capsys.readouterr()
        g = read_grid(out)
        exact = np.array([0.02 * p[0] - 0.01 * p[1] for p in g.points()]).reshape(g.shape)
        assert np.max(np.abs(g.values - exact)) < 1e-9


class TestExitCodes:
    def test_usage_error_is_2(self):
        rc, _, _ = run_cli(["nonsense"])
        assert rc == 2

    def test_numeric_error_is_3(self, capsys):
        rc = main(["analyze", "--fixture", "pmc:0.9", "--point", "1,0", "--degree", "0"])
        assert rc == 3
        rec = json.loads(capsys.readouterr().out)
        assert rec["kind"] == "error" and rec["error"] == "ParameterError"

    def test_success_is_0(self, capsys):
        assert main(["fixtures", "list"]) == 0
        capsys.readouterr()


class TestDeterminism:
    def test_repeated_runs_byte_identical(self):
        args = [
            "probe", "--op", "slag", "--rho", "1", "--samples", "30",
            "--pairs", "10", "--seed", "3",
        ]
        rc1, out1, _ = run_cli(args)
        rc2, out2, _ = run_cli(args)
        assert rc1 == rc2 == 0
        assert out1 == out2
