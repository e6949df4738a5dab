"""Command-line interface: outputs, determinism and exit codes."""

from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from kvbeam import cli
from kvbeam.cli import EXIT_CONFIG, EXIT_INTERNAL, EXIT_NUMERICAL, EXIT_OK, EXIT_REFUSED, main
from kvbeam.errors import NumericalError

BASE = "L = 1.25\nl = 1.0\nalpha = 0.25\nbeta = 0.75\n"

FAST = {
    "simulate": ["simulate", "--n", "16", "--dt", "0.01", "--T", "1"],
    "scan": ["scan", "--n", "32", "--lambda-min", "1", "--lambda-max", "100", "--per-decade", "8"],
    "spectrum": ["spectrum", "--n", "16,32"],
    "optimality": ["optimality", "--n-max", "1000", "--count", "16"],
    "crosscheck": ["crosscheck", "--n", "16,32", "--lambda", "5.3"],
    "report": ["report", "--n", "16,32", "--no-time-domain"],
}

OUTPUTS = {
    "simulate": ["trace.csv", "fit.csv"],
    "scan": ["scan.csv", "envelope.csv"],
    "spectrum": ["spectrum_n16.csv", "spectrum_n32.csv", "bands.csv"],
    "optimality": ["optimality.csv"],
    "crosscheck": ["crosscheck.csv"],
    "report": ["verdicts.csv"],
}


def header(path):
    with open(path, newline="") as fh:
        return next(csv.reader(fh))


@pytest.fixture
def config_file(tmp_path):
    def write(text):
        path = tmp_path / "cfg.toml"
        path.write_text(text)
        return str(path)

    return write


class TestCommands:
    @pytest.mark.parametrize("command", sorted(FAST))
    def test_success_writes_outputs(self, tmp_path, command, capsys):
        out = tmp_path / command
        assert main(FAST[command] + ["--out", str(out)]) == EXIT_OK
        for name in OUTPUTS[command] + ["report.txt", "manifest.json"]:
            assert (out / name).is_file(), name
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == command
        assert manifest["exit_code"] == 0
        assert manifest["seeds"] == "none"
        assert set(manifest["outputs"]) == set(OUTPUTS[command]) | {"report.txt"}
        assert {"kvbeam", "numpy", "scipy", "python"} <= set(manifest["versions"])
        assert len(manifest["config_sha256"]) == 64 and "alpha" in manifest["config_text"]
        assert "total" in manifest["timings_seconds"]

    @pytest.mark.parametrize("command", sorted(FAST))
    def test_byte_deterministic(self, tmp_path, command, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(FAST[command] + ["--out", str(a)]) == EXIT_OK
        assert main(FAST[command] + ["--out", str(b)]) == EXIT_OK
        for name in OUTPUTS[command] + ["report.txt"]:
            assert (a / name).read_bytes() == (b / name).read_bytes(), name
        ma = json.loads((a / "manifest.json").read_text())
        mb = json.loads((b / "manifest.json").read_text())
        assert ma["outputs"] == mb["outputs"]

    def test_deterministic_across_processes(self, tmp_path):
        def run(out):
            cmd = [sys.executable, "-m", "kvbeam", *FAST["simulate"], "--kind", "longitudinal", "--T", "2",
                   "--out", str(out)]
            return subprocess.run(cmd, capture_output=True, text=True, check=False)

        a, b = run(tmp_path / "a"), run(tmp_path / "b")
        assert a.returncode == b.returncode
        assert a.stdout == b.stdout
        for name in ("trace.csv", "fit.csv", "report.txt"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name

    def test_csv_headers(self, tmp_path, capsys):
        out = tmp_path / "h"
        for command in ("simulate", "scan", "crosscheck", "optimality", "report"):
            assert main(FAST[command] + ["--out", str(out)]) == EXIT_OK
        assert header(out / "trace.csv") == ["t", "energy", "dissipated"]
        assert header(out / "fit.csv")[:3] == ["kind", "model", "rate"]
        assert header(out / "scan.csv") == ["lambda", "norm", "flag"]
        assert header(out / "crosscheck.csv") == [
            "kind", "lambda", "n_elems", "n_dofs", "discrepancy", "exact_norm", "pairwise_order"]
        assert header(out / "optimality.csv")[0] == "n"
        assert header(out / "verdicts.csv") == ["kind", "verdict", "evidence"]

    def test_hypothesis_report_printed(self, tmp_path, capsys):
        main(FAST["spectrum"] + ["--out", str(tmp_path)])
        assert "exp-stable-eligible: yes" in capsys.readouterr().out

    def test_undamped_simulation_conserves(self, tmp_path, capsys):
        assert main(["simulate", "--n", "16", "--dt", "0.01", "--T", "2", "--damping-scale", "0",
                     "--out", str(tmp_path)]) == EXIT_OK
        text = (tmp_path / "report.txt").read_text()
        drift = float(text.split("max_relative_drift=")[1].split()[0])
        assert drift <= 1e-10

    def test_report_verdict(self, tmp_path, capsys):
        assert main(["report", "--kind", "transversal", "--n", "16,32", "--no-time-domain",
                     "--out", str(tmp_path)]) == EXIT_OK
        assert "verdict=exponential" in (tmp_path / "report.txt").read_text()


class TestExitCodes:
    def test_bad_geometry(self, tmp_path, config_file, capsys):
        cfg = config_file("L = 1.25\nl = 1.0\nalpha = 0.75\nbeta = 0.25\n")
        assert main(FAST["spectrum"] + ["--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG
        assert "cfg.toml:4:" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path, config_file, capsys):
        cfg = config_file(BASE + "gamma = 1\n")
        assert main(FAST["simulate"] + ["--config", cfg, "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_usage_error(self, tmp_path, capsys):
        assert main(["bogus"]) == EXIT_CONFIG
        assert main(["scan", "--kind", "torsional"]) == EXIT_CONFIG

    def test_invalid_option_value(self, tmp_path, capsys):
        assert main(["simulate", "--dt", "-1", "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_refusal_and_force(self, tmp_path, config_file, capsys):
        cfg = config_file(BASE + "q1 = 1\nq2 = 0.5\n")
        args = ["spectrum", "--n", "16,32", "--config", cfg, "--out", str(tmp_path)]
        assert main(args) == EXIT_REFUSED
        assert "interface-moduli" in capsys.readouterr().err
        assert main(args + ["--force"]) == EXIT_OK
        assert "forced: interface-moduli" in (tmp_path / "report.txt").read_text()

    def test_refusal_does_not_apply_to_exact_commands(self, tmp_path, config_file, capsys):
        cfg = config_file(BASE + "q1 = 1\nq2 = 0.5\n")
        assert main(FAST["optimality"] + ["--config", cfg, "--out", str(tmp_path)]) == EXIT_OK

    def test_numerical_failure(self, tmp_path, capsys):
        assert main(["optimality", "--count", "3", "--out", str(tmp_path)]) == EXIT_NUMERICAL
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["exit_code"] == EXIT_NUMERICAL

    def test_unfittable_trace_is_still_written(self, tmp_path, capsys):
        args = ["simulate", "--kind", "longitudinal", "--n", "32", "--T", "1", "--out", str(tmp_path)]
        assert main(args) == EXIT_NUMERICAL
        assert header(tmp_path / "trace.csv") == ["t", "energy", "dissipated"]
        with open(tmp_path / "fit.csv", newline="") as fh:
            assert list(csv.reader(fh))[1][1] == "none"

    def test_numerical_failure_inside_solver(self, tmp_path, monkeypatch, capsys):
        def boom(*args, **kwargs):
            raise NumericalError("factorization failed")

        monkeypatch.setattr(cli, "decay_run", boom)
        assert main(FAST["simulate"] + ["--out", str(tmp_path)]) == EXIT_NUMERICAL
        assert "factorization failed" in capsys.readouterr().err

    def test_unwritable_output(self, tmp_path, capsys):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        assert main(FAST["optimality"] + ["--out", str(blocker)]) == EXIT_INTERNAL

    def test_version(self, capsys):
        assert main(["--version"]) == EXIT_OK
