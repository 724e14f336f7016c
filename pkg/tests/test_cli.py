"""Command line contract: run directories, CSV/JSON shape, exit codes."""

import json
import subprocess
import sys

import numpy as np
import pytest
from click.testing import CliRunner

from kgh.cli import main
from kgh.snapshots import ROLE_ASYMPTOTIC, read_snapshot

SIM = """
[grid]
dim = 1
extent = 20.0
points = 64

[potential]
kind = "power"
gamma = 0.5
mode = "exploratory"

[integrator]
dt = 0.1
t_end = 2.0
snapshot_stride = 5

[initial-data]
kind = "gaussian"
width = 1.5
amplitude = 0.2

[diagnostics.energy]
enabled = true
max_drift = 1e-3

[output]
directory = "runs"
snapshot_stride = 2
"""

SCATTER = """
[grid]
dim = 1
extent = 60.0
points = 256

[potential]
kind = "power"
gamma = 0.5
mode = "exploratory"

[integrator]
dt = 0.1
t_end = 18.0
snapshot_stride = 10

[initial-data]
kind = "gaussian"
width = 1.5
amplitude = 0.1

[diagnostics.scattering]
t_schedule = [6.0, 12.0, 18.0]
extraction_times = [6.0, 12.0, 18.0]
tol = 5e-3
"""


@pytest.fixture
def runner():
    return CliRunner()


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestSimulate:
    def test_run_dir_contents(self, runner, tmp_path):
        cfg = write(tmp_path, "sim.toml", SIM)
        out = tmp_path / "run"
        result = runner.invoke(main, ["simulate", cfg, "--outdir", str(out)])
        assert result.exit_code == 0, result.output
        assert "PASS energy_drift" in result.output
        assert "PASS no_blowup" in result.output
        lines = (out / "energy.csv").read_text().splitlines()
        assert lines[0] == "time,total,drift,mean_density"
        assert len(lines) == 22  # header + 21 steps
        summary = json.loads((out / "summary.json").read_text())
        assert summary["command"] == "simulate"
        assert len(summary["config_hash"]) == 16
        assert set(summary["versions"]) == {"kgh", "numpy", "scipy", "python"}
        assert summary["verdicts"] == {"energy_drift": True, "no_blowup": True}
        assert summary["energy"]["max"] >= summary["energy"]["min"]

    def test_seventeen_digit_csv(self, runner, tmp_path):
        cfg = write(tmp_path, "sim.toml", SIM)
        out = tmp_path / "run"
        runner.invoke(main, ["simulate", cfg, "--outdir", str(out)])
        row = (out / "energy.csv").read_text().splitlines()[2].split(",")
        # a generic double needs 17 significant digits to round trip
        assert float(row[1]) != 0
        assert len(row[1].replace(".", "").replace("-", "").lstrip("0")) >= 16

    def test_verdict_failure_exits_1(self, runner, tmp_path):
        cfg = write(tmp_path, "sim.toml", SIM.replace("max_drift = 1e-3", "max_drift = 1e-15"))
        result = runner.invoke(main, ["simulate", cfg, "--outdir", str(tmp_path / "r")])
        assert result.exit_code == 1
        assert "FAIL energy_drift" in result.output

    def test_snapshot_files_at_output_stride(self, runner, tmp_path):
        cfg = write(tmp_path, "sim.toml", SIM)
        out = tmp_path / "run"
        runner.invoke(main, ["simulate", cfg, "--outdir", str(out)])
        files = sorted(out.glob("state_*.kgh"))
        # 5 trajectory snapshots, output stride 2 -> indices 0, 2, 4
        assert [f.name for f in files] == [
            "state_000000.kgh", "state_000002.kgh", "state_000004.kgh",
        ]
        state, role = read_snapshot(files[-1])
        assert role == 0
        assert state.time == pytest.approx(2.0)

    def test_stride_zero_disables_snapshots(self, runner, tmp_path):
        cfg = write(tmp_path, "sim.toml", SIM.replace("snapshot_stride = 2", "snapshot_stride = 0"))
        out = tmp_path / "run"
        runner.invoke(main, ["simulate", cfg, "--outdir", str(out)])
        assert list(out.glob("state_*.kgh")) == []

    def test_bitwise_deterministic(self, runner, tmp_path):
        cfg = write(tmp_path, "sim.toml", SIM)
        a, b = tmp_path / "a", tmp_path / "b"
        runner.invoke(main, ["simulate", cfg, "--outdir", str(a)])
        runner.invoke(main, ["simulate", cfg, "--outdir", str(b)])
        assert (a / "energy.csv").read_bytes() == (b / "energy.csv").read_bytes()
        assert (a / "snapshots.csv").read_bytes() == (b / "snapshots.csv").read_bytes()
        assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()

    def test_timestamped_dir_without_outdir(self, runner, tmp_path):
        with runner.isolated_filesystem(temp_dir=tmp_path):
            cfg = write(tmp_path, "sim.toml", SIM)
            result = runner.invoke(main, ["simulate", cfg])
            assert result.exit_code == 0
            from pathlib import Path

            dirs = list(Path("runs").glob("*-simulate"))
            assert len(dirs) == 1
            assert (dirs[0] / "summary.json").exists()


class TestExitCodes:
    def test_config_violations_exit_2_and_all_reported(self, runner, tmp_path):
        cfg = write(tmp_path, "bad.toml", "[grid]\ndim = 1\n")
        result = runner.invoke(main, ["simulate", cfg, "--outdir", str(tmp_path / "r")])
        assert result.exit_code == 2
        assert "grid.extent is required" in result.stderr
        assert "integrator.dt is required" in result.stderr

    def test_missing_file_exit_2(self, runner):
        result = runner.invoke(main, ["simulate", "/no/such/file.toml"])
        assert result.exit_code == 2

    def test_unknown_subcommand_exit_2(self, runner):
        result = runner.invoke(main, ["frobnicate"])
        assert result.exit_code == 2

    def test_runtime_failure_exit_3(self, runner, tmp_path):
        text = SCATTER.replace("tol = 5e-3", "tol = 1e-12").replace(
            "t_schedule = [6.0, 12.0, 18.0]", "t_schedule = [6.0, 12.0]"
        )
        cfg = write(tmp_path, "scat.toml", text)
        result = runner.invoke(main, ["wave-operator", cfg, "--outdir", str(tmp_path / "r")])
        assert result.exit_code == 3
        assert "exhausted" in result.stderr


class TestDiagnosticsCommands:
    CAUS = """
[grid]
dim = 1
extent = 24.0
points = 192

[potential]
kind = "power"
gamma = 0.5
mode = "exploratory"

[integrator]
dt = 0.1
t_end = 3.0
snapshot_stride = 5

[initial-data]
kind = "bump"
radius = 2.0
amplitude = 0.3

[diagnostics.causality]
enabled = true
radius = 2.0
tolerance = 1e-6

[diagnostics.decay]
enabled = true
r_list = [4.0]
cutoff = 4.0
"""

    def test_causality(self, runner, tmp_path):
        cfg = write(tmp_path, "c.toml", self.CAUS)
        out = tmp_path / "run"
        result = runner.invoke(main, ["causality-test", cfg, "--outdir", str(out)])
        assert result.exit_code == 0, result.output
        lines = (out / "cone.csv").read_text().splitlines()
        assert lines[0] == "time,outside_l2,relative"
        summary = json.loads((out / "summary.json").read_text())
        assert summary["verdicts"] == {"causality": True}
        assert summary["max_relative"] <= 1e-6

    def test_morawetz(self, runner, tmp_path):
        cfg = write(tmp_path, "c.toml", self.CAUS)
        out = tmp_path / "run"
        result = runner.invoke(main, ["morawetz", cfg, "--outdir", str(out)])
        assert result.exit_code == 0, result.output
        summary = json.loads((out / "summary.json").read_text())
        assert summary["verdicts"] == {"morawetz": True}
        assert summary["lhs"] <= summary["rhs"]
        assert (out / "morawetz.csv").exists()

    def test_decay_scan(self, runner, tmp_path):
        cfg = write(tmp_path, "c.toml", self.CAUS)
        out = tmp_path / "run"
        result = runner.invoke(main, ["decay-scan", cfg, "--outdir", str(out)])
        assert result.exit_code == 0, result.output
        header = (out / "decay_scan.csv").read_text().splitlines()[0]
        assert header == "time,r=4:full,r=4:high,r=4:low,r=4:bound"

    def test_dispersive_bench(self, runner, tmp_path):
        text = """
[grid]
dim = 1
extent = 200.0
points = 1024

[potential]
kind = "none"

[integrator]
dt = 0.1
t_end = 1.0

[initial-data]
kind = "gaussian"
width = 1.5
amplitude = 0.5

[diagnostics.dispersive]
band = "low"
cutoff = 1.0
r = "inf"
t_min = 5.0
t_max = 40.0
samples = 10
expected_slope = -0.5
slope_tol = 0.2
"""
        cfg = write(tmp_path, "d.toml", text)
        out = tmp_path / "run"
        result = runner.invoke(main, ["dispersive-bench", cfg, "--outdir", str(out)])
        assert result.exit_code == 0, result.output
        lines = (out / "dispersive.csv").read_text().splitlines()
        assert len(lines) == 11  # header + samples
        summary = json.loads((out / "summary.json").read_text())
        assert -0.7 <= summary["slope"] <= -0.3


class TestScatteringCommands:
    def test_wave_operator(self, runner, tmp_path):
        cfg = write(tmp_path, "s.toml", SCATTER)
        out = tmp_path / "run"
        result = runner.invoke(main, ["wave-operator", cfg, "--outdir", str(out)])
        assert result.exit_code == 0, result.output
        datum, role = read_snapshot(out / "wave_datum.kgh")
        assert role == 0 and datum.time == 0.0
        _, role_in = read_snapshot(out / "asymptotic_pair.kgh")
        assert role_in == ROLE_ASYMPTOTIC
        summary = json.loads((out / "summary.json").read_text())
        assert summary["verdicts"] == {"converged": True}
        assert summary["gaps"][-1] < 5e-3
        assert summary["smallness"] <= 0.1

    def test_scatter_roundtrip(self, runner, tmp_path):
        cfg = write(tmp_path, "s.toml", SCATTER)
        out = tmp_path / "run"
        result = runner.invoke(main, ["scatter-roundtrip", cfg, "--outdir", str(out)])
        assert result.exit_code == 0, result.output
        for name, want_role in (("input_pair.kgh", 1), ("datum.kgh", 0), ("output_pair.kgh", 1)):
            _, role = read_snapshot(out / name)
            assert role == want_role
        summary = json.loads((out / "summary.json").read_text())
        assert summary["verdicts"] == {"converged": True}
        assert 0 < summary["s_distance"] < 0.1
        assert summary["energy_identity_gap"] < 0.01


class TestReport:
    def test_digest(self, runner, tmp_path):
        cfg = write(tmp_path, "sim.toml", SIM)
        out = tmp_path / "run"
        runner.invoke(main, ["simulate", cfg, "--outdir", str(out)])
        result = runner.invoke(main, ["report", str(out)])
        assert result.exit_code == 0
        assert "command: simulate" in result.output
        assert "config hash:" in result.output
        assert "PASS energy_drift" in result.output

    def test_report_failing_run_exits_1(self, runner, tmp_path):
        cfg = write(tmp_path, "sim.toml", SIM.replace("max_drift = 1e-3", "max_drift = 1e-15"))
        out = tmp_path / "run"
        runner.invoke(main, ["simulate", cfg, "--outdir", str(out)])
        result = runner.invoke(main, ["report", str(out)])
        assert result.exit_code == 1
        assert "FAIL energy_drift" in result.output

    def test_report_empty_dir_exits_3(self, runner, tmp_path):
        result = runner.invoke(main, ["report", str(tmp_path)])
        assert result.exit_code == 3


def test_console_script_installed():
    proc = subprocess.run(
        [sys.executable, "-m", "kgh.cli", "--help"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    for cmd in ("simulate", "wave-operator", "scatter-roundtrip", "causality-test",
                "morawetz", "dispersive-bench", "decay-scan", "report"):
        assert cmd in proc.stdout
