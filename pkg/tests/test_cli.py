"""End-to-end tests of the command-line interface and its exit codes."""

import csv
import hashlib
import time
from pathlib import Path

import numpy as np
import pytest

import rasesim as rs
from rasesim.cli import main
from rasesim.runconfig import dump_config

from conftest import make_config


def _config_file(tmp_path, **overrides) -> Path:
    run = rs.RunConfig(sequence=make_config(**overrides))
    path = tmp_path / "run.cfg"
    path.write_text(dump_config(run))
    return path


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _read_summary(path: Path) -> dict[str, float]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        return {key: float(value) for key, value in reader}


class TestSimulate:
    def test_identical_configs_give_identical_files(self, tmp_path):
        cfg = _config_file(tmp_path, n_shots=30, seed=77)
        out1, out2 = tmp_path / "a.rhet", tmp_path / "b.rhet"
        assert main(["simulate", "--config", str(cfg), "--out", str(out1)]) == 0
        assert main(["simulate", "--config", str(cfg), "--out", str(out2)]) == 0
        assert _sha(out1) == _sha(out2)

    def test_seed_override_changes_output(self, tmp_path):
        cfg = _config_file(tmp_path, n_shots=30, seed=77)
        out1, out2 = tmp_path / "a.rhet", tmp_path / "b.rhet"
        main(["simulate", "--config", str(cfg), "--out", str(out1)])
        main(["simulate", "--config", str(cfg), "--out", str(out2), "--seed", "78"])
        assert _sha(out1) != _sha(out2)

    def test_zero_shots_is_a_config_error(self, tmp_path):
        cfg = _config_file(tmp_path, n_shots=10, seed=1)
        text = cfg.read_text().replace("n_shots = 10", "n_shots = 0")
        cfg.write_text(text)
        code = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x")])
        assert code == 1

    def test_csv_export_small_runs(self, tmp_path):
        cfg = _config_file(tmp_path, n_shots=2, seed=5)
        out = tmp_path / "a.rhet"
        dump = tmp_path / "a.csv"
        code = main(
            ["simulate", "--config", str(cfg), "--out", str(out), "--csv", str(dump)]
        )
        assert code == 0
        with open(dump, newline="") as fh:
            rows = list(csv.reader(fh))
        run = rs.RunConfig(sequence=make_config(n_shots=2, seed=5))
        assert len(rows) == 1 + 2 * run.sequence.n_samples
        # spot-check a value against the deterministic synthesis
        rec = rs.synthesize_shot(run.sequence, 0)
        assert float(rows[1][2]) == rec.samples[0].real

    def test_csv_export_refuses_large_runs(self, tmp_path):
        cfg = _config_file(tmp_path, n_shots=1000, seed=5)
        code = main(
            [
                "simulate",
                "--config",
                str(cfg),
                "--out",
                str(tmp_path / "a.rhet"),
                "--csv",
                str(tmp_path / "a.csv"),
            ]
        )
        assert code == 1


@pytest.fixture(scope="module")
def analyzed(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("analyze")
    cfg = _config_file(tmp, n_shots=400, seed=9)
    shots = tmp / "run.rhet"
    out = tmp / "out"
    assert main(["simulate", "--config", str(cfg), "--out", str(shots)]) == 0
    assert (
        main(
            [
                "analyze",
                "--shots",
                str(shots),
                "--config",
                str(cfg),
                "--out-dir",
                str(out),
            ]
        )
        == 0
    )
    return tmp, cfg, shots, out


class TestAnalyze:
    def test_artifact_set_complete(self, analyzed):
        _, _, _, out = analyzed
        names = {p.name for p in out.glob("*.csv")}
        assert names == {
            "variance_trace.csv",
            "spectrum_vacuum.csv",
            "spectrum_ase.csv",
            "spectrum_rase.csv",
            "crosscorr.csv",
            "inseparability.csv",
            "summary.csv",
        }

    def test_summary_contents(self, analyzed):
        _, _, _, out = analyzed
        summary = _read_summary(out / "summary.csv")
        assert summary["vacuum_variance_sum"] == pytest.approx(2.0, abs=1e-3)
        assert 0.0 <= summary["b_star"] <= 1.0
        assert summary["n_shots"] == 400

    def test_csvs_have_units_in_headers(self, analyzed):
        _, _, _, out = analyzed
        header = (out / "variance_trace.csv").read_text().splitlines()[0]
        assert "time_us" in header
        header = [
            line
            for line in (out / "crosscorr.csv").read_text().splitlines()
            if not line.startswith("#")
        ][0]
        assert "tau_us" in header

    def test_truncated_file_is_data_error(self, analyzed, capsys):
        tmp, cfg, shots, _ = analyzed
        broken = tmp / "broken.rhet"
        raw = shots.read_bytes()
        broken.write_bytes(raw[:-64])
        code = main(
            [
                "analyze",
                "--shots",
                str(broken),
                "--config",
                str(cfg),
                "--out-dir",
                str(tmp / "out2"),
            ]
        )
        assert code == 2
        err = capsys.readouterr().err
        assert "bytes" in err

    def test_mismatched_config_is_data_error(self, analyzed, tmp_path):
        _, _, shots, _ = analyzed
        other = _config_file(
            tmp_path, n_modes=1, tile_duration=5.9e-6, signal_bandwidth=150.2e3
        )
        code = main(
            [
                "analyze",
                "--shots",
                str(shots),
                "--config",
                str(other),
                "--out-dir",
                str(tmp_path / "out"),
            ]
        )
        assert code == 2


class TestTheory:
    def test_calibrated_thin_curve(self, tmp_path, capsys):
        out = tmp_path / "theory.csv"
        start = time.perf_counter()
        code = main(
            [
                "theory",
                "--alpha-l",
                "0.046",
                "--target-dip",
                "1.94",
                "--out",
                str(out),
            ]
        )
        elapsed = time.perf_counter() - start
        assert code == 0
        assert elapsed < 1.0
        rows = [
            line
            for line in out.read_text().splitlines()
            if line and not line.startswith("#")
        ]
        assert rows[0] == "b,s"
        values = np.array([[float(x) for x in line.split(",")] for line in rows[1:]])
        meta = dict(
            line[2:].split(" = ")
            for line in out.read_text().splitlines()
            if line.startswith("#")
        )
        assert float(meta["s_star"]) == pytest.approx(1.94, abs=1e-4)
        assert float(meta["b_star"]) < 0.5
        assert values[:, 1].min() == pytest.approx(1.94, abs=1e-3)

    def test_no_recall_is_flat_or_rising(self, capsys):
        code = main(["theory", "--alpha-l", "0.78", "--eta", "0"])
        assert code == 0
        rows = [
            line
            for line in capsys.readouterr().out.splitlines()
            if line and not line.startswith("#") and line != "b,s"
        ]
        s = np.array([float(line.split(",")[1]) for line in rows])
        assert np.all(s >= 2 - 1e-12)
        assert np.all(np.diff(s) >= -1e-12)

    def test_zero_depth_is_constant_two(self, capsys):
        code = main(["theory", "--alpha-l", "0", "--eta", "0.5"])
        # alpha_l = 0 is outside calibrate's domain but fine for a curve
        assert code == 0
        rows = [
            line
            for line in capsys.readouterr().out.splitlines()
            if line and not line.startswith("#") and line != "b,s"
        ]
        s = np.array([float(line.split(",")[1]) for line in rows])
        assert np.allclose(s, 2.0, atol=1e-12)

    def test_unreachable_dip_is_numeric_error(self, capsys):
        code = main(["theory", "--alpha-l", "0.046", "--target-dip", "1.5"])
        assert code == 3
        assert "attainable" in capsys.readouterr().err

    def test_requires_eta_or_target(self):
        assert main(["theory", "--alpha-l", "0.5"]) == 1


class TestReport:
    def test_renders_four_deterministic_svgs(self, tmp_path):
        cfg = _config_file(tmp_path, n_shots=120, seed=30)
        shots = tmp_path / "run.rhet"
        out = tmp_path / "out"
        main(["simulate", "--config", str(cfg), "--out", str(shots)])
        main(
            ["analyze", "--shots", str(shots), "--config", str(cfg), "--out-dir", str(out)]
        )
        assert main(["report", "--dir", str(out)]) == 0
        svgs = sorted(p.name for p in out.glob("*.svg"))
        assert svgs == [
            "crosscorr.svg",
            "inseparability.svg",
            "spectra.svg",
            "variance_trace.svg",
        ]
        hashes = {p.name: _sha(p) for p in out.glob("*.svg")}
        assert main(["report", "--dir", str(out)]) == 0
        assert {p.name: _sha(p) for p in out.glob("*.svg")} == hashes

    def test_missing_artifact_listed(self, tmp_path, capsys):
        cfg = _config_file(tmp_path, n_shots=120, seed=31)
        shots = tmp_path / "run.rhet"
        out = tmp_path / "out"
        main(["simulate", "--config", str(cfg), "--out", str(shots)])
        main(
            ["analyze", "--shots", str(shots), "--config", str(cfg), "--out-dir", str(out)]
        )
        (out / "crosscorr.csv").unlink()
        code = main(["report", "--dir", str(out)])
        assert code == 2
        assert "crosscorr.csv" in capsys.readouterr().err


class TestPresetsCommand:
    def test_list_names(self, capsys):
        assert main(["presets", "list"]) == 0
        listed = capsys.readouterr().out.split()
        assert "thin" in listed and "thick" in listed

    def test_export_round_trips(self, tmp_path):
        dest = tmp_path / "thin.cfg"
        assert main(["presets", "export", "thin", str(dest)]) == 0
        from rasesim.presets import preset_text

        assert dest.read_text() == preset_text("thin")


class TestUsageErrors:
    def test_no_arguments(self):
        assert main([]) == 1

    def test_unknown_command(self):
        assert main(["frobnicate"]) == 1

    def test_missing_required_flag(self):
        assert main(["simulate", "--out", "x"]) == 1
