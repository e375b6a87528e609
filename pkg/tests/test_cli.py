"""
Tests for the command-line interface.
"""
import sys
from pathlib import Path

import pandas as pd
import pytest
from typer.testing import CliRunner

# Add src directory to Python path
src_dir = Path(__file__).parent.parent / "src"
sys.path.insert(0, str(src_dir))

from core.moment_cache import get_moment_cache
from main import app

runner = CliRunner()

SCENARIO_DIR = Path(__file__).parent.parent / "data" / "scenarios"

TINY = """name = tiny
D = 2
M = 5
omega_bar = 0.25, 0.75
bandwidth_bar = 1/8, 1/8
"""


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.scn"
    path.write_text(TINY)
    return path


@pytest.fixture
def isolated_cache(tmp_path, monkeypatch):
    cache = get_moment_cache()
    monkeypatch.setattr(cache, "cache_dir", tmp_path / "cache")
    cache.clear()
    yield cache
    cache.clear()


def test_check_reports_sizes():
    result = runner.invoke(app, ["check", str(SCENARIO_DIR / "narrow2.scn"), "--threads", "8"])
    assert result.exit_code == 0, result.output
    assert "2016" in result.output
    assert "635376" in result.output


def test_check_finds_bundled_scenarios_by_name():
    result = runner.invoke(app, ["check", "broadnarrow.scn"])
    assert result.exit_code == 0, result.output
    assert "2016" in result.output


def test_check_rejects_oversampling(tmp_path):
    path = tmp_path / "fast.scn"
    path.write_text(TINY + "sampler_ratio = 2\n")
    result = runner.invoke(app, ["check", str(path)])
    assert result.exit_code == 2
    assert "sampler_ratio" in result.output


def test_check_names_missing_field(tmp_path):
    path = tmp_path / "broken.scn"
    path.write_text("D = 2\nM = 8\nomega_bar = 0.25, 0.75\n")
    result = runner.invoke(app, ["check", str(path)])
    assert result.exit_code == 2
    assert "bandwidth_bar" in result.output


def test_check_missing_file():
    result = runner.invoke(app, ["check", "does-not-exist.scn"])
    assert result.exit_code == 2
    assert "not found" in result.output


def test_loss_command_writes_csv(tiny, tmp_path, isolated_cache):
    out = tmp_path / "loss.csv"
    result = runner.invoke(app, [
        "--quiet", "loss", "--scenario", str(tiny), "--theta1-db", "-6", "--sweep", "0:5:2.5",
        "--threads", "1", "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["theta2_db", "chi_1_db", "chi_2_db"]
    assert frame["theta2_db"].tolist() == [0.0, 2.5, 5.0]
    assert (frame[["chi_1_db", "chi_2_db"]] <= 1e-9).all().all()


def test_uncertainty_command_without_trials(tiny, tmp_path, isolated_cache):
    out = tmp_path / "unc.csv"
    result = runner.invoke(app, [
        "uncertainty", "--scenario", str(tiny), "--theta1-db", "-3", "--sweep", "0:0",
        "--n", "1000", "--k", "0", "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["theta2_db", "sigma_ideal_1", "sigma_ideal_2", "sigma_quant_1", "sigma_quant_2"]
    assert "Wrote 1 row(s)" in result.output


def test_bad_sweep_exits_with_validation_code(tiny, tmp_path):
    result = runner.invoke(app, [
        "loss", "--scenario", str(tiny), "--theta1-db", "0", "--sweep", "5:0:1",
        "--out", str(tmp_path / "x.csv"),
    ])
    assert result.exit_code == 2


def test_modes_and_settings():
    result = runner.invoke(app, ["modes"])
    assert result.exit_code == 0
    for name in ("loss", "crb", "mc-quant", "mc-ideal"):
        assert name in result.output

    result = runner.invoke(app, ["show-settings"])
    assert result.exit_code == 0
    assert "default_floor_db" in result.output


def test_moment_table_round_trip(tiny, tmp_path, isolated_cache):
    target = tmp_path / "table.npz"
    result = runner.invoke(app, ["moment-table", "dump", "--scenario", str(tiny),
                                 "--theta-db", "-6,3", "--out", str(target)])
    assert result.exit_code == 0, result.output
    assert target.exists()

    result = runner.invoke(app, ["moment-table", "info", str(target)])
    assert result.exit_code == 0
    assert "Entries" in result.output

    result = runner.invoke(app, ["moment-table", "load", str(target)])
    assert result.exit_code == 0
    assert isolated_cache.stats()["entries"] >= 1

    result = runner.invoke(app, ["moment-table", "info"])
    assert result.exit_code == 0
    assert "No tables" in result.output


def test_moment_table_dump_checks_levels(tiny, tmp_path):
    result = runner.invoke(app, ["moment-table", "dump", "--scenario", str(tiny), "--theta-db", "-6"])
    assert result.exit_code == 2


def test_core_package_exposes_cache_module():
    import core
    import core.moment_cache

    assert core.moment_cache is sys.modules["core.moment_cache"]
    assert core.get_moment_cache() is get_moment_cache()


def test_loss_rejects_uncertainty_modes(tiny, tmp_path):
    result = runner.invoke(app, [
        "loss", "--scenario", str(tiny), "--theta1-db", "0", "--sweep", "0:0",
        "--mode", "crb", "--out", str(tmp_path / "x.csv"),
    ])
    assert result.exit_code == 2
    assert not (tmp_path / "x.csv").exists()


def test_uncertainty_always_writes_predicted_columns(tiny, tmp_path, isolated_cache):
    out = tmp_path / "unc.csv"
    result = runner.invoke(app, [
        "uncertainty", "--scenario", str(tiny), "--theta1-db", "-3", "--sweep", "0:0",
        "--n", "1000", "--k", "0", "--mode", "mc-quant", "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["theta2_db", "sigma_ideal_1", "sigma_ideal_2", "sigma_quant_1", "sigma_quant_2"]


def test_moment_table_clear(tiny, isolated_cache):
    result = runner.invoke(app, ["moment-table", "dump", "--scenario", str(tiny), "--theta-db", "-6,3"])
    assert result.exit_code == 0, result.output
    assert len(isolated_cache.list_files()) == 1

    result = runner.invoke(app, ["moment-table", "clear"])
    assert result.exit_code == 0
    assert "Removed 1" in result.output
    assert isolated_cache.list_files() == []
    assert isolated_cache.stats()["entries"] == 0
