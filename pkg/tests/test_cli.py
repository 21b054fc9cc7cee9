"""Console surface: every subcommand, exit codes, and file round trips."""

import csv
import datetime as dt
import subprocess
import sys

import numpy as np
import pytest

from splitcast.cli import main
from splitcast.features import MarketData
from splitcast.panel import load_panel
from splitcast.quantreg import TAU_GRID, QuantileFan
from splitcast.scores import crps_from_fan

BASE_SET = [
    "--set", "variables=DA,ID,W",
    "--set", "derived=",
    "--set", "qr_variables=",
    "--set", "mv_variables=DA,ID",
]


@pytest.fixture(scope="module")
def panel_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "panel.csv"
    assert main(["synth", "--days", "160", "--seed", "7", "--out", str(path)]) == 0
    return path


@pytest.fixture(scope="module")
def fan_dir(panel_csv, tmp_path_factory):
    out = tmp_path_factory.mktemp("fans")
    panel = load_panel(str(panel_csv))
    start = panel.dates[150].isoformat()
    end = panel.dates[151].isoformat()
    code = main(["forecast", "--method", "ms", "--mode", "corr",
                 "--input", str(panel_csv), "--start", start, "--end", end,
                 "--out", str(out), "--splits", "4", "--window", "100",
                 "--members", *BASE_SET])
    assert code == 0
    return out


def test_synth_writes_loadable_panel(panel_csv):
    panel = load_panel(str(panel_csv))
    assert panel.n_days == 160
    assert not panel.missing_cells


def test_synth_generator_overrides(tmp_path, capsys):
    out = tmp_path / "p.csv"
    assert main(["synth", "--days", "30", "--out", str(out),
                 "--set", "corr.DA.ID=0.2", "--set", "phi.L=0.5"]) == 0
    assert main(["synth", "--days", "30", "--out", str(out),
                 "--set", "corr.DA.XX=0.2"]) == 2
    assert main(["synth", "--days", "30", "--out", str(out),
                 "--set", "phi.L=1.5"]) == 2
    assert main(["synth", "--days", "30", "--out", str(out),
                 "--set", "typo"]) == 2
    assert "error:" in capsys.readouterr().err


def test_validate_clean_panel(panel_csv, capsys):
    assert main(["validate", str(panel_csv)]) == 0
    assert "ok" in capsys.readouterr().out


def test_validate_rejects_corrupt_file(panel_csv, tmp_path, capsys):
    # the loader refuses outright broken data before the problem scan runs
    lines = panel_csv.read_text().splitlines()
    cells = lines[40].split(",")
    cells[5] = "-5.0"
    lines[40] = ",".join(cells)
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines) + "\n")
    assert main(["validate", str(bad)]) == 2
    assert "error: negative values" in capsys.readouterr().err


def test_forecast_fan_file_shape(fan_dir, panel_csv):
    with open(fan_dir / "fans.csv", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    assert header[:3] == ["date", "hour", "variable"]
    assert header[3] == "p01" and header[-1] == "p99" and len(header) == 102
    assert len(rows) == 2 * 3 * 24  # days x variables x hours
    for row in rows[::17]:
        fan = np.array([float(v) for v in row[3:]])
        assert np.all(np.diff(fan) >= 0.0)


def test_forecast_members_dump(fan_dir, panel_csv):
    panel = load_panel(str(panel_csv))
    path = fan_dir / f"members_{panel.dates[150].isoformat()}.csv"
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    assert header == ["hour", "member", "DA", "ID", "W"]
    # 4 splits of a 100 day window leave 50 calibration days each
    assert len(rows) == 24 * 4 * 50
    hours = {int(r[0]) for r in rows}
    assert hours == set(range(1, 25))


def test_forecast_rejects_bad_ranges(panel_csv, tmp_path, capsys):
    panel = load_panel(str(panel_csv))
    early = panel.dates[20].isoformat()
    late = panel.dates[150].isoformat()
    args = ["forecast", "--method", "ms", "--input", str(panel_csv),
            "--out", str(tmp_path), "--splits", "4", "--window", "100", *BASE_SET]
    assert main(args + ["--start", early, "--end", early]) == 2
    assert main(args + ["--start", late, "--end", panel.dates[149].isoformat()]) == 2
    err = capsys.readouterr().err
    assert "error:" in err


def test_evaluate_scores_stored_fans(fan_dir, panel_csv, tmp_path, capsys):
    out = tmp_path / "scores"
    code = main(["evaluate", "--fans", str(fan_dir / "fans.csv"),
                 "--input", str(panel_csv), "--levels", "0.8,0.95",
                 "--out", str(out)])
    assert code == 0
    assert "note: level 0.95" in capsys.readouterr().out
    with open(out / "coverage.csv", newline="") as fh:
        cov = list(csv.DictReader(fh))
    assert {r["level"] for r in cov} == {"0.8"}
    assert len(cov) == 3 * 25
    with open(out / "crps.csv", newline="") as fh:
        cr = list(csv.DictReader(fh))
    assert len(cr) == 3 * 25

    # recompute one variable from the stored fans as an independent check
    with open(fan_dir / "fans.csv", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        fan_rows = [r for r in reader if r[2] == "DA"]
    data = MarketData.from_panel(load_panel(str(panel_csv)))
    scores = []
    for row in fan_rows:
        day_idx = data.panel.day_index(dt.date.fromisoformat(row[0]))
        y = data.panel.hourly["DA"][day_idx, int(row[1]) - 1]
        fan = QuantileFan(taus=TAU_GRID.copy(), values=np.array([float(v) for v in row[3:]]))
        scores.append(crps_from_fan(fan, y))
    overall = next(r for r in cr if r["variable"] == "DA" and r["hour"] == "all")
    assert float(overall["crps"]) == pytest.approx(np.mean(scores), rel=1e-4)


def test_backtest_cli_runs(panel_csv, tmp_path, capsys):
    out = tmp_path / "bt"
    code = main(["backtest", "--input", str(panel_csv), "--out", str(out),
                 "--window", "100", "--eval-days", "2", "--splits", "3",
                 "--no-trading", "--set", "methods=ms", "--set", "ms_modes=corr",
                 *BASE_SET])
    assert code == 0
    text = capsys.readouterr().out
    assert "2 evaluation days" in text
    for name in ("coverage.csv", "crps.csv", "reliability.csv", "run_config.cfg", "summary.txt"):
        assert (out / name).exists()
    assert not (out / "strategy.csv").exists()


def test_backtest_cli_rejects_bad_overrides(panel_csv, tmp_path, capsys):
    args = ["backtest", "--input", str(panel_csv), "--out", str(tmp_path / "x"),
            "--window", "100", "--eval-days", "1"]
    assert main(args + ["--set", "bogus=1"]) == 2
    assert main(args + ["--set", "novalue"]) == 2
    assert main(args + ["--set", "n_splits=many"]) == 2
    assert "error:" in capsys.readouterr().err


@pytest.fixture(scope="module")
def traded_backtest(panel_csv, tmp_path_factory):
    out = tmp_path_factory.mktemp("traded")
    code = main(["backtest", "--input", str(panel_csv), "--out", str(out),
                 "--window", "100", "--eval-days", "2", "--splits", "3",
                 "--set", "methods=point,ms", "--set", "ms_modes=corr",
                 "--set", "stopping_taus=0.3,1.0", *BASE_SET])
    assert code == 0
    return out


def test_report_tables(traded_backtest, tmp_path):
    out = tmp_path / "plots"
    assert main(["report", "--backtest-dir", str(traded_backtest), "--out", str(out)]) == 0
    with open(out / "profit_vs_tau.csv", newline="") as fh:
        profit = list(csv.DictReader(fh))
    assert len(profit) == 3 * 2  # strategies x taus; benchmarks carry no tau
    assert {r["strategy"] for r in profit} == {"epi", "var", "sr"}
    with open(out / "q_histogram.csv", newline="") as fh:
        hist = list(csv.DictReader(fh))
    by_strategy = {}
    for r in hist:
        by_strategy.setdefault(r["strategy"], 0)
        by_strategy[r["strategy"]] += int(r["count"])
    # one tau slice per strategy: every evaluated hour lands in one bucket
    assert set(by_strategy) == {"epi", "var", "sr", "naive", "limited"}
    assert all(total == 2 * 24 for total in by_strategy.values())


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "splitcast", "--help"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert "usage: splitcast" in out.stdout


def test_unknown_subcommand_exits_via_argparse():
    with pytest.raises(SystemExit):
        main(["mystery"])
