"""Command-line surface: exit codes, JSON payloads, file outputs."""

import json

import numpy as np
import pytest

from msdport.cli import main

from conftest import month_range, synthetic_market, write_ff49_file, write_series_file


def write_returns(path, values):
    path.write_text("\n".join(str(v) for v in values) + "\n")
    return path


@pytest.fixture
def check_files(tmp_path):
    x = write_returns(tmp_path / "x.txt", [0, 1, 3])
    y = write_returns(tmp_path / "y.txt", [-1, 0, 2])
    x_bad = write_returns(tmp_path / "x_bad.txt", [-1, 1, 1])
    return x, y, x_bad


class TestCheck:
    def test_dominance_holds_exit_zero(self, check_files, capsys):
        x, y, _ = check_files
        code = main(["check", str(x), str(y), "--criterion", "msd", "--reference", "0"])
        assert code == 0
        assert "holds     : True" in capsys.readouterr().out

    def test_violation_exit_one(self, check_files, capsys):
        x, y, x_bad = check_files
        code = main(["check", str(x_bad), str(y), "--criterion", "msd", "--reference", "0"])
        assert code == 1
        assert "msd-gain" in capsys.readouterr().out

    def test_missing_file_exit_two(self, check_files, capsys):
        _, y, _ = check_files
        assert main(["check", "nope.txt", str(y), "--criterion", "msd",
                     "--reference", "0"]) == 2

    def test_json_payload(self, check_files, capsys):
        x, y, _ = check_files
        code = main(["check", str(x), str(y), "--criterion", "mwsd", "--reference", "0",
                     "--d-minus", "0.18", "--d-plus", "0.18", "--json"])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["schema"] == "msdport.check/1"
        assert payload["holds"] is True
        assert payload["criterion"] == "mwsd"
        assert payload["t_d_minus"] <= 0 <= payload["t_d_plus"]

    def test_d_flags_rejected_for_msd(self, check_files):
        x, y, _ = check_files
        assert main(["check", str(x), str(y), "--criterion", "msd", "--reference", "0",
                     "--d-minus", "0.18"]) == 2

    def test_off_grid_reference_is_augmented(self, check_files):
        x, y, _ = check_files
        assert main(["check", str(x), str(y), "--criterion", "msd",
                     "--reference", "0.25"]) == 0

    def test_fsd_criterion(self, check_files):
        x, y, _ = check_files
        assert main(["check", str(x), str(y), "--criterion", "fsd"]) == 0

    def test_grid_mismatch(self, tmp_path, check_files):
        _, y, _ = check_files
        short = write_returns(tmp_path / "short.txt", [1, 2])
        assert main(["check", str(short), str(y), "--criterion", "fsd"]) == 2


@pytest.fixture
def optimize_files(tmp_path):
    panel = tmp_path / "panel.csv"
    panel.write_text(
        "up,down\n"
        "0.0,-2.0\n"
        "1.0,-1.0\n"
        "3.0,1.0\n"
    )
    bench = write_returns(tmp_path / "bench.txt", [-1.0, 0.0, 2.0])
    return panel, bench


class TestOptimize:
    def test_solve_writes_solution(self, optimize_files, tmp_path, capsys):
        panel, bench = optimize_files
        out = tmp_path / "sol.json"
        code = main(["optimize", "--panel", str(panel), "--benchmark", str(bench),
                     "--criterion", "msd", "--reference", "0", "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["status"] == "optimal"
        assert payload["certified"] is True
        assert payload["weights"]["up"] == pytest.approx(1.0, abs=1e-6)
        assert payload["objective"] == pytest.approx(4.0 / 3.0, abs=1e-6)
        assert payload["excess"] == pytest.approx(1.0, abs=1e-6)

    def test_mwsd_path(self, optimize_files, tmp_path):
        panel, bench = optimize_files
        out = tmp_path / "sol.json"
        code = main(["optimize", "--panel", str(panel), "--benchmark", str(bench),
                     "--criterion", "mwsd", "--reference", "0",
                     "--d-minus", "0.18", "--d-plus", "0.18", "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["d_minus"] == 0.18 and payload["criterion"] == "mwsd"

    def test_export_only(self, optimize_files, tmp_path, capsys):
        panel, bench = optimize_files
        lp = tmp_path / "m.lp"
        mps = tmp_path / "m.mps"
        code = main(["optimize", "--panel", str(panel), "--benchmark", str(bench),
                     "--criterion", "msd", "--reference", "0", "--export-only",
                     "--export-lp", str(lp), "--export-mps", str(mps)])
        assert code == 0
        assert lp.exists() and mps.exists()
        from msdport.milp.io import parse_mps

        model = parse_mps(mps)
        assert any(name.startswith("lam_") for name in model.variable_names())

    def test_export_only_needs_target(self, optimize_files):
        panel, bench = optimize_files
        assert main(["optimize", "--panel", str(panel), "--benchmark", str(bench),
                     "--criterion", "msd", "--reference", "0", "--export-only"]) == 2

    def test_infeasible_exit_one(self, optimize_files, tmp_path):
        panel, _ = optimize_files
        high = write_returns(tmp_path / "high.txt", [9.0, 10.0, 12.0])
        code = main(["optimize", "--panel", str(panel), "--benchmark", str(high),
                     "--criterion", "msd", "--reference", "9"])
        assert code == 1

    def test_median_reference_mode(self, optimize_files, tmp_path):
        panel, bench = optimize_files
        out = tmp_path / "sol.json"
        code = main(["optimize", "--panel", str(panel), "--benchmark", str(bench),
                     "--criterion", "msd", "--reference-mode", "median",
                     "--out", str(out)])
        assert code == 0
        assert json.loads(out.read_text())["reference"] == 0.0

    def test_d_flags_rejected_for_msd(self, optimize_files):
        panel, bench = optimize_files
        assert main(["optimize", "--panel", str(panel), "--benchmark", str(bench),
                     "--criterion", "msd", "--reference", "0",
                     "--d-minus", "0.5"]) == 2

    def test_benchmark_only_panel_recovers_unit_weight(self, tmp_path):
        panel = tmp_path / "self.csv"
        panel.write_text("self\n-1.0\n0.0\n2.0\n")
        bench = write_returns(tmp_path / "b.txt", [-1.0, 0.0, 2.0])
        out = tmp_path / "sol.json"
        code = main(["optimize", "--panel", str(panel), "--benchmark", str(bench),
                     "--criterion", "msd", "--reference", "0", "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["weights"]["self"] == pytest.approx(1.0, abs=1e-7)
        assert payload["excess"] == pytest.approx(0.0, abs=1e-7)


@pytest.fixture(scope="module")
def backtest_files(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("backtest")
    rng = np.random.default_rng(6)
    months = 16
    dates = month_range(196401, months)
    inds, bench, tbill = synthetic_market(rng, 49, months, easy=True)
    ff49 = tmp / "ff49.csv"
    write_ff49_file(ff49, dates, inds)
    bench_path = tmp / "bench.csv"
    write_series_file(bench_path, dates, bench)
    tbill_path = tmp / "tbill.csv"
    write_series_file(tbill_path, dates, tbill)
    return ff49, bench_path, tbill_path


class TestBacktest:
    def test_single_cell_run(self, backtest_files, tmp_path, capsys):
        ff49, bench, tbill = backtest_files
        out_dir = tmp_path / "study"
        code = main(["backtest", "--industries", str(ff49), "--benchmark", str(bench),
                     "--riskfree", str(tbill), "--window", "8", "--step", "8",
                     "--criteria", "msd", "--references", "median",
                     "--max-windows", "1", "--out", str(out_dir),
                     "--time-limit", "120", "--no-figures"])
        assert code == 0
        assert (out_dir / "excess_by_window.csv").exists()
        assert (out_dir / "study_manifest.json").exists()
        captured = capsys.readouterr().out
        assert "cells optimal" in captured

    def test_figures_rendered(self, backtest_files, tmp_path):
        ff49, bench, tbill = backtest_files
        out_dir = tmp_path / "study_fig"
        code = main(["backtest", "--industries", str(ff49), "--benchmark", str(bench),
                     "--riskfree", str(tbill), "--window", "8", "--step", "8",
                     "--criteria", "msd", "--references", "median",
                     "--max-windows", "1", "--out", str(out_dir),
                     "--time-limit", "120", "--figures"])
        assert code == 0
        assert (out_dir / "fig_excess_by_window.png").exists()

    def test_rf_reference_needs_riskfree(self, backtest_files):
        ff49, bench, _ = backtest_files
        assert main(["backtest", "--industries", str(ff49), "--benchmark", str(bench),
                     "--references", "rf", "--window", "8", "--step", "8"]) == 2

    def test_insufficient_data_exit_two(self, backtest_files):
        ff49, bench, tbill = backtest_files
        assert main(["backtest", "--industries", str(ff49), "--benchmark", str(bench),
                     "--riskfree", str(tbill), "--window", "120"]) == 2


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
