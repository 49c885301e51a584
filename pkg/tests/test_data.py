"""Ingestion, window building, reference points, and augmentation."""

import numpy as np
import pytest

from msdport.core import DiscreteReturnDistribution, cdf, expected_return, integrated_cdf
from msdport.data import (
    DataError,
    EstimationWindow,
    ReturnSeries,
    add_months,
    align,
    augment_reference_state,
    load_panel_csv,
    market_from_factors,
    parse_ff49,
    parse_ff_factors,
    parse_series,
    reference_point,
    rolling_windows,
    window_count,
)
from msdport.milp.model import AssetPanel

from conftest import month_range, synthetic_market, write_ff49_file, write_series_file


class TestReturnSeries:
    def test_contiguity_enforced(self):
        with pytest.raises(DataError):
            ReturnSeries(np.array([196401, 196403]), np.array([1.0, 2.0]), "x")

    def test_year_wrap(self):
        s = ReturnSeries(np.array([196312, 196401]), np.array([1.0, 2.0]), "x")
        assert len(s) == 2

    def test_add_months(self):
        assert add_months(196412, 1) == 196501
        assert add_months(196401, 35) == 196612


class TestParseFf49:
    def test_standard_layout(self, tmp_path, rng):
        dates = month_range(196401, 24)
        matrix = rng.normal(0.5, 3.0, size=(49, 24))
        path = tmp_path / "ff49.csv"
        write_ff49_file(path, dates, matrix)
        series = parse_ff49(path)
        assert len(series) == 49
        assert series[0].label == "Ind00"
        np.testing.assert_allclose(series[3].values, np.round(matrix[3], 4))
        assert list(series[0].dates[:2]) == [196401, 196402]

    def test_missing_sentinels_become_gaps(self, tmp_path, rng):
        dates = month_range(196401, 6)
        matrix = rng.normal(0.5, 3.0, size=(49, 6))
        matrix[7, 2] = -99.99
        matrix[11, 4] = -999.0
        path = tmp_path / "ff49.csv"
        write_ff49_file(path, dates, matrix)
        series = parse_ff49(path)
        assert np.isnan(series[7].values[2])
        assert np.isnan(series[11].values[4])
        assert series[7].has_gaps

    def test_headerless_fallback(self, tmp_path, rng):
        dates = month_range(196401, 6)
        matrix = rng.normal(0.5, 3.0, size=(49, 6))
        path = tmp_path / "bare.csv"
        write_ff49_file(path, dates, matrix, banner=False)
        assert len(parse_ff49(path)) == 49

    def test_truncated_row_reports_line(self, tmp_path, rng):
        dates = month_range(196401, 3)
        matrix = rng.normal(0.5, 3.0, size=(49, 3))
        path = tmp_path / "bad.csv"
        write_ff49_file(path, dates, matrix)
        lines = path.read_text().splitlines()
        lines[6] = ",".join(lines[6].split(",")[:20])  # drop fields from a data row
        path.write_text("\n".join(lines))
        with pytest.raises(DataError, match="line 7"):
            parse_ff49(path)

    def test_wrong_column_count_rejected(self, tmp_path, rng):
        dates = month_range(196401, 3)
        matrix = rng.normal(0.5, 3.0, size=(12, 3))
        path = tmp_path / "short.csv"
        write_ff49_file(path, dates, matrix)
        with pytest.raises(DataError, match="49"):
            parse_ff49(path)


class TestParseSeries:
    def test_full_sample_length(self, tmp_path, rng):
        dates = month_range(196401, 732)
        write_series_file(tmp_path / "b.csv", dates, rng.normal(0.8, 4, 732))
        series = parse_series(tmp_path / "b.csv")
        assert len(series) == 732
        assert series.dates[0] == 196401 and series.dates[-1] == 202412

    def test_duplicate_month_rejected(self, tmp_path):
        (tmp_path / "dup.csv").write_text("196401,1.0\n196401,2.0\n")
        with pytest.raises(DataError, match="duplicate"):
            parse_series(tmp_path / "dup.csv")

    def test_missing_month_rejected(self, tmp_path):
        (tmp_path / "holey.csv").write_text("196401,1.0\n196403,2.0\n")
        with pytest.raises(DataError, match="contiguous"):
            parse_series(tmp_path / "holey.csv")

    def test_empty_file_rejected(self, tmp_path):
        (tmp_path / "empty.csv").write_text("")
        with pytest.raises(DataError):
            parse_series(tmp_path / "empty.csv")

    def test_column_selection(self, tmp_path):
        (tmp_path / "multi.csv").write_text("196401,1.0,9.0\n196402,2.0,8.0\n")
        series = parse_series(tmp_path / "multi.csv", column=2)
        np.testing.assert_allclose(series.values, [9.0, 8.0])


class TestFactors:
    def test_market_reconstruction(self, tmp_path):
        path = tmp_path / "factors.csv"
        path.write_text(
            ",Mkt-RF,SMB,HML,RF\n"
            "196401,1.10,0.2,0.1,0.30\n"
            "196402,-0.50,0.1,0.0,0.31\n"
        )
        factors = parse_ff_factors(path)
        assert set(factors) == {"Mkt-RF", "SMB", "HML", "RF"}
        market = market_from_factors(factors)
        np.testing.assert_allclose(market.values, [1.40, -0.19])

    def test_missing_rf_rejected(self, tmp_path):
        path = tmp_path / "factors.csv"
        path.write_text(",Mkt-RF,SMB\n196401,1.0,0.2\n")
        with pytest.raises(DataError):
            market_from_factors(parse_ff_factors(path))


class TestWindows:
    def test_paper_protocol_arithmetic(self):
        assert window_count(732, 36, 12) == 59

    def test_single_window(self):
        assert window_count(36, 36, 12) == 1

    def test_insufficient_data(self):
        with pytest.raises(DataError):
            window_count(35, 36, 12)

    def build(self, rng, months=72, easy=True, m=6):
        dates = month_range(196401, months)
        inds, bench, tbill = synthetic_market(rng, m, months, easy=easy)
        industries = [ReturnSeries(dates, inds[j], f"I{j}") for j in range(m)]
        return (industries,
                ReturnSeries(dates, bench, "mkt"),
                ReturnSeries(dates, tbill, "rf"))

    def test_window_shapes_and_order(self, rng):
        industries, bench, tbill = self.build(rng)
        windows, rejected = rolling_windows(industries, bench, tbill, 36, 12)
        assert len(windows) == 4 and not rejected
        w = windows[1]
        assert (w.start, w.end) == (196501, 196712)
        assert np.all(np.diff(w.benchmark.returns) >= 0)
        np.testing.assert_allclose(w.panel.probs, 1.0 / 36)
        assert w.panel.n_assets == 6 and w.panel.n_states == 36

    def test_gap_rejection_report(self, rng):
        industries, bench, tbill = self.build(rng)
        values = industries[2].values.copy()
        values[40] = np.nan  # month index 40 overlaps the windows at 12, 24, 36
        industries[2] = ReturnSeries(industries[2].dates, values, industries[2].label)
        windows, rejected = rolling_windows(industries, bench, tbill, 36, 12)
        assert len(windows) + len(rejected) == 4
        assert {r["start"] for r in rejected} == {196501, 196601, 196701}
        assert all(r["gaps"] == ["I2"] for r in rejected)

    def test_alignment_required(self, rng):
        industries, bench, tbill = self.build(rng)
        off = ReturnSeries(month_range(196402, 71), bench.values[1:], "mkt")
        with pytest.raises(DataError, match="align"):
            rolling_windows(industries, off, tbill, 36, 12)

    def test_align_slices_to_intersection(self, rng):
        industries, bench, tbill = self.build(rng)
        longer = ReturnSeries(month_range(196301, 84), np.zeros(84), "long")
        sliced = align([industries[0], longer])
        assert sliced[0].dates[0] == sliced[1].dates[0] == 196401
        assert sliced[0].dates[-1] == sliced[1].dates[-1] == 196912


class TestReferencePoint:
    def window_with(self, benchmark_returns, riskfree):
        n = len(benchmark_returns)
        probs = np.full(n, 1.0 / n)
        y = np.sort(np.asarray(benchmark_returns, dtype=float))
        panel = AssetPanel(np.tile(y, (2, 1)), ("a", "b"), probs)
        return EstimationWindow(0, 0, panel, DiscreteReturnDistribution(y, probs),
                                np.asarray(riskfree, dtype=float))

    def test_constant_riskfree(self):
        w = self.window_with([1.0, 2.0, 3.0], [0.4, 0.4, 0.4])
        assert reference_point(w, "rf") == pytest.approx(0.4, abs=1e-12)

    def test_geometric_mean_compounds(self):
        w = self.window_with([1.0, 2.0], [1.0, 2.0])
        expected = 100 * ((1.01 * 1.02) ** 0.5 - 1)
        assert reference_point(w, "rf") == pytest.approx(expected, abs=1e-12)

    def test_median_odd(self):
        w = self.window_with([-1.0, 0.0, 2.0], [0.0] * 3)
        assert reference_point(w, "median") == 0.0

    def test_median_even_lower_middle(self):
        w = self.window_with([-1.0, 0.0, 1.0, 2.0], [0.0] * 4)
        assert reference_point(w, "median") == 0.0

    def test_median_always_on_grid(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 40))
            y = rng.normal(0, 3, size=n)
            w = self.window_with(y, np.zeros(n))
            r = reference_point(w, "median")
            assert np.min(np.abs(w.benchmark.returns - r)) == 0.0

    def test_unknown_mode(self):
        w = self.window_with([1.0], [0.0])
        with pytest.raises(ValueError):
            reference_point(w, "mean")


class TestAugmentation:
    def base_window(self, rng, n=12, m=3):
        y = np.sort(rng.normal(0.5, 3.0, size=n))
        probs = np.full(n, 1.0 / n)
        x = rng.normal(0.5, 3.0, size=(m, n))
        return EstimationWindow(
            0, 0,
            AssetPanel(x, tuple(f"a{j}" for j in range(m)), probs),
            DiscreteReturnDistribution(y, probs),
            np.abs(rng.normal(0.3, 0.1, size=n)),
        )

    def test_on_grid_reference_unchanged(self, rng):
        w = self.base_window(rng)
        r = float(w.benchmark.returns[4])
        out = augment_reference_state(w, r)
        assert out is w and not out.augmented

    def test_off_grid_adds_zero_probability_state(self, rng):
        w = self.base_window(rng)
        r = reference_point(w, "rf")
        out = augment_reference_state(w, r)
        assert out.augmented
        assert out.benchmark.n_states == 13
        assert out.panel.n_states == 13
        assert out.benchmark.probs.sum() == pytest.approx(1.0, abs=1e-15)
        pos = int(np.argmin(np.abs(out.benchmark.returns - r)))
        assert out.benchmark.probs[pos] == 0.0
        np.testing.assert_allclose(out.panel.returns[:, pos], r)
        assert np.all(np.diff(out.benchmark.returns) >= 0)

    def test_functionals_unchanged(self, rng):
        w = self.base_window(rng)
        r = reference_point(w, "rf")
        out = augment_reference_state(w, r)
        assert expected_return(out.benchmark) == pytest.approx(
            expected_return(w.benchmark), abs=1e-12)
        lam = rng.dirichlet(np.ones(w.panel.n_assets))
        before = DiscreteReturnDistribution(w.panel.portfolio_returns(lam), w.panel.probs)
        after = DiscreteReturnDistribution(out.panel.portfolio_returns(lam), out.panel.probs)
        for t in np.linspace(-8, 8, 33):
            assert cdf(after, float(t)) == pytest.approx(cdf(before, float(t)), abs=1e-12)
            assert integrated_cdf(after, float(t)) == pytest.approx(
                integrated_cdf(before, float(t)), abs=1e-12)

    def test_portfolio_return_at_reference_state(self, rng):
        w = self.base_window(rng)
        r = reference_point(w, "rf")
        out = augment_reference_state(w, r)
        pos = int(np.argmin(np.abs(out.benchmark.returns - r)))
        for _ in range(5):
            lam = rng.dirichlet(np.ones(out.panel.n_assets))
            assert out.panel.portfolio_returns(lam)[pos] == pytest.approx(r, abs=1e-12)


class TestPanelCsv:
    def test_with_date_column(self, tmp_path):
        (tmp_path / "p.csv").write_text(
            "date,A,B\n196401,1.0,2.0\n196402,3.0,4.0\n"
        )
        labels, matrix = load_panel_csv(tmp_path / "p.csv")
        assert labels == ("A", "B")
        np.testing.assert_allclose(matrix, [[1.0, 3.0], [2.0, 4.0]])

    def test_without_date_column(self, tmp_path):
        (tmp_path / "p.csv").write_text("A,B\n1.0,2.0\n3.0,4.0\n")
        labels, matrix = load_panel_csv(tmp_path / "p.csv")
        assert labels == ("A", "B")
        np.testing.assert_allclose(matrix, [[1.0, 3.0], [2.0, 4.0]])

    def test_ragged_row_rejected(self, tmp_path):
        (tmp_path / "p.csv").write_text("A,B\n1.0\n")
        with pytest.raises(DataError, match="line 2"):
            load_panel_csv(tmp_path / "p.csv")
