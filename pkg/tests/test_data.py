import numpy as np
import pytest

from esgan.data import (
    FactorSpec,
    ReturnKind,
    ReturnMatrix,
    TimeSeriesSet,
    compute_rolling_returns,
    denormalize,
    fill_gaps,
    load_time_series,
    normalize,
    Scaling,
)
from esgan.errors import (
    DegenerateFactor,
    DuplicateDate,
    LeadingGap,
    MissingValues,
    NonMonotoneDates,
    NonPositiveLevel,
    UnknownFactor,
    UnparseableCell,
    WindowTooLarge,
)

EQ = FactorSpec("eq", ReturnKind.RELATIVE)
RATE = FactorSpec("rate", ReturnKind.ABSOLUTE)


def write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestLoadTimeSeries:
    def test_small_csv(self, tmp_path):
        p = write(tmp_path, "date,eq,rate\n2020-01-01,100,0.01\n2020-01-02,101,0.011\n2020-01-03,99,0.009\n")
        ts = load_time_series(p, [EQ, RATE])
        assert ts.n_obs == 3
        assert ts.n_factors == 2
        assert ts.values[1, 0] == 101.0

    def test_columns_reordered_to_schema(self, tmp_path):
        p = write(tmp_path, "date,rate,eq\n2020-01-01,0.01,100\n2020-01-02,0.011,101\n")
        ts = load_time_series(p, [EQ, RATE])
        assert ts.factor_ids() == ["eq", "rate"]
        assert ts.values[0, 0] == 100.0
        assert ts.values[0, 1] == 0.01

    def test_duplicate_date(self, tmp_path):
        p = write(tmp_path, "date,eq\n2020-01-01,1\n2020-01-01,2\n")
        with pytest.raises(DuplicateDate):
            load_time_series(p, [EQ])

    def test_decreasing_date(self, tmp_path):
        p = write(tmp_path, "date,eq\n2020-01-02,1\n2020-01-01,2\n")
        with pytest.raises(NonMonotoneDates):
            load_time_series(p, [EQ])

    def test_unknown_factor(self, tmp_path):
        p = write(tmp_path, "date,eq,extra\n2020-01-01,1,2\n")
        with pytest.raises(UnknownFactor):
            load_time_series(p, [EQ])

    def test_missing_schema_factor(self, tmp_path):
        p = write(tmp_path, "date,eq\n2020-01-01,1\n")
        with pytest.raises(UnknownFactor):
            load_time_series(p, [EQ, RATE])

    def test_bad_cell(self, tmp_path):
        p = write(tmp_path, "date,eq\n2020-01-01,abc\n")
        with pytest.raises(UnparseableCell):
            load_time_series(p, [EQ])

    def test_bad_date(self, tmp_path):
        p = write(tmp_path, "date,eq\n01.02.2020,1\n")
        with pytest.raises(UnparseableCell):
            load_time_series(p, [EQ])

    def test_empty_cell_is_missing(self, tmp_path):
        p = write(tmp_path, "date,eq\n2020-01-01,1\n2020-01-02,\n")
        ts = load_time_series(p, [EQ])
        assert np.isnan(ts.values[1, 0])

    def test_full_scale_shape(self, tmp_path):
        # 4588 daily observations of 46 factors
        factors = [FactorSpec(f"f{i}", ReturnKind.ABSOLUTE) for i in range(46)]
        import csv
        from esgan.synthetic import business_dates

        dates = business_dates("2002-03-28", 4588)
        p = tmp_path / "full.csv"
        rng = np.random.default_rng(0)
        block = rng.normal(size=(4588, 46))
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["date"] + [f.factor_id for f in factors])
            for d, row in zip(dates, block):
                w.writerow([d] + [repr(float(v)) for v in row])
        ts = load_time_series(p, factors)
        assert ts.n_obs == 4588
        assert ts.n_factors == 46


class TestFillGaps:
    def test_forward_fill(self):
        ts = TimeSeriesSet([RATE], ["2020-01-01", "2020-01-02", "2020-01-03"],
                           np.array([[1.0], [np.nan], [3.0]]))
        out = fill_gaps(ts)
        assert out.values[:, 0].tolist() == [1.0, 1.0, 3.0]

    def test_no_gaps_unchanged(self):
        ts = TimeSeriesSet([RATE], ["2020-01-01", "2020-01-02"], np.array([[1.0], [2.0]]))
        out = fill_gaps(ts)
        np.testing.assert_array_equal(out.values, ts.values)

    def test_leading_gap(self):
        ts = TimeSeriesSet([RATE], ["2020-01-01", "2020-01-02"], np.array([[np.nan], [2.0]]))
        with pytest.raises(LeadingGap):
            fill_gaps(ts)

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        values = rng.normal(size=(50, 3))
        mask = rng.random(size=values.shape) < 0.2
        mask[0, :] = False
        values[mask] = np.nan
        factors = [FactorSpec(f"f{i}", ReturnKind.ABSOLUTE) for i in range(3)]
        dates = [f"2020-01-{i + 1:02d}" for i in range(31)] + [f"2020-02-{i + 1:02d}" for i in range(19)]
        ts = TimeSeriesSet(factors, dates, values)
        once = fill_gaps(ts)
        twice = fill_gaps(once)
        np.testing.assert_array_equal(once.values, twice.values)

    def test_multi_gap_carries_last_observation(self):
        ts = TimeSeriesSet([RATE], [f"2020-01-{i + 1:02d}" for i in range(5)],
                           np.array([[2.0], [np.nan], [np.nan], [5.0], [np.nan]]))
        out = fill_gaps(ts)
        assert out.values[:, 0].tolist() == [2.0, 2.0, 2.0, 5.0, 5.0]


def series(levels, kind=ReturnKind.RELATIVE, fid="x"):
    levels = np.asarray(levels, dtype=float).reshape(-1, 1)
    dates = [f"2020-01-{i + 1:02d}" for i in range(levels.shape[0])]
    return TimeSeriesSet([FactorSpec(fid, kind)], dates, levels)


class TestRollingReturns:
    def test_relative_constant_growth(self):
        rm = compute_rolling_returns(series([100, 110, 121]), window=1)
        np.testing.assert_allclose(rm.returns[:, 0], [0.10, 0.10])

    def test_absolute_differences(self):
        rm = compute_rolling_returns(series([0.010, 0.012, 0.011], ReturnKind.ABSOLUTE), window=1)
        np.testing.assert_allclose(rm.returns[:, 0], [0.002, -0.001])

    def test_row_count_is_t_minus_window(self):
        rng = np.random.default_rng(1)
        for t_obs, window in [(4588, 258), (50, 10), (11, 10)]:
            levels = np.exp(rng.normal(size=t_obs) * 0.01).cumsum() + 10
            rm = compute_rolling_returns(series(levels), window=window)
            assert rm.n_obs == t_obs - window
        # the production shape: 4588 observations -> 4330 return rows
        assert 4588 - 258 == 4330

    def test_window_too_large(self):
        with pytest.raises(WindowTooLarge):
            compute_rolling_returns(series([1, 2, 3]), window=3)

    def test_non_positive_level_in_relative(self):
        with pytest.raises(NonPositiveLevel):
            compute_rolling_returns(series([100, -1, 120]), window=1)

    def test_missing_cells_rejected(self):
        ts = series([100, np.nan, 120])
        with pytest.raises(MissingValues):
            compute_rolling_returns(ts, window=1)

    def test_relative_scale_invariance(self):
        rng = np.random.default_rng(5)
        levels = np.exp(np.cumsum(rng.normal(0, 0.01, size=300))) * 50
        base = compute_rolling_returns(series(levels), window=30).returns
        scaled = compute_rolling_returns(series(levels * 7.3), window=30).returns
        np.testing.assert_allclose(scaled, base, atol=1e-12)

    def test_absolute_translation_invariance(self):
        rng = np.random.default_rng(6)
        levels = np.cumsum(rng.normal(0, 0.001, size=300)) + 0.02
        base = compute_rolling_returns(series(levels, ReturnKind.ABSOLUTE), window=30).returns
        shifted = compute_rolling_returns(series(levels + 0.5, ReturnKind.ABSOLUTE), window=30).returns
        np.testing.assert_allclose(shifted, base, atol=1e-12)


class TestNormalize:
    def test_population_std_column(self):
        rm = ReturnMatrix([RATE], np.array([[1.0], [2.0], [3.0]]), window=1)
        out = normalize(rm)
        np.testing.assert_allclose(
            out.returns[:, 0], [-1.224744871391589, 0.0, 1.224744871391589], atol=1e-12
        )

    def test_idempotent_on_standardized_data(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(400, 3))
        once = normalize(ReturnMatrix(
            [FactorSpec(f"f{i}", ReturnKind.ABSOLUTE) for i in range(3)], x, window=1))
        twice = normalize(once)
        np.testing.assert_allclose(twice.returns, once.returns, atol=1e-12)

    def test_constant_column(self):
        rm = ReturnMatrix([RATE], np.ones((5, 1)), window=1)
        with pytest.raises(DegenerateFactor):
            normalize(rm)

    def test_normalized_moments(self):
        rng = np.random.default_rng(4)
        x = rng.normal(2.0, 3.0, size=(1000, 4))
        out = normalize(ReturnMatrix(
            [FactorSpec(f"f{i}", ReturnKind.ABSOLUTE) for i in range(4)], x, window=1))
        assert np.abs(out.returns.mean(axis=0)).max() < 1e-9
        assert np.abs(out.returns.std(axis=0) - 1.0).max() < 1e-9


class TestDenormalize:
    def test_round_trip(self):
        rng = np.random.default_rng(11)
        x = rng.normal(5.0, 2.0, size=(200, 3))
        rm = ReturnMatrix([FactorSpec(f"f{i}", ReturnKind.ABSOLUTE) for i in range(3)], x, window=1)
        out = normalize(rm)
        back = denormalize(out.returns, out.scaling)
        np.testing.assert_allclose(back, x, atol=1e-9)

    def test_zero_matrix_maps_to_means(self):
        scaling = Scaling(
            factors=(RATE, EQ), means=np.array([0.5, -1.0]), stds=np.array([2.0, 3.0]))
        out = denormalize(np.zeros((4, 2)), scaling)
        np.testing.assert_allclose(out, np.tile([0.5, -1.0], (4, 1)))

    def test_affine_evaluation(self):
        scaling = Scaling(factors=(RATE,), means=np.array([0.5]), stds=np.array([2.0]))
        out = denormalize(np.array([[1.0]]), scaling)
        assert out[0, 0] == pytest.approx(2.5, abs=0)

    def test_dimension_mismatch(self):
        scaling = Scaling(factors=(RATE,), means=np.array([0.0]), stds=np.array([1.0]))
        with pytest.raises(ValueError):
            denormalize(np.zeros((3, 2)), scaling)


class TestScenarioSetClamp:
    def make_set(self):
        from esgan.data import ScenarioSet

        values = np.array([[-0.03, 0.5], [0.01, -0.8], [0.05, 0.1]])
        return ScenarioSet(factors=[RATE, EQ], values=values)

    def test_floor_applied_in_natural_units(self):
        clamped = self.make_set().clamped({"rate": (-0.019, None)})
        assert clamped.values[:, 0].min() >= -0.019
        # untouched column and rows above the floor are bit-identical
        np.testing.assert_array_equal(clamped.values[:, 1], self.make_set().values[:, 1])
        assert clamped.values[1, 0] == 0.01

    def test_two_sided_bounds(self):
        clamped = self.make_set().clamped({"eq": (-0.5, 0.3)})
        assert clamped.values[:, 1].min() >= -0.5
        assert clamped.values[:, 1].max() <= 0.3

    def test_original_left_alone(self):
        ss = self.make_set()
        ss.clamped({"rate": (0.0, None)})
        assert ss.values[0, 0] == -0.03

    def test_unknown_factor_rejected(self):
        with pytest.raises(UnknownFactor):
            self.make_set().clamped({"ghost": (0.0, None)})
