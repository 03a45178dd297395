# tests/test_evaluator.py

import numpy as np
import pytest

from sbn.errors import MetricError, NumericError, SkipSample, UsageError
from sbn.evaluator import (evaluate_horizons, forecast_origins, horizon_table, midnight_origins, nrmse,
                           rolling_evaluate, seasonal_naive, seasonal_naive_series)
from sbn.pipeline import forecast
from sbn.synthetic import SynthConfig, generate_synthetic

FULL = ("weekly", "daily", "hourly")


@pytest.fixture(scope="module")
def one_year():
    """A week of history followed by 365 days, starting on a Monday midnight"""
    return generate_synthetic(SynthConfig(n_hours=168 + 8760, seed=11))


def test_nrmse_reference_values():
    assert nrmse([1.0, 3.0], [0.0, 2.0]) == pytest.approx(0.5)
    assert nrmse([2.0, 4.0], [0.0, 2.0]) == pytest.approx(1.0)
    assert nrmse([2.0, 4.0], [0.0, 2.0], literal_mse=True) == pytest.approx(2.0)
    assert nrmse([0.0, 2.0], [0.0, 2.0]) == 0.0


def test_nrmse_is_shift_and_scale_invariant():
    rng = np.random.default_rng(0)
    actual = rng.normal(60.0, 10.0, 200)
    pred = actual + rng.normal(0.0, 3.0, 200)
    base = nrmse(pred, actual)
    assert nrmse(pred + 40.0, actual + 40.0) == pytest.approx(base, rel=1e-12)
    assert nrmse(pred * 3.0, actual * 3.0) == pytest.approx(base, rel=1e-12)


def test_nrmse_rejects_degenerate_input():
    with pytest.raises(MetricError):
        nrmse([1.0, 2.0, 3.0], [5.0, 5.0, 5.0])
    with pytest.raises(UsageError):
        nrmse([1.0], [1.0])
    with pytest.raises(UsageError):
        nrmse([1.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(NumericError):
        nrmse([1.0, np.nan], [1.0, 2.0])


def test_seasonal_naive(five_weeks):
    assert seasonal_naive(five_weeks, 200) == five_weeks.energy[32]
    with pytest.raises(SkipSample):
        seasonal_naive(five_weeks, 167)
    series = five_weeks.copy()
    series.valid[32] = False
    with pytest.raises(SkipSample):
        seasonal_naive(series, 200)
    values = seasonal_naive_series(series)
    assert np.isnan(values[:168]).all() and np.isnan(values[200])
    assert values[201] == series.energy[33]


def test_origins(five_weeks):
    np.testing.assert_array_equal(midnight_origins(five_weeks, 600, 839), np.arange(599, 839, 24))
    np.testing.assert_array_equal(forecast_origins(five_weeks, 600, 839, 36), np.arange(599, 839, 36))
    assert forecast_origins(five_weeks, 601, 839, 24)[0] == 623
    assert forecast_origins(five_weeks, 601, 610, 24).size == 0


def test_full_year_of_day_ahead_forecasts(one_year, make_model):
    model = make_model((), series=one_year, seed=1)
    report = rolling_evaluate(model, one_year, (168, 168 + 8759), 24)
    assert report.n_origins == 365
    assert report.n_skipped_origins == 0
    assert report.n_predictions == 8760
    stamps = report.predictions["timestamp"]
    assert stamps.is_monotonic_increasing and stamps.iloc[0].hour == 0
    assert report.predictions["lead"].tolist()[:25] == list(range(1, 25)) + [1]


def test_instant_model_is_horizon_invariant(one_year, make_model):
    model = make_model((), series=one_year, seed=2)
    reports = evaluate_horizons(model, one_year, (168, 168 + 8759), (24, 48, 96, 7))
    scores = {r.final_nrmse for r in reports}
    assert len(scores) == 1
    assert {r.n_predictions for r in reports} == {8760}
    assert len({r.baseline_nrmse for r in reports}) == 1


@pytest.mark.parametrize("horizon", [24, 36])
def test_pooled_nrmse_matches_per_origin_forecasts(five_weeks, make_model, horizon):
    model = make_model(FULL, series=five_weeks, seed=3)
    first, last = 600, len(five_weeks) - 1
    report = rolling_evaluate(model, five_weeks, (first, last), horizon)

    finals, actuals, hours = [], [], []
    for origin in forecast_origins(five_weeks, first, last, horizon):
        for out in forecast(model, five_weeks, int(origin), min(horizon, last - int(origin))):
            finals.append(out.final)
            actuals.append(out.actual)
            hours.append(out.hour)
    finals, actuals = np.array(finals), np.array(actuals)
    expected = np.sqrt(np.mean((finals - actuals) ** 2)) / (actuals.max() - actuals.min())

    assert hours == list(range(first, last + 1))
    assert report.n_predictions == len(hours)
    assert report.nrmse["hourly"] == pytest.approx(expected, rel=1e-10)
    np.testing.assert_allclose(report.predictions["forecast_hourly"], finals, rtol=0, atol=1e-9)
    baseline = five_weeks.energy[np.array(hours) - 168]
    assert report.baseline_nrmse == pytest.approx(nrmse(baseline, actuals), rel=1e-12)


def test_instant_output_matches_instant_only_model(five_weeks, make_model):
    full = make_model(FULL, series=five_weeks, seed=4)
    alone = make_model((), series=five_weeks, seed=4)
    a = rolling_evaluate(full, five_weeks, (600, 839))
    b = rolling_evaluate(alone, five_weeks, (600, 839))
    assert a.nrmse["instant"] == pytest.approx(b.final_nrmse, rel=1e-12)
    assert a.stage_labels == ["instant", "weekly", "daily", "hourly"]


def test_origins_without_history_are_skipped(five_weeks, make_model):
    model = make_model(FULL, series=five_weeks)
    report = rolling_evaluate(model, five_weeks, (480, 839))
    assert report.n_skipped_origins == 2
    assert report.n_predictions == 839 - 528 + 1
    with pytest.raises(UsageError):
        rolling_evaluate(model, five_weeks, (0, 300))


def test_missing_hours_drop_their_block(five_weeks, make_model):
    series = five_weeks.copy()
    series.valid[700] = False
    model = make_model((), series=five_weeks)
    report = rolling_evaluate(model, series, (600, 839))
    assert report.n_skipped_origins == 1
    hours = (report.predictions["timestamp"] - series.start) // np.timedelta64(1, "h")
    assert not hours.between(696, 719).any()


def test_literal_mse_flag(five_weeks, make_model):
    model = make_model((), series=five_weeks, seed=5)
    rmse_report = rolling_evaluate(model, five_weeks, (600, 839))
    mse_report = rolling_evaluate(model, five_weeks, (600, 839), literal_mse=True)
    assert mse_report.final_nrmse != rmse_report.final_nrmse


def test_horizon_table_and_rows(tmp_path, five_weeks, make_model):
    model = make_model(("daily",), series=five_weeks, seed=6)
    reports = evaluate_horizons(model, five_weeks, (600, 839), (24, 48), train_range=(200, 599))
    table = horizon_table(reports)
    assert table.columns.tolist() == ["24h", "48h"]
    assert table.index.tolist() == ["instant", "daily", "seasonal_naive"]
    assert table.loc["daily", "24h"] == pytest.approx(100 * reports[0].final_nrmse)

    row = reports[1].to_row()
    assert row["horizon"] == 48 and row["train_first"] == 200
    assert row["nrmse_daily"] == pytest.approx(100 * reports[1].nrmse["daily"])

    path = reports[0].write_predictions(tmp_path / "pred.csv")
    assert path.read_text().splitlines()[0] == "timestamp,origin,lead,actual,forecast_instant,forecast_daily,baseline"
