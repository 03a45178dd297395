# tests/test_pipeline.py

import numpy as np
import pytest

from sbn.errors import InsufficientHistoryError, SkipSample, UsageError
from sbn.features import instant_features
from sbn.model import instant_forward, stage_forward
from sbn.nn import RELU, Mode
from sbn.pipeline import (feasible_origins, forecast, historical_residuals, joint_forward, joint_outputs,
                          lagged_mask, lead_mask, loss_and_gradients, rollout, trace_series, weighted_loss)
from sbn.trainer import TrainConfig, build_samples

FULL = ("weekly", "daily", "hourly")


def straight_line_forecast(model, series, origin, horizon):
    """
    Scalar reference: residuals up to the origin from actuals, later residual
    lags replaced by the stage's own estimates; returns kWh per stage and lead
    """
    norm = model.normalizer
    stages = model.stages
    memo = {}

    def instant(t):
        return instant_forward(model, instant_features(series, t, norm))

    def actual(t):
        return float(norm.standardize_energy(series.energy[t]))

    def residual(s, t):
        key = ("r", s, t)
        if key not in memo:
            if s == 0:
                memo[key] = instant(t) - actual(t)
            else:
                window = [residual(s - 1, t - lag) for lag in stages[s - 1].lags]
                memo[key] = residual(s - 1, t) - stage_forward(stages[s - 1], window)
        return memo[key]

    def estimate(s, t):
        key = ("e", s, t)
        if key not in memo:
            window = [residual(s - 1, t - lag) if t - lag <= origin else estimate(s, t - lag)
                      for lag in stages[s - 1].lags]
            memo[key] = stage_forward(stages[s - 1], window)
        return memo[key]

    out = np.empty((len(stages) + 1, horizon))
    for h in range(horizon):
        t = origin + 1 + h
        y = instant(t)
        out[0, h] = y
        for s in range(1, len(stages) + 1):
            y = y - estimate(s, t)
            out[s, h] = y
    return norm.destandardize_energy(out)


def relu_pattern(model, jp):
    nets = [model.instant.temp_reducer, model.instant.head] + [stage.net for stage in model.stages]
    caches = list(jp.instant_cache) + jp.stage_caches
    pattern = []
    for net, cache in zip(nets, caches):
        for layer, z in zip(net.layers, cache.pre_activations):
            if layer.activation == RELU:
                pattern.append((z > 0).ravel())
    return np.concatenate(pattern)


@pytest.mark.parametrize("origin,horizon", [(600, 24), (515, 48), (700, 96)])
def test_forecast_matches_straight_line_reference(five_weeks, make_model, origin, horizon):
    model = make_model(FULL, series=five_weeks, seed=4)
    outputs = forecast(model, five_weeks, origin, horizon)
    reference = straight_line_forecast(model, five_weeks, origin, horizon)
    got = np.stack([out.forecasts for out in outputs], axis=1)
    np.testing.assert_allclose(got, reference, rtol=0, atol=1e-10)
    assert [out.hour for out in outputs] == list(range(origin + 1, origin + horizon + 1))


def test_forecast_stage_identity(five_weeks, make_model):
    model = make_model(FULL, series=five_weeks, seed=1)
    for out in forecast(model, five_weeks, 650, 24):
        np.testing.assert_allclose(out.forecasts[1:], out.forecasts[:-1] - out.corrections, atol=1e-9)
        assert out.actual == pytest.approx(five_weeks.energy[out.hour])
        assert out.final == out.forecasts[-1]


def test_joint_graph_matches_trace(five_weeks, make_model):
    model = make_model(FULL, series=five_weeks, seed=2)
    samples = build_samples(five_weeks, model.config, normalizer=model.normalizer)
    batch = samples.batch(np.arange(0, len(samples), 7))
    outputs = joint_outputs(model, batch, Mode.INFER)
    trace = trace_series(model, five_weeks)
    np.testing.assert_allclose(outputs.forecasts, trace.forecasts[:, batch.targets], rtol=0, atol=1e-12)
    np.testing.assert_allclose(outputs.corrections, trace.corrections[:, batch.targets], rtol=0, atol=1e-12)
    np.testing.assert_array_equal(outputs.actual, trace.actuals[batch.targets])


def test_joint_gradients_match_finite_differences(five_weeks, make_model):
    model = make_model(FULL, series=five_weeks, seed=5, dropout_rate=0.0)
    samples = build_samples(five_weeks, model.config, normalizer=model.normalizer)
    rng = np.random.default_rng(0)
    batch = samples.batch(rng.choice(len(samples), size=20, replace=False))
    weights = TrainConfig().loss_weights(len(model.stages))

    _, _, grads = loss_and_gradients(model, batch, weights, Mode.INFER)
    params = model.parameters()
    assert [g.shape for g in grads] == [p.shape for p in params]

    eps = 1e-6
    checked, worst = 0, 0.0
    for param, grad in zip(params, grads):
        flat = param.reshape(-1)
        for i in rng.choice(flat.size, size=min(12, flat.size), replace=False):
            saved = flat[i]
            flat[i] = saved + eps
            plus = joint_forward(model, batch, Mode.INFER)
            flat[i] = saved - eps
            minus = joint_forward(model, batch, Mode.INFER)
            flat[i] = saved
            if not np.array_equal(relu_pattern(model, plus), relu_pattern(model, minus)):
                continue
            numeric = (weighted_loss(plus, weights) - weighted_loss(minus, weights)) / (2 * eps)
            analytic = grad.reshape(-1)[i]
            worst = max(worst, abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-4))
            checked += 1
    assert checked >= 150
    assert worst < 1e-4


def test_stop_history_gradient_only_changes_upstream_parameters(five_weeks, make_model):
    model = make_model(FULL, series=five_weeks, seed=6)
    samples = build_samples(five_weeks, model.config, normalizer=model.normalizer)
    batch = samples.batch(np.arange(10))
    weights = (0.1, 0.1, 0.1, 0.9)
    _, _, full = loss_and_gradients(model, batch, weights, Mode.INFER)
    _, _, stopped = loss_and_gradients(model, batch, weights, Mode.INFER, stop_history_gradient=True)
    for a, b in zip(full[-4:], stopped[-4:]):
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)
    assert not np.allclose(full[0], stopped[0])


def test_rollout_first_lead_equals_trace(five_weeks, make_model):
    model = make_model(FULL, series=five_weeks, seed=3)
    trace = trace_series(model, five_weeks)
    origins = np.arange(515, 800, 13)
    result = rollout(model, five_weeks, origins, 1, trace)
    np.testing.assert_allclose(result.forecasts[:, :, 0], trace.forecasts[:, origins + 1], rtol=0, atol=1e-12)


def test_instant_forecast_ignores_horizon(five_weeks, make_model):
    model = make_model(FULL, series=five_weeks, seed=3)
    trace = trace_series(model, five_weeks)
    short = rollout(model, five_weeks, [600], 24, trace)
    long = rollout(model, five_weeks, [600], 96, trace)
    np.testing.assert_array_equal(short.forecasts[0, 0], long.forecasts[0, 0, :24])
    np.testing.assert_array_equal(long.forecasts[0, 0], trace.forecasts[0, 601:697])


def test_zero_booster_model_is_the_instant_forecaster(five_weeks, make_model):
    model = make_model((), series=five_weeks, seed=3)
    trace = trace_series(model, five_weeks)
    assert trace.forecasts.shape == (1, len(five_weeks))
    assert trace.corrections.shape == (0, len(five_weeks))
    assert np.isnan(trace.forecasts[0, :12]).all() and np.isfinite(trace.forecasts[0, 12:]).all()


def test_feasible_origins_boundaries(five_weeks, make_model):
    model = make_model(FULL, series=five_weeks)
    mask = feasible_origins(model, five_weeks, 24)
    feasible = np.flatnonzero(mask)
    assert feasible[0] == model.config.history_hours - 1 == 515
    assert feasible[-1] == len(five_weeks) - 25
    assert mask[515:len(five_weeks) - 24].all()

    with pytest.raises(InsufficientHistoryError) as info:
        forecast(model, five_weeks, 514, 24)
    assert info.value.earliest_origin == 515
    assert info.value.earliest_target == 516


def test_feasible_origins_produce_finite_forecasts(five_weeks, make_model):
    series = five_weeks.copy()
    series.valid[650] = False
    model = make_model(FULL, series=five_weeks, seed=8)
    trace = trace_series(model, series)
    mask = feasible_origins(model, series, 24, trace)
    assert not mask[649]
    origins = np.flatnonzero(mask)
    result = rollout(model, series, origins, 24, trace)
    assert np.isfinite(result.forecasts).all()
    blocked = rollout(model, series, [649], 24, trace)
    assert np.isnan(blocked.forecasts).any()


def test_daily_booster_feasibility(five_weeks, make_model):
    model = make_model(("daily",), series=five_weeks)
    mask = feasible_origins(model, five_weeks, 24)
    assert np.flatnonzero(mask)[0] == 7 * 24 + 12 - 1


def test_historical_residuals(five_weeks, make_model):
    model = make_model(("weekly", "daily"), series=five_weeks, seed=2)
    trace = trace_series(model, five_weeks)
    hours = [700, 701, 750]
    np.testing.assert_array_equal(historical_residuals(model, five_weeks, hours, 2, trace),
                                  trace.residuals[2, hours])
    with pytest.raises(SkipSample):
        historical_residuals(model, five_weeks, [100], 1, trace)
    with pytest.raises(UsageError):
        historical_residuals(model, five_weeks, [100], 3, trace)


def test_shifted_masks():
    mask = np.array([True, False, True, True])
    np.testing.assert_array_equal(lagged_mask(mask, 1), [False, True, False, True])
    np.testing.assert_array_equal(lead_mask(mask, 2), [True, True, False, False])
    np.testing.assert_array_equal(lead_mask(mask, 5), [False] * 4)


def test_rollout_rejects_bad_arguments(five_weeks, make_model):
    model = make_model((), series=five_weeks)
    with pytest.raises(UsageError):
        rollout(model, five_weeks, [10], 0)
    with pytest.raises(UsageError):
        rollout(model, five_weeks, [len(five_weeks)], 24)
