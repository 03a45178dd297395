#!/usr/bin/env python3
"""
Synthetic benchmarks for the stacked booster network.

Runs four scenarios on generated data where the right answer is known:

* boosting: instant-only against the full three-booster stack
* step: a permanent change of the weekly event after the end of training,
  instant-only against the weekly booster and the full stack
* training modes: joint weighted loss against staged unfrozen training
* sizes: the setup x training-size sweep, saved with SweepReporter
"""

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from sbn.errors import UsageError
from sbn.evaluator import EvalReport, evaluate_horizons
from sbn.features import HourlySeries, Normalizer
from sbn.model import ModelConfig, SbnModel, build_model
from sbn.synthetic import SynthConfig, generate_synthetic
from sbn.trainer import TrainConfig, TrainMode, build_samples, train
from sbn.utils import print_step
from research.framework import SweepFramework
from research.reporting.reporter import SweepReporter
from research.sweep_cells import HOURS_PER_YEAR, STANDARD_SETUPS, setup_from_text, size_hours

FULL_STACK = ("weekly", "daily", "hourly")
# weeks between the start of evaluation and the last weekly event step
STEP_EVAL_WEEKS = 4
# weeks between consecutive steps
STEP_REPEAT_WEEKS = 26
# affected hours are scored this many weeks after the last step
STEP_SETTLE_WEEKS = 3


def benchmark_series(train_hours: int, eval_hours: int = HOURS_PER_YEAR, seed: int = 0,
                     history_hours: Optional[int] = None,
                     **overrides) -> Tuple[HourlySeries, SynthConfig, Tuple[int, int], Tuple[int, int]]:
    """
    Synthetic series long enough for one training range followed by one evaluation range

    Args:
        train_hours (int): hours of training targets
        eval_hours (int): hours of the evaluation range, placed at the end
        seed (int): generator seed
        history_hours (int, optional): hours in front of the first training
            target, default the full stack's history
        **overrides: further SynthConfig fields

    Returns:
        Tuple: series, its generator config, train range and eval range
    """
    if history_hours is None:
        history_hours = ModelConfig(boosters=FULL_STACK).history_hours
    n_hours = history_hours + train_hours + eval_hours
    cfg = SynthConfig(n_hours=n_hours, seed=seed, **overrides)
    series = generate_synthetic(cfg)
    train_range = (history_hours, history_hours + train_hours - 1)
    eval_range = (train_range[1] + 1, n_hours - 1)
    return series, cfg, train_range, eval_range


def fit_and_evaluate(series: HourlySeries, boosters: Sequence[str], train_range: Tuple[int, int],
                     eval_range: Tuple[int, int], train_config: TrainConfig,
                     horizons: Sequence[int] = (24,), dropout_rate: float = 0.2) -> Tuple[SbnModel, List[EvalReport]]:
    """Train one fresh model on train_range and evaluate it on eval_range"""
    config = ModelConfig(boosters=tuple(boosters), dropout_rate=dropout_rate)
    norm = Normalizer.fit(series, *train_range)
    samples = build_samples(series, config, train_range[0], train_range[1], norm)
    model = build_model(config, seed=train_config.seed, normalizer=norm)
    train(model, samples, train_config)
    reports = evaluate_horizons(model, series, eval_range, horizons, train_range=train_range)
    return model, reports


def boosting_benchmark(train_config: TrainConfig, train_years: int = 2, seed: int = 0) -> Dict[str, float]:
    """
    Instant-only against the full stack on the default synthetic load

    Returns:
        Dict[str, float]: 24 h NRMSE (%) of both models and the seasonal naive baseline
    """
    series, _, train_range, eval_range = benchmark_series(train_years * HOURS_PER_YEAR, seed=seed)
    _, (instant,) = fit_and_evaluate(series, (), train_range, eval_range, train_config)
    _, (full,) = fit_and_evaluate(series, FULL_STACK, train_range, eval_range, train_config)
    return {"instant": 100.0 * instant.final_nrmse,
            "full": 100.0 * full.final_nrmse,
            "baseline": 100.0 * full.baseline_nrmse,
            "improvement": 1.0 - full.final_nrmse / instant.final_nrmse}


def event_hour_mae(report: EvalReport, cfg: SynthConfig, since: pd.Timestamp) -> float:
    """Mean absolute final-stage error at the weekly event hour from `since` on"""
    frame = report.predictions
    stamps = pd.DatetimeIndex(frame["timestamp"])
    hit = ((stamps.dayofweek == cfg.event_weekday) & (stamps.hour == cfg.event_hour)
           & (stamps >= since))
    if not hit.any():
        return float("nan")
    column = f"forecast_{report.stage_labels[-1]}"
    rows = frame[np.asarray(hit)]
    return float(np.mean(np.abs(rows[column] - rows["actual"])))


def step_schedule(train_range: Tuple[int, int], eval_range: Tuple[int, int]) -> Tuple[int, int, int]:
    """
    Hours of the weekly event steps for the step benchmark

    Returns:
        Tuple[int, int, int]: first step hour, number of steps and last step
        hour; every step but the last falls inside the training range
    """
    last_step = eval_range[0] + STEP_EVAL_WEEKS * 168
    if last_step > eval_range[1]:
        raise UsageError(f"Evaluation range ending at hour {eval_range[1]} is too short for the step")
    period = STEP_REPEAT_WEEKS * 168
    earlier = (last_step - train_range[0]) // period
    return last_step - earlier * period, earlier + 1, last_step


def step_benchmark(train_config: TrainConfig, train_years: int = 2, seed: int = 0) -> Dict[str, Any]:
    """
    Weekly event grows by a permanent step a few weeks into the evaluation year

    The training years already contain earlier steps of the same size every
    STEP_REPEAT_WEEKS weeks, so the boosters see shifted weekly residuals
    during training; the last step lies after the end of training and its
    new level is never seen. The oscillation is switched off so the event
    hour carries the only pattern change. Errors are measured at the event
    hour once the last step is at least STEP_SETTLE_WEEKS weeks old.
    """
    train_hours = train_years * HOURS_PER_YEAR
    series, cfg, train_range, eval_range = benchmark_series(train_hours, seed=seed,
                                                            oscillation_amplitude_kw=0.0)
    stamps = series.timestamps()
    first_step, count, last_step = step_schedule(train_range, eval_range)
    cfg = replace(cfg, step_date=stamps[first_step].strftime("%Y-%m-%dT%H:%M:%S"),
                  step_repeat_weeks=STEP_REPEAT_WEEKS, step_count=count)
    series = generate_synthetic(cfg)
    since = stamps[last_step] + pd.Timedelta(weeks=STEP_SETTLE_WEEKS)

    scores: Dict[str, Any] = {"step_dates": [s.strftime("%Y-%m-%dT%H:%M:%S") for s in cfg.step_dates()],
                              "step_change_kw": cfg.step_change_kw,
                              "scored_from": since.strftime("%Y-%m-%dT%H:%M:%S")}
    for name, boosters in (("instant", ()), ("weekly", ("weekly",)), ("full", FULL_STACK)):
        _, (report,) = fit_and_evaluate(series, boosters, train_range, eval_range, train_config)
        scores[f"{name}_mae_kw"] = event_hour_mae(report, cfg, since)
    return scores


def training_mode_benchmark(train_config: TrainConfig, train_years: int = 2, seed: int = 0) -> Dict[str, float]:
    """Full stack trained jointly and in unfrozen stages, 24 h NRMSE (%)"""
    series, _, train_range, eval_range = benchmark_series(train_years * HOURS_PER_YEAR, seed=seed)
    scores = {}
    for mode in (TrainMode.JOINT_WEIGHTED, TrainMode.STAGED_UNFROZEN):
        cfg = replace(train_config, mode=mode)
        _, (report,) = fit_and_evaluate(series, FULL_STACK, train_range, eval_range, cfg)
        scores[mode.value] = 100.0 * report.final_nrmse
    scores["relative_gap"] = (abs(scores["staged_unfrozen"] - scores["joint_weighted"])
                              / scores["joint_weighted"])
    return scores


def size_benchmark(train_config: TrainConfig, sizes: Sequence[str] = ("6mo", "1y", "2y"),
                   setups: Optional[List[str]] = None, seed: int = 0,
                   output_dir: Optional[str] = None) -> Dict[str, Any]:
    """
    Setup x size sweep on one synthetic series

    Returns:
        Dict[str, Any]: the cell rows, the analysis and the report
        directory (None unless output_dir is given)
    """
    largest = max(size_hours(s) for s in sizes)
    series, _, _, _ = benchmark_series(largest, seed=seed)
    chosen = [setup_from_text(s) for s in setups] if setups else [STANDARD_SETUPS[0], STANDARD_SETUPS[-1]]
    framework = SweepFramework(series, chosen, list(sizes), horizons=(24,), train_config=train_config)
    results = framework.run_full_evaluation()
    analysis = framework.analyze_results(results)
    report_dir = None
    if output_dir:
        reporter = SweepReporter(output_dir=output_dir)
        report = reporter.generate_report(results, analysis, experiment_id="benchmark_sizes")
        report.title = "Stacked Booster Network: Synthetic Training Size Benchmark"
        report_dir = reporter.save_report(report)
    return {"results": results, "analysis": analysis, "report_dir": report_dir}


def parse_arguments(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Run synthetic benchmarks for the stacked booster network")
    parser.add_argument("--output", type=str, default="research/benchmark_output",
                        help="Directory for the benchmark report")
    parser.add_argument("--epochs", type=int, default=100, help="Training epochs per model")
    parser.add_argument("--seed", type=int, default=0, help="Seed for data and training")
    parser.add_argument("--train-years", type=int, default=2, help="Training years of the single-size scenarios")
    parser.add_argument("--sizes", type=str, default="6mo,1y,2y", help="Comma-separated training sizes")
    parser.add_argument("--skip", type=str, default="",
                        help="Comma-separated scenarios to skip: boosting, step, modes, sizes")
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main function"""
    args = parse_arguments(argv)
    skip = {s.strip() for s in args.skip.split(",") if s.strip()}
    train_config = TrainConfig(epochs=args.epochs, seed=args.seed)
    output = Path(args.output)
    output.mkdir(parents=True, exist_ok=True)
    summary: Dict[str, Any] = {"epochs": args.epochs, "seed": args.seed, "train_years": args.train_years}
    start_time = time.time()

    if "boosting" not in skip:
        print("\nPhase 1: Boosting benchmark")
        summary["boosting"] = boosting_benchmark(train_config, args.train_years, args.seed)
        print_step("Instant-only vs full stack (24 h NRMSE %)", summary["boosting"])

    if "step" not in skip:
        print("\nPhase 2: Weekly step benchmark")
        summary["step"] = step_benchmark(train_config, args.train_years, args.seed)
        print_step("Event-hour MAE after the last step (kW)", summary["step"])

    if "modes" not in skip:
        print("\nPhase 3: Training mode benchmark")
        summary["modes"] = training_mode_benchmark(train_config, args.train_years, args.seed)
        print_step("Joint vs staged training (24 h NRMSE %)", summary["modes"])

    if "sizes" not in skip:
        print("\nPhase 4: Training size benchmark")
        sizes = [s.strip() for s in args.sizes.split(",") if s.strip()]
        outcome = size_benchmark(train_config, sizes, seed=args.seed, output_dir=str(output))
        summary["sizes"] = outcome["analysis"]["sizes"]
        print_step("Final-stage NRMSE % by training size", outcome["analysis"]["sizes"])

    with open(output / "benchmark_summary.json", "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True,
                  default=lambda o: o.to_dict() if isinstance(o, pd.DataFrame) else str(o))
    print(f"\nBenchmarks completed in {time.time() - start_time:.1f}s")
    print(f"Summary saved to: {output / 'benchmark_summary.json'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
