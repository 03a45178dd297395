# sbn/cli.py

"""
Command-line entry point: sbn {synth,train,evaluate,forecast,sweep}.

Every subcommand reads the run configuration (--config, CONFIG_PATH or
config/settings.json) and applies its flags on top. Exit codes: 0 success,
1 usage error, 2 data error, 3 numeric failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config.config_loader import COMMAND_SECTIONS, RunConfig, add_flags, apply_overrides, load_config
from .archive import load_archive, save_model
from .data_io import load_series, write_csv
from .errors import SbnError, UsageError
from .evaluator import evaluate_horizons, horizon_table
from .features import HourlySeries, Normalizer
from .model import build_model
from .pipeline import feasible_origins, forecast, trace_series
from .synthetic import generate_synthetic, oscillation_period_conflicts
from .trainer import build_samples, train
from .utils import print_step, setup_logging

log = logging.getLogger(__name__)

COMMAND_HELP = {
    "synth": "Generate a synthetic hourly load CSV",
    "train": "Train a model on a CSV and save the archive",
    "evaluate": "Rolling evaluation of a saved model at several horizons",
    "forecast": "Per-hour forecast of every stage from one origin",
    "sweep": "Train and evaluate booster setups over training sizes",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sbn", description="Stacked booster network for short-term load forecasting")
    parser.add_argument("--config", type=str, default=None, help="settings file (JSON)")
    commands = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    commands.required = True
    for name, sections in COMMAND_SECTIONS.items():
        sub = commands.add_parser(name, help=COMMAND_HELP[name], description=COMMAND_HELP[name])
        sub.add_argument("--config", type=str, default=argparse.SUPPRESS, help="settings file (JSON)")
        add_flags(sub, sections)
    return parser


def _timestamp_index(series: HourlySeries, text: Optional[str], default: int, name: str) -> int:
    if text is None:
        return default
    try:
        index = series.index_of(text)
    except ValueError:
        raise UsageError(f"{name}: cannot parse timestamp '{text}'") from None
    if not 0 <= index < len(series):
        raise UsageError(f"{name}: {text} lies outside the series "
                         f"({series.start} .. {series.timestamps()[-1]})")
    return index


def _train_range(config: RunConfig, series: HourlySeries) -> Tuple[int, int]:
    """
    Training targets; without --train-end training stops just before the
    evaluation range so that evaluate scores held-out hours
    """
    data = config.section("data")
    first = _timestamp_index(series, data["train_start"], 0, "--train-start")
    eval_first, eval_last = _eval_range(config, series)
    if data["train_end"] is None and eval_first - 1 >= first:
        last = eval_first - 1
    else:
        last = _timestamp_index(series, data["train_end"], len(series) - 1, "--train-end")
    if first > last:
        raise UsageError(f"Training range is empty: {data['train_start']} .. {data['train_end']}")
    if first <= eval_last and eval_first <= last:
        stamps = series.timestamps()
        log.warning("Training range %s .. %s overlaps the evaluation range %s .. %s; "
                    "evaluation scores there are in-sample", stamps[first], stamps[last],
                    stamps[eval_first], stamps[eval_last])
    return first, last


def _eval_range(config: RunConfig, series: HourlySeries) -> Tuple[int, int]:
    data = config.section("data")
    last = _timestamp_index(series, data["eval_end"], len(series) - 1, "--eval-end")
    default_first = max(0, last - int(data["eval_hours"]) + 1)
    first = _timestamp_index(series, data["eval_start"], default_first, "--eval-start")
    if first > last:
        raise UsageError(f"Evaluation range is empty: {data['eval_start']} .. {data['eval_end']}")
    return first, last


def _load_data(config: RunConfig) -> HourlySeries:
    series, summary = load_series(config.get("paths.data"), int(config.get("data.max_gap_hours")))
    print(f"Loaded {len(series)} hours from {config.get('paths.data')} "
          f"({summary.hours_invalidated} invalid, {summary.hours_interpolated} interpolated)")
    return series


def cmd_synth(config: RunConfig) -> int:
    """Write the synthetic series to paths.data"""
    cfg = config.synth_config()
    oscillation_period_conflicts(cfg, config.model_config().boosters)
    series = generate_synthetic(cfg)
    path = write_csv(series, config.get("paths.data"))
    print(f"Wrote {len(series)} hours to {path}")
    return 0


def cmd_train(config: RunConfig) -> int:
    """Train on the training range and write the archive plus the loss history"""
    series = _load_data(config)
    first, last = _train_range(config, series)
    model_config = config.model_config()
    train_config = config.train_config()

    norm = Normalizer.fit(series, first, last)
    samples = build_samples(series, model_config, first, last, norm)
    model = build_model(model_config, seed=train_config.seed, normalizer=norm)
    stamps = series.timestamps()
    print(f"Model {model_config.label}: {model.parameter_count} parameters, {model.layer_count} layers")
    print(f"Training on {len(samples)} targets ({samples.skipped} skipped), "
          f"{stamps[first]} .. {stamps[last]}")

    result = train(model, samples, train_config)
    metadata = {"data": Path(config.get("paths.data")).name,
                "train_first": str(stamps[first]), "train_last": str(stamps[last]),
                "samples": len(samples)}
    model_path = save_model(model, config.get("paths.model"), train_config.to_dict(), metadata)
    loss_path = config.get("paths.loss_history") or str(Path(model_path).with_suffix("")) + "_loss.csv"
    result.write_loss_history(loss_path)

    print_step("Final training mse per stage (standardized units)", result.final_losses())
    print(f"Parameters: {model.parameter_count}")
    print(f"Model saved to: {model_path}")
    print(f"Loss history saved to: {loss_path}")
    return 0


def _warn_in_sample(metadata: Dict[str, Any], series: HourlySeries, eval_range: Tuple[int, int]) -> bool:
    """Warn when the archive's recorded training range overlaps the evaluation range"""
    if not metadata.get("train_first") or not metadata.get("train_last"):
        return False
    stamps = series.timestamps()
    train_first, train_last = pd.Timestamp(metadata["train_first"]), pd.Timestamp(metadata["train_last"])
    overlap = train_first <= stamps[eval_range[1]] and stamps[eval_range[0]] <= train_last
    if overlap:
        log.warning("Evaluation range %s .. %s overlaps the training range %s .. %s of the model; "
                    "scores are in-sample", stamps[eval_range[0]], stamps[eval_range[1]],
                    train_first, train_last)
    return overlap


def cmd_evaluate(config: RunConfig) -> int:
    """Per-stage NRMSE at every horizon, printed and written to paths.report"""
    archive = load_archive(config.get("paths.model"))
    model = archive.model
    series = _load_data(config)
    eval_range = _eval_range(config, series)
    _warn_in_sample(archive.metadata, series, eval_range)
    horizons = [int(h) for h in config.get("evaluate.horizons")]
    if not horizons or min(horizons) < 1:
        raise UsageError(f"Horizons must be positive, got {horizons}")

    reports = evaluate_horizons(model, series, eval_range, horizons,
                                literal_mse=bool(config.get("evaluate.literal_mse")))
    table = horizon_table(reports)
    report_path = Path(config.get("paths.report"))
    report_path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(report_path, float_format="%.6f")

    prefix = config.get("paths.predictions")
    if prefix:
        for report in reports:
            report.write_predictions(f"{prefix}_{report.horizon}h.csv")

    stamps = series.timestamps()
    print_step(f"NRMSE (%) of {model.config.label}, {stamps[eval_range[0]]} .. {stamps[eval_range[1]]}", table)
    for report in reports:
        if report.n_skipped_origins:
            print(f"{report.horizon}h: {report.n_skipped_origins} of "
                  f"{report.n_origins + report.n_skipped_origins} origins skipped")
    print(f"Report saved to: {report_path}")
    return 0


def cmd_forecast(config: RunConfig) -> int:
    """Single-origin per-hour forecast CSV"""
    model = load_archive(config.get("paths.model")).model
    series = _load_data(config)
    horizon = int(config.get("forecast.horizon"))
    if horizon < 1:
        raise UsageError(f"Horizon must be positive, got {horizon}")
    trace = trace_series(model, series)
    origin_text = config.get("forecast.origin")
    if origin_text is None:
        feasible = np.flatnonzero(feasible_origins(model, series, horizon, trace))
        if feasible.size == 0:
            raise UsageError(f"No origin in the series has the history and temperatures "
                             f"for a {horizon} h forecast")
        origin = int(feasible[-1])
    else:
        origin = _timestamp_index(series, origin_text, 0, "--origin")

    outputs = forecast(model, series, origin, horizon, trace)
    labels = ["instant"] + [stage.kind.value for stage in model.stages]
    origin_stamp = series.timestamps()[origin]
    rows: List[dict] = []
    for lead, out in enumerate(outputs, start=1):
        row = {"timestamp": (origin_stamp + pd.Timedelta(hours=lead)).strftime("%Y-%m-%dT%H:%M:%S"),
               "lead": lead, "actual": np.nan if out.actual is None else out.actual}
        for label, value in zip(labels, out.forecasts):
            row[f"forecast_{label}"] = float(value)
        rows.append(row)
    frame = pd.DataFrame(rows)
    path = Path(config.get("paths.report"))
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)

    print_step(f"Forecast of {model.config.label} from {origin_stamp}", frame.set_index("timestamp"))
    print(f"Forecast saved to: {path}")
    return 0


def cmd_sweep(config: RunConfig) -> int:
    """Setup x size grid with CSV tables and a report in paths.out"""
    from research.framework import SweepFramework
    from research.reporting.reporter import SweepReporter
    from research.sweep_cells import setup_from_text

    series = _load_data(config)
    sweep_cfg = config.section("sweep")
    out = Path(config.get("paths.out"))
    setups = [setup_from_text(text) for text in sweep_cfg["setups"]]
    framework = SweepFramework(series, setups, list(sweep_cfg["sizes"]),
                               horizons=[int(h) for h in config.get("evaluate.horizons")],
                               model_config=config.model_config(boosters=()),
                               train_config=config.train_config(),
                               eval_hours=int(config.get("data.eval_hours")),
                               workers=int(sweep_cfg["workers"]),
                               archive_dir=str(out / "models") if sweep_cfg["save_models"] else None)
    results = framework.run_full_evaluation()
    analysis = framework.analyze_results(results)
    reporter = SweepReporter(output_dir=str(out.parent))
    report_dir = reporter.save_report(reporter.generate_report(results, analysis, experiment_id=out.name))

    print_step(f"Final-stage NRMSE (%) by training size, {analysis['first_horizon']} h horizon", analysis["sizes"])
    print_step(f"Final-stage NRMSE (%) by horizon, {analysis['largest_size']} of training data",
               analysis["horizons"])
    for cell in analysis["marked_cells"]:
        print(f"Marked: {cell}")
    print(f"Sweep saved to: {report_dir}")
    return 0


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "forecast": cmd_forecast,
    "sweep": cmd_sweep,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse, configure and dispatch; errors propagate"""
    args = build_parser().parse_args(argv)
    sections = COMMAND_SECTIONS[args.command]
    config = apply_overrides(load_config(args.config), args, sections)
    setup_logging(bool(config.get("logging.verbose")))
    log.debug("Configuration: %s", config.to_dict())
    return COMMANDS[args.command](config)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main function"""
    try:
        return run(argv)
    except SbnError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        print("Interrupted", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
