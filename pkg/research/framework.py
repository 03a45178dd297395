# research/framework.py
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from sbn.archive import save_model
from sbn.errors import SbnError
from sbn.evaluator import DEFAULT_HORIZONS, evaluate_horizons
from sbn.features import HourlySeries, Normalizer
from sbn.model import ModelConfig, build_model
from sbn.trainer import TrainConfig, build_samples, train
from research.sweep_cells import (HOURS_PER_YEAR, STANDARD_SETUPS, BoosterSetup, SweepCell,
                                  build_cells)

log = logging.getLogger(__name__)


def _run_cell(job: Tuple["SweepFramework", SweepCell]) -> Dict[str, Any]:
    framework, cell = job
    return framework.run_experiment(cell)


class SweepFramework:
    """Train-and-evaluate grid over booster setups, training sizes and horizons"""

    def __init__(self, series: HourlySeries, setups: Optional[List[BoosterSetup]] = None,
                 sizes: Optional[List[str]] = None, horizons: Sequence[int] = DEFAULT_HORIZONS,
                 model_config: Optional[ModelConfig] = None, train_config: Optional[TrainConfig] = None,
                 eval_hours: int = HOURS_PER_YEAR, workers: int = 1, archive_dir: Optional[str] = None):
        """
        Initialize the sweep

        Args:
            series (HourlySeries): data covering every training size plus the evaluation year
            setups (List[BoosterSetup], optional): table rows, default the five standard stacks
            sizes (List[str], optional): training sizes, default 6mo, 1y, 6y
            horizons (Sequence[int]): evaluation horizons in hours
            model_config (ModelConfig, optional): hidden units, dropout and input overrides
                shared by every setup (its booster list is ignored)
            train_config (TrainConfig, optional): training settings and seed of every cell
            eval_hours (int): the evaluation range is the last eval_hours hours
            workers (int): cells run in parallel processes when above 1
            archive_dir (str, optional): save every cell's model there
        """
        self.series = series
        self.setups = setups if setups is not None else list(STANDARD_SETUPS)
        self.sizes = sizes if sizes is not None else ["6mo", "1y", "6y"]
        self.horizons = list(horizons)
        self.model_config = model_config if model_config is not None else ModelConfig()
        self.train_config = train_config if train_config is not None else TrainConfig()
        self.eval_hours = int(eval_hours)
        self.workers = max(1, int(workers))
        self.archive_dir = Path(archive_dir) if archive_dir else None

    def set_setups(self, setups: List[BoosterSetup]) -> None:
        self.setups = setups

    def set_sizes(self, sizes: List[str]) -> None:
        self.sizes = sizes

    def set_horizons(self, horizons: Sequence[int]) -> None:
        self.horizons = list(horizons)

    @property
    def eval_range(self) -> Tuple[int, int]:
        n = len(self.series)
        return max(0, n - self.eval_hours), n - 1

    def cells(self) -> List[SweepCell]:
        return build_cells(self.setups, self.sizes)

    def _setup_config(self, setup: BoosterSetup) -> ModelConfig:
        base = self.model_config
        n_inputs = {k: v for k, v in base.n_inputs.items() if k in setup.boosters}
        return ModelConfig(setup.boosters, base.hidden_units, base.dropout_rate, n_inputs)

    def run_experiment(self, cell: SweepCell) -> Dict[str, Any]:
        """Train a fresh model for one cell and evaluate it; failures are recorded, not raised"""
        start_time = time.time()
        eval_first, eval_last = self.eval_range
        train_first = eval_first - cell.train_hours
        row: Dict[str, Any] = {"setup": cell.setup.name, "size": cell.size_name,
                               "train_hours": cell.train_hours, "status": "ok", "error": ""}
        try:
            if train_first < 0:
                raise SbnError(f"needs {cell.train_hours} training hours before the evaluation range, "
                               f"only {eval_first} available")
            config = self._setup_config(cell.setup)
            norm = Normalizer.fit(self.series, train_first, eval_first - 1)
            samples = build_samples(self.series, config, train_first, eval_first - 1, norm)
            model = build_model(config, seed=self.train_config.seed, normalizer=norm)
            result = train(model, samples, self.train_config)
            reports = evaluate_horizons(model, self.series, (eval_first, eval_last), self.horizons,
                                        train_range=(train_first, eval_first - 1))
            row.update({"parameters": model.parameter_count, "samples": len(samples),
                        "final_train_loss": float(result.history["loss"].iloc[-1]) if len(result.history) else np.nan})
            for report in reports:
                row[f"nrmse_{report.horizon}h"] = 100.0 * report.final_nrmse
                row[f"baseline_{report.horizon}h"] = 100.0 * report.baseline_nrmse
                for label, value in report.nrmse_percent().items():
                    row[f"nrmse_{report.horizon}h_{label}"] = value
            if self.archive_dir is not None:
                save_model(model, self.archive_dir / f"{cell.key}.json", self.train_config.to_dict(),
                           {"setup": cell.setup.name, "size": cell.size_name})
        except SbnError as e:
            print(f"Error in cell {cell.key}: {e}")
            row.update({"status": "infeasible" if train_first < 0 else "failed", "error": str(e)})
        print(f"  {cell.key}: {row['status']} in {time.time() - start_time:.1f}s")
        return row

    def run_full_evaluation(self) -> List[Dict[str, Any]]:
        """Run every cell in order; the result list order does not depend on the worker count"""
        cells = self.cells()
        print(f"Running {len(cells)} sweep cells (eval range {self.eval_range}, horizons {self.horizons})")
        if self.workers > 1:
            with ProcessPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(_run_cell, [(self, cell) for cell in cells]))
        else:
            results = []
            for cell in cells:
                print(f"\nEvaluating: {cell.setup.description}, {cell.size_name} of training data")
                results.append(self.run_experiment(cell))
        failed = sum(1 for r in results if r["status"] != "ok")
        print(f"\nSweep completed: {len(results)} cells, {failed} marked")
        return results

    def analyze_results(self, results: List[Dict[str, Any]]) -> Dict[str, Any]:
        """
        Shape results into tables of final-stage NRMSE (%)

        Returns:
            Dict[str, Any]: "sizes" (setup x size at the first horizon),
            "horizons" (setup x horizon at the largest size), "baseline"
            and "best_setup" per size
        """
        frame = pd.DataFrame(results)
        setups = [s.name for s in self.setups]
        first_h = self.horizons[0]
        largest = self.sizes[-1]

        def cell_value(setup: str, size: str, column: str) -> float:
            if frame.empty or column not in frame.columns:
                return float("nan")
            match = frame[(frame["setup"] == setup) & (frame["size"] == size)]
            return float(match[column].iloc[0]) if len(match) else float("nan")

        sizes = pd.DataFrame({size: [cell_value(s, size, f"nrmse_{first_h}h") for s in setups]
                              for size in self.sizes}, index=setups)
        horizons = pd.DataFrame({f"{h}h": [cell_value(s, largest, f"nrmse_{h}h") for s in setups]
                                 for h in self.horizons}, index=setups)
        baseline = {size: next((v for v in (cell_value(s, size, f"baseline_{first_h}h") for s in setups)
                                if np.isfinite(v)), float("nan")) for size in self.sizes}
        best = {}
        for size in self.sizes:
            column = sizes[size].dropna()
            best[size] = column.idxmin() if len(column) else None
        sizes.index.name = horizons.index.name = "setup"
        return {"sizes": sizes, "horizons": horizons, "baseline": baseline, "best_setup": best,
                "first_horizon": first_h, "largest_size": largest,
                "marked_cells": [f"{r['setup']}_{r['size']}: {r['error']}" for r in results if r["status"] != "ok"]}


def sweep(series: HourlySeries, setups: Optional[List[BoosterSetup]] = None, sizes: Optional[List[str]] = None,
          horizons: Sequence[int] = DEFAULT_HORIZONS, train_config: Optional[TrainConfig] = None,
          **kwargs) -> pd.DataFrame:
    """One row per (setup, size) cell with per-horizon NRMSE; infeasible cells are marked"""
    framework = SweepFramework(series, setups, sizes, horizons, train_config=train_config, **kwargs)
    return pd.DataFrame(framework.run_full_evaluation())
