# sbn/__init__.py

"""
Stacked Booster Network Package
"""

# Model and execution
from .model import ModelConfig, SbnModel, StageOutputs, build_model, parse_boosters
from .pipeline import feasible_origins, forecast, rollout, trace_series

# Training and evaluation
from .trainer import TrainConfig, TrainMode, TrainResult, build_samples, train, train_staged
from .evaluator import EvalReport, evaluate_horizons, nrmse, rolling_evaluate, seasonal_naive

# Data
from .features import HourlySeries, Normalizer, StageKind
from .data_io import ingest_csv, load_series, write_csv
from .synthetic import SynthConfig, generate_synthetic
from .archive import load_model, save_model

from .errors import SbnError

__all__ = [
    'ModelConfig',
    'SbnModel',
    'StageOutputs',
    'build_model',
    'parse_boosters',
    'feasible_origins',
    'forecast',
    'rollout',
    'trace_series',
    'TrainConfig',
    'TrainMode',
    'TrainResult',
    'build_samples',
    'train',
    'train_staged',
    'EvalReport',
    'evaluate_horizons',
    'nrmse',
    'rolling_evaluate',
    'seasonal_naive',
    'HourlySeries',
    'Normalizer',
    'StageKind',
    'ingest_csv',
    'load_series',
    'write_csv',
    'SynthConfig',
    'generate_synthetic',
    'load_model',
    'save_model',
    'SbnError'
]
