# sbn/utils.py

import json
import logging
import sys
from typing import Any

import numpy as np
import pandas as pd

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(verbose: bool = False) -> None:
    """
    Configure the root logger once for command-line runs

    Args:
        verbose (bool): DEBUG instead of INFO level
    """
    root = logging.getLogger()
    level = logging.DEBUG if verbose else logging.INFO
    if not root.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)
    root.setLevel(level)


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def print_step(step_name: str, data: Any, is_json: bool = True) -> None:
    """
    Print a titled section with separators

    Args:
        step_name (str): section title
        data (any): dicts are printed as JSON, DataFrames as aligned tables
        is_json (bool): format dicts as JSON
    """
    separator = "=" * 80
    print(f"\n{separator}")
    print(f"  {step_name}")
    print(f"{separator}\n")
    if is_json and isinstance(data, dict):
        print(json.dumps(data, indent=2, default=_jsonable))
    elif isinstance(data, pd.DataFrame):
        print(data.to_string(float_format=lambda v: f"{v:.2f}"))
    else:
        print(data)
    print()
