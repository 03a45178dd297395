# research/__init__.py

"""
Research harness for stacked booster network sweeps
"""

from .framework import SweepFramework, sweep
from .reporting.reporter import SweepReporter

__all__ = [
    'SweepFramework',
    'SweepReporter',
    'sweep'
]
