# sbn/errors.py

"""
Exception hierarchy for the stacked booster forecaster.

Every error carries the exit code the command-line entry point returns
for it: 1 usage, 2 data, 3 numeric failure.
"""

from typing import Optional


class SbnError(Exception):
    """Base class for all forecaster errors"""
    exit_code = 1


class UsageError(SbnError):
    """Invalid arguments or out-of-range values supplied by the caller"""
    exit_code = 1


class ConfigurationError(SbnError):
    """Dimension, shape or configuration mismatch"""
    exit_code = 1


class DataError(SbnError):
    """Unreadable, malformed or insufficient input data"""
    exit_code = 2


class InsufficientHistoryError(DataError):
    """Not enough valid history before a forecast origin or training target"""

    def __init__(self, message: str, earliest_origin: Optional[int] = None,
                 earliest_target: Optional[int] = None):
        super().__init__(message)
        self.earliest_origin = earliest_origin
        self.earliest_target = earliest_target


class ArchiveError(DataError):
    """Model archive cannot be loaded; `field` names the offending entry"""

    def __init__(self, message: str, field: str = ""):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class ChecksumError(ArchiveError):
    """Archive is truncated or its CRC does not match the payload"""


class NumericError(SbnError):
    """Non-finite values where finite ones are required"""
    exit_code = 3


class TrainingDivergedError(NumericError):
    """Loss became non-finite during training"""

    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"Training diverged at epoch {epoch}, batch {batch} (loss={loss})")
        self.epoch = epoch
        self.batch = batch
        self.loss = loss


class MetricError(NumericError):
    """Metric is undefined for the given inputs (e.g. constant actuals)"""


class SkipSample(Exception):
    """
    Signal that an hour cannot be used (insufficient or invalid history).

    Not an error: callers count skipped hours and move on.
    """

    def __init__(self, hour: int, reason: str = ""):
        super().__init__(f"hour {hour}: {reason}" if reason else f"hour {hour}")
        self.hour = hour
        self.reason = reason
