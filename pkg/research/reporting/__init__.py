from .reporter import SweepReporter, SweepReport
