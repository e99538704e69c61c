"""Mass-conserving piston-ring lubrication with combustion-chamber backpressure."""

__version__ = "0.1.0"
