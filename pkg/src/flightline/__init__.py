"""flightline: multi-team fixed-wing flight environments for learning agents."""

__version__ = "0.1.0"
