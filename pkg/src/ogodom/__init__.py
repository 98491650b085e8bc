"""Odometer-gyroscope dead reckoning, calibration, evaluation and simulation."""

__version__ = "0.1.0"
