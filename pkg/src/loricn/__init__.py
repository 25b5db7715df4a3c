"""Discrete-event simulator for ICN traffic over a LoRa DSME link layer."""

from .errors import (
    ConfigError,
    EncodeError,
    QueueModelError,
    ScheduleInfeasibleError,
    SimClockError,
)

__all__ = [
    "ConfigError",
    "EncodeError",
    "QueueModelError",
    "ScheduleInfeasibleError",
    "SimClockError",
]

__version__ = "0.1.0"
