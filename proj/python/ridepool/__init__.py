"""Online peer-to-peer ridesharing with request forecasts."""

from ._ridepool import (
    ConfigError,
    FormatError,
    RidepoolError,
    Stream,
    improvement,
    quality_of_service,
    repeat_day,
    simulate,
    smape,
    synth,
)

__all__ = [
    "ConfigError",
    "FormatError",
    "RidepoolError",
    "Stream",
    "improvement",
    "quality_of_service",
    "repeat_day",
    "simulate",
    "smape",
    "synth",
]
