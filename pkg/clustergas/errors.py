"""Defines the exceptions raised across the package."""

__all__ = [
    "ClusterGasError",
    "CorruptState",
    "PackingFailure",
    "EventStorm",
    "SizeLimit",
    "DegreeMismatch",
    "TimeOrderViolation",
    "MajorantBreach",
    "OverflowGuard",
    "ConfigError",
    "InvariantViolation",
]


class ClusterGasError(Exception):
    """Base class for all package errors."""


class CorruptState(ClusterGasError, RuntimeError):
    """Two hard spheres are closer than the diameter."""


class PackingFailure(ClusterGasError, RuntimeError):
    """Sequential insertion could not place a particle within the retry cap."""


class EventStorm(ClusterGasError, RuntimeError):
    """A run produced more events than the configured budget."""


class SizeLimit(ClusterGasError, ValueError):
    """An exact combinatorial routine was asked for a size beyond its bound."""


class DegreeMismatch(ClusterGasError, ValueError):
    """A degree sequence violates the handshake condition."""


class TimeOrderViolation(ClusterGasError, ValueError):
    """A cluster merge was requested before one of its input collisions."""


class MajorantBreach(ClusterGasError, RuntimeError):
    """A relative speed exceeded the running collision majorant."""

    def __init__(self, speed: float, majorant: float) -> None:
        super().__init__(f"Relative speed {speed:.6g} exceeds majorant {majorant:.6g}")
        self.speed = speed
        self.majorant = majorant


class OverflowGuard(ClusterGasError, OverflowError):
    """An exponent exceeded the safe range; shrink `u`."""


class ConfigError(ClusterGasError, ValueError):
    """A configuration value is invalid; carries the dotted key path."""

    def __init__(self, key: str, message: str) -> None:
        super().__init__(f"`{key}`: {message}")
        self.key = key


class InvariantViolation(ClusterGasError, AssertionError):
    """A physical or combinatorial invariant failed on a run."""
