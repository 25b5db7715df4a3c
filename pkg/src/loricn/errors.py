"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """A configuration value violates its documented range or invariant."""


class SimClockError(RuntimeError):
    """An event was scheduled before the current simulated time."""


class ScheduleInfeasibleError(RuntimeError):
    """The requested static CFP schedule does not fit the slot structure.

    The message names the limiting resource so experiment sweeps can record
    the cell as not-operable instead of crashing.
    """


class EncodeError(ValueError):
    """A message cannot be packed into a single link-layer frame."""


class QueueModelError(RuntimeError):
    """The analytic queue model could not produce a trustworthy result."""
