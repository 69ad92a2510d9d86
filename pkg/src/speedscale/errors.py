"""Exception hierarchy shared across the package."""


class SpeedScaleError(Exception):
    """Base class for every error raised by speedscale."""


class InvalidParameterError(SpeedScaleError, ValueError):
    pass


class PowerDomainError(SpeedScaleError, ValueError):
    """A speed (or power value) outside the power function's domain."""


class ClairvoyanceError(SpeedScaleError):
    """A policy needs remaining work that is hidden from it."""


class ConfigurationError(SpeedScaleError, ValueError):
    """Inconsistent combination of components, or a bad scenario config.

    ``path`` locates the offending field inside a config document when the
    error comes from the scenario loader.
    """

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class TimeDomainError(SpeedScaleError, ValueError):
    """A query time outside the span of a trace."""


class StallError(SpeedScaleError):
    """The simulation cannot make progress and would never terminate."""


class DivergenceError(SpeedScaleError):
    """Event budget exhausted."""


class InfeasibleScheduleError(SpeedScaleError):
    """An explicit schedule violates release times or job sizes."""


class InputMismatchError(SpeedScaleError, ValueError):
    """Two traces do not describe the same job universe."""


class SizeLimitError(SpeedScaleError, ValueError):
    pass
