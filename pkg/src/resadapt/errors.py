"""Exception hierarchy shared by all modules."""


class ResAdaptError(Exception):
    """Base class for all library errors."""


class ConfigError(ResAdaptError, ValueError):
    """Invalid or inconsistent configuration."""


class DegenerateChannelError(ResAdaptError):
    """Channel has a zero-norm column or is otherwise unusable."""


class DegenerateEqualizerError(ResAdaptError):
    """Equalizer row is all-zero or its unbiasing product vanishes."""

    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = tuple(tuple(r) if isinstance(r, (list, tuple)) else r for r in rows)


class NumericalError(ResAdaptError):
    """Linear solve failed (singular regularized Gram matrix)."""


class ModelUndefinedError(ResAdaptError):
    """Power model evaluated at infinite resolution."""


class InfeasibleError(ResAdaptError):
    """Target BER or loss budget cannot be met."""

    def __init__(self, message, floor_ber=None):
        super().__init__(message)
        self.floor_ber = floor_ber
