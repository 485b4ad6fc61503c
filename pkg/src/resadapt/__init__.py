"""Resolution-adaptive all-digital massive MIMO uplink: low-resolution ADCs,
finite-alphabet L-MMSE equalization, power models and Pareto analysis."""

from .config import RunConfig, SearchSettings, SweepGrid, SystemConfig, load_config
from .errors import (
    ConfigError,
    DegenerateChannelError,
    DegenerateEqualizerError,
    InfeasibleError,
    ModelUndefinedError,
    NumericalError,
    ResAdaptError,
)

__version__ = "0.1.0"
