"""Blind user activity detection, channel estimation and signal detection
for grant-free mmWave massive MIMO uplinks via unitary AMP matrix
factorization."""

from .kernels import BACKEND
from .errors import (ConfigError, ContractError, DecompositionError, DivergenceError,
                     MajorityDivergenceError)

__version__ = "0.1.0"

__all__ = ["BACKEND", "ConfigError", "ContractError", "DecompositionError",
           "DivergenceError", "MajorityDivergenceError", "__version__"]
