"""Spectral partition toolkit for elliptic systems on the flat 2-torus.

The package realizes matrix-valued classical symbols on T^2 x (R^2 \\ 0),
constructs the commuting order-zero projections attached to the eigenvalue
branches of an elliptic self-adjoint principal symbol, quantizes everything
on the truncated Fourier lattice, and verifies the resulting spectral
partition, Weyl asymptotics and propagator commutation numerically.
"""

from .errors import (
    SpecpartError,
    DimensionMismatchError,
    DepthError,
    BandOverflowError,
    EllipticityError,
    SimplicityError,
    HypothesisError,
    ModelParameterError,
    CacheMissError,
    CacheCorruptError,
    ConfigError,
    ComputationError,
)

__version__ = "0.1.0"

__all__ = [
    "SpecpartError",
    "DimensionMismatchError",
    "DepthError",
    "BandOverflowError",
    "EllipticityError",
    "SimplicityError",
    "HypothesisError",
    "ModelParameterError",
    "CacheMissError",
    "CacheCorruptError",
    "ConfigError",
    "ComputationError",
    "__version__",
]
