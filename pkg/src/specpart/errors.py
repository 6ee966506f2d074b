"""Exception hierarchy shared across the package."""


class SpecpartError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(SpecpartError):
    """Matrix dimensions of two fields or symbols are incompatible."""


class DepthError(SpecpartError):
    """Requested truncation depth exceeds what a symbol stores."""


class BandOverflowError(SpecpartError):
    """Coefficient mass outside the configured Fourier bands exceeds tolerance."""


class EllipticityError(SpecpartError):
    """Principal symbol is singular somewhere on the sample grid."""


class SimplicityError(SpecpartError):
    """Eigenvalue gap of the principal symbol fell below the configured floor."""


class HypothesisError(SpecpartError):
    """A lemma/theorem hypothesis checked numerically does not hold."""


class ModelParameterError(SpecpartError):
    """Unknown model name or parameter outside its validated range."""


class CacheMissError(SpecpartError):
    """No cache entry for the requested key (distinct from corruption)."""


class CacheCorruptError(SpecpartError):
    """Cache entry exists but fails digest/format verification."""


class ConfigError(SpecpartError):
    """Run configuration failed to parse or validate (CLI exit status 2)."""


class ComputationError(SpecpartError):
    """A pipeline stage failed to compute (CLI exit status 3)."""
