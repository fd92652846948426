"""Exception types shared across the package."""


class UnsupportedCaseError(ValueError):
    """Requested (degree, continuity, level, ...) combination is not cataloged."""


class GeometryError(RuntimeError):
    """Geometry map is singular or otherwise unusable."""


class SplittingError(RuntimeError):
    """Hierarchical splitting failed (rank deficiency, dimension mismatch)."""


class FactorizationError(RuntimeError):
    """Matrix factorization broke down (zero pivot, singular matrix)."""


class ConfigurationError(ValueError):
    """Invalid solver or cycle configuration."""
