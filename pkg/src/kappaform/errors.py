"""Exception types raised across the package."""


class SphericalIndexError(ValueError):
    """An (l, m) pair or harmonic kind outside its admissible range."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested operation."""


class GridMismatchError(ValueError):
    """Two sampled objects live on incompatible grids."""


class TransversalityError(ValueError):
    """A field expected to be divergence-free is not."""
