"""Exception types shared across the package."""


class BeamUQError(Exception):
    """Base class for all package-specific errors."""


class DomainError(BeamUQError):
    """A point lies outside the random parameter domain."""


class ConfigurationError(BeamUQError):
    """Invalid configuration: unknown model key, bad parameter, inconsistent study."""


class PhaseSingularityError(BeamUQError):
    """Initial phase evaluated on (or too close to) its singular set."""


class DegenerateSlownessError(BeamUQError):
    """Slowness vector collapsed below the degeneracy threshold."""


class IntegrationFailureError(BeamUQError):
    """Beam integration left the admissible state manifold (Im M lost positivity)."""


class IndexSetStructureError(BeamUQError):
    """Multi-index set is not downward closed."""


class DataError(BeamUQError):
    """Invalid numerical data passed to a statistics routine."""
