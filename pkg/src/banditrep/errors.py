"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """A configuration value violates its declared constraint."""


class DomainError(ValueError):
    """An input falls outside the domain an operation is defined on."""


class SingularMatrixError(ValueError):
    """A linear solve hit a rank-deficient system (only possible at lambda=0)."""


class NotDifferentiableError(TypeError):
    """The policy kind has no probability gradient (threshold rules)."""


class OracleUnavailableError(LookupError):
    """No reference value is configured for this environment/policy pair."""
