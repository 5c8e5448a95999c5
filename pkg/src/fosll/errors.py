"""Exception types shared across the package."""


class DegenerateElementError(ValueError):
    """Triangle with (numerically) zero area."""


class UnsupportedDegreeError(ValueError):
    """Quadrature degree outside the implemented range."""


class InconsistentExactSolutionError(ValueError):
    """Supplied sigma closure disagrees with -A*grad(u)."""


class SingularSystemError(RuntimeError):
    """The constrained linear system has a nontrivial null space."""


class ConfigError(ValueError):
    """Invalid run configuration."""


class SolverFailureError(RuntimeError):
    """Iterative solver failed to reach the requested tolerance."""
