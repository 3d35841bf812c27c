"""Exception hierarchy shared by all modules."""


class JdsnError(Exception):
    """Base class for package errors."""


class ParameterDomainError(JdsnError, ValueError):
    """A parameter lies outside the admissible set of its family or domain."""


class BoundaryEvaluationError(JdsnError, ValueError):
    """A derivative was requested where the jump density vanishes."""


class ModelError(JdsnError, ArithmeticError):
    """A coefficient function produced a non-finite or forbidden value."""


class SimulationDivergedError(JdsnError, ArithmeticError):
    """The simulated path left the region |X| <= 1e12."""


class QuadratureError(JdsnError, ArithmeticError):
    """Numerical integration failed or met a non-finite integrand."""


class SingularInformationError(JdsnError, ArithmeticError):
    """The asymptotic information matrix is not positive definite."""


class ConfigError(JdsnError, ValueError):
    """Invalid configuration or precondition."""


class StudyError(JdsnError, RuntimeError):
    """A Monte Carlo study had too many failed replications."""
