"""Exception types raised by the library."""


class ReplicaPortfolioError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(ReplicaPortfolioError, ValueError):
    """Invalid distribution, model or configuration parameter."""


class DomainError(ReplicaPortfolioError, ValueError):
    """Input lies outside the mathematical domain of an operation (e.g. v <= 0)."""


class DivergenceError(ReplicaPortfolioError, ValueError):
    """Period ratio alpha <= 1: there is no typical minimum for p <= N."""


class InfeasibleError(ReplicaPortfolioError, ValueError):
    """The requested constraint set has no solution."""


class CollinearConstraintError(InfeasibleError):
    """Budget and return constraints are collinear (all r_i equal)."""


class SingularMatrixError(ReplicaPortfolioError, ArithmeticError):
    """J is not positive definite or is too ill-conditioned to factorize."""


class UndefinedSharpeError(ReplicaPortfolioError, ArithmeticError):
    """The maximal-Sharpe portfolio normalisation is undefined (R1 = 0 or r'J^-1e = 0)."""
