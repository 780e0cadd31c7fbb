"""Exception hierarchy shared by all modules."""


class FanovaError(Exception):
    """Base class for every error raised by rmfanova."""


class InvalidConfigurationError(FanovaError, ValueError):
    """A parameter combination that can never be valid."""


class DomainError(FanovaError, ValueError):
    """Evaluation point outside the basis domain."""


class SingularFitError(FanovaError, ArithmeticError):
    """The basis evaluation matrix on a grid is rank deficient."""


class InvalidDatasetError(FanovaError, ValueError):
    """A repeated-measures layout that violates the balance/shape rules."""


class InvalidHypothesisError(FanovaError, ValueError):
    """A hypothesis that cannot be tested for the given layout."""


class SingularErrorMatrixError(FanovaError, ArithmeticError):
    """The error SSCP matrix is singular (too few subjects for the dimension)."""


class DimensionError(SingularErrorMatrixError):
    """The sample-size condition of DMM or MMM is violated."""


class NotEstimableError(FanovaError, ArithmeticError):
    """Not enough residual degrees of freedom to estimate a covariance."""


class ParseError(InvalidDatasetError):
    """Malformed delimited input; the message carries the line number."""


class BalanceError(InvalidDatasetError):
    """Some subject is not observed under every treatment."""
