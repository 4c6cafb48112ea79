"""Exception types raised by sparseperm."""


class SparsePermError(Exception):
    """Base class for all package errors."""


class DimensionError(SparsePermError, ValueError):
    """Array shapes or sizes are inconsistent or out of range."""


class InfeasibleSparsityError(SparsePermError, ValueError):
    """A permutation with exactly one non-fixed point was requested."""


class ParameterError(SparsePermError, ValueError):
    """A scalar parameter (sigma, lambda, ...) is outside its valid range."""


class SingularDesignError(SparsePermError, ValueError):
    """The design matrix does not have full column rank."""


class InsufficientDataError(SparsePermError, ValueError):
    """Too few observations remain for the requested fit."""


class BudgetError(SparsePermError, ValueError):
    """An exhaustive search would exceed its candidate budget."""


class InfeasibleError(SparsePermError, ValueError):
    """Preconditions of a theoretical bound are violated."""
