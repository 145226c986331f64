"""Exception types, mapped to CLI exit codes (usage=1, numeric=2, budget=3)."""


class PolycascError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(PolycascError):
    """Invalid configuration, arguments, or operation preconditions."""

    exit_code = 1


class ParameterError(UsageError):
    """Invalid model or study parameters (degenerate distribution, bad grid...)."""


class DomainError(UsageError):
    """Lattice query outside the reachable space-time cone or horizon."""


class NumericError(PolycascError):
    """Non-finite or impossible value in a numeric kernel."""

    exit_code = 2


class BudgetError(PolycascError):
    """Exact enumeration refused because it exceeds the configured budget."""

    exit_code = 3
