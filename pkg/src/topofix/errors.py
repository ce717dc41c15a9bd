"""Exception hierarchy shared by every module."""


class TopofixError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(TopofixError, ValueError):
    """Bad argument: out-of-range node id, size mismatch, malformed file."""


class ParameterError(TopofixError, ValueError):
    """Invalid FatTree parameter (odd or too-small k)."""


class AssignmentError(TopofixError, ValueError):
    """A role assignment violates the canonical role multiset."""


class InputError(TopofixError, ValueError):
    """A physical graph whose size matches no FatTree."""


class InjectionError(TopofixError, ValueError):
    """A malfunction request that cannot be realized on the given graph."""


class PlanStaleError(TopofixError):
    """A fixation action does not match the current state of the graph."""


class BudgetError(TopofixError):
    """An exhaustive search exceeded its node budget or size cap."""
