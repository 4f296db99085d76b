"""Exception types shared across the package.

Plain ``ValueError`` is used for invalid arguments and violated
preconditions; the classes here mark failure modes a caller may want to
handle specifically (retry with more modes, widen a bracket, ...).
"""


class NumericFailure(RuntimeError):
    """A numerical procedure failed to converge or produced garbage."""


class BracketError(ValueError):
    """A root/threshold search bracket does not straddle a sign change."""


class DegenerateTrace(ValueError):
    """A trace contains no usable rows (all norms at the floating floor)."""


class RequestMoreModes(ValueError):
    """An operation ran out of stored eigenpairs; recompute with larger n_max."""


class InfeasibleTruncation(ValueError):
    """The truncation condition fails even as the period tends to zero."""
