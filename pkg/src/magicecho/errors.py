"""Error types shared across the package."""


class ConvergenceError(RuntimeError):
    """An iterative refinement failed to reach its tolerance."""


class InvariantViolation(RuntimeError):
    """A conserved quantity drifted beyond its tolerance during evolution."""
