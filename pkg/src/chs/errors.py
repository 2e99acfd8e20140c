"""Exception types shared across the solver."""


class GridMismatchError(ValueError):
    """Two fields (or a field and an operator) live on different grids."""


class DomainError(ValueError):
    """A potential was evaluated outside its effective domain."""

    def __init__(self, message, value=None):
        super().__init__(message)
        self.value = value


class SolverFailure(RuntimeError):
    """An iterative linear solve did not reach the requested residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class StepFailure(RuntimeError):
    """Newton iteration diverged for one backward-Euler step."""

    def __init__(self, message, residual=None, trajectory=None):
        super().__init__(message)
        self.residual = residual
        # Partial trajectory for diagnosis when raised from integrate().
        self.trajectory = trajectory


class ComparisonError(ValueError):
    """Two trajectories are not comparable (grid / dt / T / data mismatch)."""


class FitError(ValueError):
    """Rate fit is impossible (too few or degenerate points)."""


class ConfigError(ValueError):
    """Invalid study configuration; carries the full list of violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
