"""Shared exception types."""


class ConfigurationError(ValueError):
    """Invalid configuration: bad dimensions, parameter ranges, or config files.

    ``violations`` carries every detected problem, not just the first.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class InfeasibleError(RuntimeError):
    """A linear program (or budget-feasibility question) has no feasible point."""
