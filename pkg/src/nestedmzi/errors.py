"""Exception hierarchy shared by all nestedmzi modules."""


class NestedMZIError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(NestedMZIError):
    """An interferometer graph or parameter set violates its invariants."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class DomainError(NestedMZIError, ValueError):
    """An argument lies outside the domain of an operation."""


class DegenerateError(NestedMZIError):
    """A quantity needed for normalization is zero (visibility, band integral)."""


class UnreachableTargetError(NestedMZIError):
    """Calibration target cannot be reached within the search bracket."""


class IllConditionedWeakValue(NestedMZIError):
    """The pre/post-selection overlap vanishes, so weak values are undefined."""


class ScenarioError(NestedMZIError):
    """Scenario text could not be parsed; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        self.message = message
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
