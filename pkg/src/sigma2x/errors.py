"""Exception types shared across the package."""


class UnknownNameError(KeyError):
    """Raised for an unrecognised constant, closed form, catalog id or step id."""

    def __init__(self, kind, name):
        self.kind = kind
        self.name = name
        super().__init__(f"unknown {kind}: {name!r}")

    def __str__(self):
        return self.args[0]


class IntegrandEvaluationError(ArithmeticError):
    """An integrand returned a non-finite value at an evaluation node.

    ``point`` holds the offending abscissa (a float in 1D, a tuple of
    coordinates for cubature).
    """

    def __init__(self, point, value, message=None):
        self.point = point
        self.value = value
        super().__init__(message or f"non-finite integrand value {value!r} at {point!r}")


class DomainError(ValueError):
    """Argument outside the open domain of an integrand or kernel."""


class StepError(RuntimeError):
    """Failure while executing a verification step; carries the step id."""

    def __init__(self, step_id, cause):
        self.step_id = step_id
        self.cause = cause
        super().__init__(f"step {step_id}: {cause}")
