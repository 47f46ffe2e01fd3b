"""Exception hierarchy shared by the solvers and the CLI."""


class EmsphereError(Exception):
    pass


class ConfigurationError(EmsphereError, ValueError):
    """Bad grid size, unparsable sigma descriptor or invalid option."""


class DomainError(EmsphereError, ValueError):
    """An input lies outside the mathematical domain (e.g. Kahler positivity)."""


class NumericalError(EmsphereError, RuntimeError):
    pass


class NoSolutionObstruction(EmsphereError):
    def __init__(self, value, message=None):
        self.value = float(value)
        super().__init__(message or f"obstruction integral is {self.value:.6g}, no Einstein-Mabuchi metric")


class DegenerateSolution(EmsphereError):
    pass


class CalibrationError(EmsphereError):
    pass


class ContinuityStalled(EmsphereError):
    """Continuity step fell below the step floor before reaching t = 1."""

    def __init__(self, trace, t_last, osc, obstruction):
        self.trace = trace
        self.t_last = float(t_last)
        self.osc = float(osc)
        self.obstruction = float(obstruction)
        super().__init__(
            f"continuity stalled at t={self.t_last:.6g} (osc={self.osc:.4g}, obstruction={self.obstruction:.6g})"
        )


class FlowBreakdown(EmsphereError):
    def __init__(self, s, message=None):
        self.s = float(s)
        super().__init__(message or f"Kahler positivity lost along the heat flow at s={self.s:.6g}")


class FlowStepError(EmsphereError):
    pass


class DiagnosticError(EmsphereError):
    pass
