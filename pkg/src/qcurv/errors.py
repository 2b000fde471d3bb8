"""Exception hierarchy. Every error names the module it came from."""


class QCurvError(Exception):
    """Base class for all library errors."""

    module = "qcurv"

    def __str__(self) -> str:
        return f"[{self.module}] {super().__str__()}"


class DomainError(QCurvError, ValueError):
    module = "radial_core"


class StencilError(DomainError):
    """Sampled-profile request too close to the grid edge."""


class ConvergenceError(QCurvError, RuntimeError):
    module = "quadrature"


class IllConditionedFit(QCurvError, ValueError):
    module = "radial_core"


class HypothesisViolation(QCurvError, ValueError):
    """Growth modes e^{-2t} / e^{2t} are present, so the limits are not the deficit."""

    module = "cgb_checker"

    def __init__(self, message: str, c2: float = 0.0, c3: float = 0.0):
        super().__init__(message)
        self.c2 = c2
        self.c3 = c3


class OnSphereError(QCurvError, ValueError):
    module = "normal_metric"


class ScenarioError(QCurvError, ValueError):
    module = "cli_io"
