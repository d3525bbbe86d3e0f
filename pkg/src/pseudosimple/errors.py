"""Exception hierarchy shared by all modules."""


class PseudoSimpleError(Exception):
    """Base class for domain errors raised by this package."""


class InvalidElementError(PseudoSimpleError, ValueError):
    pass


class GroupGrowthError(PseudoSimpleError):
    pass


class DomainError(PseudoSimpleError, ValueError):
    pass


class NoEquilibriumError(PseudoSimpleError):
    pass


class InvarianceViolationError(PseudoSimpleError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class DegenerateAngleError(PseudoSimpleError, ValueError):
    pass


class IntegrationError(PseudoSimpleError):
    def __init__(self, message: str, t: float | None = None, state=None):
        super().__init__(message if t is None else f"{message} at t={t:.6g}")
        self.t = t
        self.state = state


class NoConnectionError(PseudoSimpleError):
    pass


class ConfigError(PseudoSimpleError):
    pass
