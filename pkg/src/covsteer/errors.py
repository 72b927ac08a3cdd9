"""Exception hierarchy shared by every covsteer module."""


class CovsteerError(Exception):
    """Base class for all errors raised by covsteer."""


class PositiveDefiniteViolation(CovsteerError):
    pass


class SingularLyapunov(CovsteerError):
    pass


class Indeterminate(CovsteerError):
    """Numerical probes disagree and no decision can be made."""


class NonFiniteState(CovsteerError):
    """An ODE integration produced inf/nan entries."""


class RiccatiEscape(NonFiniteState):
    """A Riccati flow escaped to infinity inside the integration window."""


class SchemaError(CovsteerError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class DimensionMismatch(CovsteerError):
    pass


class NotControllable(CovsteerError):
    pass


class Infeasible(CovsteerError):
    pass


class NoConvergence(CovsteerError):
    pass


class RankDeficientB(CovsteerError):
    pass


class NotAdmissible(CovsteerError):
    pass


class NotHurwitz(CovsteerError):
    pass


class NotSolved(CovsteerError):
    pass
