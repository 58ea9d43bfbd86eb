"""Exception hierarchy.

Every numerical failure derives from :class:`NumericalError` so the CLI can
map it to a single exit code; configuration problems derive from
:class:`ConfigError`.
"""


class GrazesimError(Exception):
    pass


class ConfigError(GrazesimError, ValueError):
    pass


class NumericalError(GrazesimError, ArithmeticError):
    pass


class SingularMatrix(NumericalError):
    pass


class NotPSD(NumericalError):
    pass


class DegenerateDenominator(NumericalError):
    pass


class Diverged(NumericalError):
    """Orbit left the neighbourhood in which the normal form is meaningful."""

    def __init__(self, index, state):
        super().__init__(f"orbit diverged at iterate {index}: state={tuple(state)}")
        self.index = index
        self.state = state


class ZeroXStar(NumericalError):
    pass


class OnUnitCircle(NumericalError):
    pass


class ChainInconsistent(NumericalError):
    pass


class Unstable(NumericalError):
    pass


class NoReturns(NumericalError):
    pass


class QuadratureNotConverged(NumericalError):
    pass


class Tangential(NumericalError):
    pass


class DegenerateNormalForm(NumericalError):
    pass


class GrazingDegenerate(NumericalError):
    pass


class StepTooLarge(NumericalError):
    pass
