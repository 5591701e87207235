"""Exception hierarchy shared by all modules."""


class TunnelSplitError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 3


class ConfigError(TunnelSplitError):
    exit_code = 2


class NumericalError(TunnelSplitError):
    exit_code = 3


class ValidityViolation(TunnelSplitError):
    exit_code = 4


# polyalg
class NonConvergence(NumericalError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class DegenerateInput(NumericalError):
    pass


class BranchAtOrigin(NumericalError):
    pass


class NotABranchPoint(NumericalError):
    pass


# curve / contour
class DiscriminantDegenerate(NumericalError):
    pass


class SheetCollision(NumericalError):
    pass


class PathThroughSingularity(NumericalError):
    pass


class TimeSingularity(NumericalError):
    pass


class NotAdjacent(NumericalError):
    pass


class ExpansionFailure(NumericalError):
    pass


# homology
class UnsupportedModel(TunnelSplitError):
    exit_code = 2


class EnergyOutOfRange(NumericalError):
    def __init__(self, msg, interval=None):
        super().__init__(msg)
        self.interval = interval


class UnknownLoop(TunnelSplitError):
    exit_code = 2


# semicl
class NoBoundState(NumericalError):
    pass


class DivergentSum(NumericalError):
    pass


class ResonanceSingularity(NumericalError):
    pass


# qref
class NonSymmetricModel(TunnelSplitError):
    exit_code = 2


class NoDoubletNearTarget(NumericalError):
    pass


class ConvergenceWarning(UserWarning):
    pass


class IntransitiveMonodromy(UserWarning):
    pass
