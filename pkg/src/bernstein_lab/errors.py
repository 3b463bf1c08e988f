"""Exception hierarchy shared by every module of the lab."""


class LabError(Exception):
    """Base class for all errors raised by bernstein_lab."""


class TailNotConverged(LabError):
    pass


class UnsupportedDepth(LabError):
    pass


class InverseNotBracketed(LabError):
    pass


class MaximizerAtBoundary(LabError):
    pass


class AllCoefficientsZero(LabError):
    pass


class DuplicateFrequency(LabError):
    pass


class DegenerateDifference(LabError):
    pass


class NotInfiniteOrder(LabError):
    pass


class OrdersNotSorted(LabError):
    pass


class NullspaceEmpty(LabError):
    pass


class RestrictedIdenticallyZero(LabError):
    pass


class QuadratureNotStabilized(LabError):
    pass


class GramSingular(LabError):
    pass


class ContourNearZero(LabError):
    pass


class InsufficientPoints(LabError):
    pass


class NonpositiveQuotient(LabError):
    pass


class ConfigInvalid(LabError):
    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.message = message
        self.pointer = pointer or "/"


class CacheCorrupt(LabError):
    pass
