"""Exception hierarchy shared by every module of the package."""


class DRMError(ValueError):
    """Base class for all errors raised by drmrl."""


class LengthMismatch(DRMError):
    pass


class NegativeMass(DRMError):
    pass


class MassNotOne(DRMError):
    pass


class SupportTooLarge(DRMError):
    pass


class DeltaOutOfRange(DRMError):
    pass


class InvalidRiskMeasure(DRMError):
    pass


class AlphaOutOfRange(InvalidRiskMeasure):
    pass


class NegativeSupportForDistortion(DRMError):
    pass


class IntervalEmpty(DRMError):
    pass


class InvalidDimensions(DRMError):
    pass


class AssumptionViolated(DRMError):
    pass


class GapOutOfRange(DRMError):
    pass


class NoOptimalAction(DRMError):
    pass


class ScheduleLengthMismatch(DRMError):
    pass


class NegativeGap(DRMError):
    pass


class DimensionMismatch(DRMError):
    pass


class NotAProbabilityVector(DRMError):
    pass


class ConfigInvalid(DRMError):
    pass


class CurveTooShort(DRMError):
    pass
