"""Exception types raised by the test statistics and their inputs."""


class MhsicError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatch(MhsicError, ValueError):
    pass


class NotSymmetric(MhsicError, ValueError):
    pass


class DegenerateSample(MhsicError, ValueError):
    """All pairwise distances are zero, so no bandwidth can be chosen."""


class DegenerateVariance(MhsicError, ArithmeticError):
    """The studentising scale is zero; the data cannot calibrate the test."""


class TooFewObservations(MhsicError, ValueError):
    pass


class BandwidthLeak(MhsicError, ValueError):
    """A bandwidth for the split statistic was tuned on second-half rows."""


class ConfigInvalid(MhsicError, ValueError):
    pass
