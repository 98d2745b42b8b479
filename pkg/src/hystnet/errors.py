"""Exception hierarchy.

Validation problems map to CLI exit code 2, numerical failures to exit code 3.
"""


class HystnetError(Exception):
    pass


class ValidationError(HystnetError, ValueError):
    pass


class NumericalFailure(HystnetError, ArithmeticError):
    pass


class DistinctFrequencyViolation(NumericalFailure):
    pass


class DominantModeIsRigid(NumericalFailure):
    pass


class UnsupportedRegime(HystnetError):
    pass


class NoThreshold(NumericalFailure):
    pass


class InfiniteTriggerTime(NumericalFailure):
    pass


class NoSaddle(NumericalFailure):
    pass


class NoConvergence(NumericalFailure):
    def __init__(self, message, residual_norm=None, condition=None):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.condition = condition


class SeedFailure(NumericalFailure):
    pass


class BranchStalled(NumericalFailure):
    pass


class IntegrationDiverged(NumericalFailure):
    def __init__(self, message, last_good_time=None, partial=None):
        super().__init__(message)
        self.last_good_time = last_good_time
        self.partial = partial
