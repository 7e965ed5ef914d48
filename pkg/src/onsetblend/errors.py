"""Exception hierarchy.

Every error raised by the library derives from :class:`OnsetBlendError`.  The
three intermediate classes map onto CLI exit codes: validation problems (1),
bad or insufficient data (2) and optimizer non-convergence (3).
"""


class OnsetBlendError(Exception):
    exit_code = 2


class ValidationError(OnsetBlendError):
    exit_code = 1


class DataError(OnsetBlendError):
    exit_code = 2


class ConvergenceError(OnsetBlendError):
    exit_code = 3


# ingest
class MalformedRow(DataError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class MissingDay(DataError):
    pass


class NegativeRain(DataError):
    pass


class RaggedEnsemble(DataError):
    pass


class LeadWindowExceedsTruth(DataError):
    pass


# onset
class SeriesTooShort(DataError):
    pass


class EmptyHistory(DataError):
    pass


# climatology
class DegenerateSample(DataError):
    pass


class ZeroSurvival(DataError):
    pass


# blend
class LeadWindowExceedsHorizon(DataError):
    pass


class SingleClass(DataError):
    pass


class NonConvergence(ConvergenceError):
    def __init__(self, message, grad_norm=float("nan")):
        self.grad_norm = grad_norm
        super().__init__(f"{message} (final gradient max-norm {grad_norm:.3e})")


# evaluation
class EmptySet(DataError):
    pass


class NoPositives(DataError):
    pass


class NoNegatives(DataError):
    pass


class ZeroClimatologyScore(DataError):
    pass


# decision
class InconsistentScheme(ValidationError):
    pass


class MissingIncome(ValidationError):
    pass


class NonUniqueOptimum(ValidationError):
    pass
