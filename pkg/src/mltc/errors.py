"""Exception types raised across the package."""


class MLTCError(Exception):
    """Base class for every error raised by mltc."""


class InvalidShape(MLTCError, ValueError):
    pass


class ShapeMismatch(MLTCError, ValueError):
    pass


class DegenerateMask(MLTCError, ValueError):
    """A softmax row (or pooled row) has no admissible entry."""


class NotScalar(MLTCError, ValueError):
    pass


class NonFiniteLoss(MLTCError, ArithmeticError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class NonFiniteGradient(MLTCError, ArithmeticError):
    def __init__(self, name):
        super().__init__(f"non-finite gradient in parameter {name!r}")
        self.name = name


class EmptyCorpus(MLTCError, ValueError):
    pass


class IoError(MLTCError, OSError):
    pass


class ParseError(MLTCError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class InvalidBatchSpec(MLTCError, ValueError):
    pass


class NoPositivePairs(MLTCError, ValueError):
    pass


class CorruptCheckpoint(MLTCError, ValueError):
    def __init__(self, field, detail=""):
        super().__init__(f"corrupt checkpoint ({field})" + (f": {detail}" if detail else ""))
        self.field = field


class UnknownKey(MLTCError, KeyError):
    def __init__(self, name):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"unknown config key {self.name!r}"


class BadValue(MLTCError, ValueError):
    def __init__(self, key, raw):
        super().__init__(f"bad value for {key!r}: {raw!r}")
        self.key = key
        self.raw = raw
