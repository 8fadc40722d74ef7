"""Exception types shared across the package."""


class InvforgeError(Exception):
    """Base class for every error raised by invforge."""


class UnknownElement(InvforgeError, KeyError):
    pass


class IndexOutOfRange(InvforgeError, IndexError):
    pass


class EmptyTarget(InvforgeError, ValueError):
    pass


class EmptySource(InvforgeError, ValueError):
    pass


class UnsupportedFormula(InvforgeError, ValueError):
    pass


class SignatureMismatch(InvforgeError, ValueError):
    pass


class NotInAge(InvforgeError, ValueError):
    pass


class BadEmbedding(InvforgeError, ValueError):
    pass


class UnsatisfiableDemand(InvforgeError, ValueError):
    pass


class NotDuplicableInAge(InvforgeError, ValueError):
    pass


class OrderTooSmall(InvforgeError, ValueError):
    pass


class NoSplittingDeclared(InvforgeError, ValueError):
    pass


class NotAMetricModel(InvforgeError, ValueError):
    pass


class StageBudgetExceeded(InvforgeError, RuntimeError):
    pass


class ConstantsUnsupported(InvforgeError, ValueError):
    pass


class InvalidAddress(InvforgeError, ValueError):
    pass


class ParseError(InvforgeError, ValueError):
    """Malformed structure file; ``where`` names the offending line or field."""

    def __init__(self, message, where=None):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)
