"""Exception hierarchy shared by every tinymask module."""


class TinyMaskError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TinyMaskError):
    pass


class ShapeMismatch(TinyMaskError, ValueError):
    pass


class InvalidQuantParams(TinyMaskError, ValueError):
    pass


class StateError(TinyMaskError):
    pass


class DataError(TinyMaskError):
    pass


class NumericError(TinyMaskError, ArithmeticError):
    pass


class NotFound(TinyMaskError, KeyError):
    def __str__(self):
        # KeyError would repr() the message
        return str(self.args[0]) if self.args else ""


class CalibrationIncomplete(TinyMaskError):
    pass


class UnsupportedShape(TinyMaskError):
    pass


class BudgetExceeded(TinyMaskError):
    def __init__(self, message, layer=None, required=None, capacity=None):
        super().__init__(message)
        self.layer = layer
        self.required = required
        self.capacity = capacity


class FormatError(TinyMaskError):
    pass


class CorruptionError(FormatError):
    pass


class VersionError(FormatError):
    pass
