"""Exception hierarchy shared by the library and the command line."""


class SoompError(Exception):
    """Base class for all errors raised by this package."""


class InvalidDimensionError(SoompError, ValueError):
    pass


class DimensionMismatchError(SoompError, ValueError):
    pass


class InvalidLevelError(SoompError, ValueError):
    pass


class EmptyDictionaryError(SoompError, ValueError):
    pass


class DictionaryExhaustedError(SoompError):
    """Every unselected atom lies (numerically) in the span of the selected ones.

    ``result`` carries the approximation reached before exhaustion.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class DegenerateAtomError(SoompError):
    pass


class NoPeaksError(SoompError):
    pass


class LengthMismatchError(SoompError, ValueError):
    pass


class DegenerateSignalError(SoompError, ValueError):
    pass


class MalformedStreamError(SoompError):
    pass


class CorruptContainerError(SoompError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UnreachableTargetError(SoompError):
    def __init__(self, message, achieved_prdn=None):
        super().__init__(message)
        self.achieved_prdn = achieved_prdn
