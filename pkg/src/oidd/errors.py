"""Exception types raised across the package.

Everything inherits from OiddError so callers (and the CLI) can catch
library failures in one place without swallowing genuine bugs.
"""


class OiddError(Exception):
    pass


class TensorFormatError(OiddError):
    """Malformed OIDT container; `offset` is the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class BadMagic(TensorFormatError):
    pass


class BadVersion(TensorFormatError):
    pass


class TruncatedPayload(TensorFormatError):
    pass


class DimOverflow(TensorFormatError):
    pass


class UnsupportedFormat(OiddError):
    pass


class MaxvalNot255(OiddError):
    pass


class ShapeMismatch(OiddError):
    pass


class SimplexViolation(OiddError):
    pass


class NonFiniteLogit(OiddError):
    pass


class WindowTooLarge(OiddError):
    pass


class EmptyClass(OiddError):
    def __init__(self, label: int):
        super().__init__(f"no corpus items for class label {label}")
        self.label = label


class EmptySample(OiddError):
    pass


class DegenerateLabels(OiddError):
    pass


class UnknownDetector(OiddError):
    pass


class MissingSplit(OiddError):
    pass
