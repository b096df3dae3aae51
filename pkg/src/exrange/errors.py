"""Exception types shared across the package."""


class ExrangeError(Exception):
    """Base class for errors raised by this package."""


class StackFormatError(ExrangeError):
    """A stack or map file violates the on-disk format contract."""


class DegenerateFitError(ExrangeError):
    """A regression problem is unidentifiable (e.g. all covariates equal)."""
