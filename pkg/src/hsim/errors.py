"""Exception hierarchy shared by all hsim modules."""


class HsimError(Exception):
    """Base class for every error raised by hsim."""


class ValidationError(HsimError, ValueError):
    """Input failed a structural check."""


class NotHermitian(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class DimensionTooLarge(ValidationError):
    pass


class InvalidParams(ValidationError):
    pass


class NonConvergence(HsimError, RuntimeError):
    pass


class AllZeroWeights(ValidationError):
    pass


class EmptyTree(ValidationError):
    pass


class InconsistentOracle(HsimError, RuntimeError):
    """A row-search weight function violated w(L) = w(L0) + w(L1)."""


class ZeroProduct(ValidationError):
    pass


class InvalidDistribution(ValidationError):
    pass


class NotPsd(ValidationError):
    pass


class ZeroTrace(ValidationError):
    pass


class ZeroFrobenius(ValidationError):
    pass


class ZeroMatrix(ValidationError):
    pass
