"""Exception hierarchy shared by the crypto and simulation layers."""


class VfeflError(Exception):
    """Base class for all package errors."""


class DimensionError(VfeflError, ValueError):
    pass


class InvalidEncoding(VfeflError, ValueError):
    """Raised when bytes do not decode to a valid group element or artifact."""


class NotInGroup(InvalidEncoding):
    """A value claimed to be in a class group (or G1/G2) is not a valid element."""


class NotInF(VfeflError):
    """Element handed to the easy-DL solver does not lie in the order-p subgroup."""


class OutOfRange(VfeflError):
    """Bounded discrete log found no solution inside the search window."""

    def __init__(self, message, dimension=None):
        super().__init__(message)
        self.dimension = dimension


class SetupError(VfeflError):
    pass


class PreconditionError(VfeflError, ValueError):
    """Prover inputs do not satisfy the relation being proven."""


class MessageTooLarge(VfeflError, ValueError):
    pass


class DegenerateModel(VfeflError, ValueError):
    """Model vector with zero squared norm; the trust score is undefined."""


class Overflow(VfeflError, ValueError):
    pass


class ConfigError(VfeflError, ValueError):
    pass


class DatasetError(VfeflError):
    pass


class BadMagic(DatasetError):
    pass


class TruncatedFile(DatasetError):
    pass
