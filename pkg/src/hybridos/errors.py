"""Exception hierarchy shared by every layer of the package."""


class HybridOSError(Exception):
    pass


class ConsumedError(HybridOSError):
    """A linear value was used after it had been moved or consumed."""


# representation creation
class OverlapError(HybridOSError):
    pass


class CapacityError(HybridOSError):
    pass


# chunks and memory
class OutOfBounds(HybridOSError, IndexError):
    pass


class NotAdjacent(HybridOSError, ValueError):
    pass


class OutOfResources(HybridOSError):
    pass


class NotFree(HybridOSError):
    pass


class LengthMismatch(HybridOSError, ValueError):
    pass


class TableConflict(HybridOSError):
    """A page table update would break the bijective mapping."""


class ProtectionFault(HybridOSError):
    pass


class OutOfRange(HybridOSError):
    pass


class Misaligned(HybridOSError):
    pass


class OverlapsPriorCarve(HybridOSError):
    pass


class InvariantViolation(HybridOSError, AssertionError):
    """Internal bookkeeping is inconsistent; never reachable through the safe API."""


# hardware abstraction layer
class ValueOutOfRange(HybridOSError, ValueError):
    pass


class TokenError(HybridOSError, TypeError):
    """A proof token was presented to the wrong register file or queue."""


class StaleTokenError(TokenError):
    """The action a token proves has since been undone."""


# device model
class UnknownOffset(HybridOSError, KeyError):
    pass


class MmioAccessError(HybridOSError):
    pass


# driver
class InvalidConfig(HybridOSError, ValueError):
    pass


class PacketTooLarge(HybridOSError, ValueError):
    pass


class TableFull(HybridOSError):
    pass


class DuplicateFilter(HybridOSError):
    pass


class StateConflict(HybridOSError):
    pass


# conformance
class UnknownItem(HybridOSError, LookupError):
    pass
