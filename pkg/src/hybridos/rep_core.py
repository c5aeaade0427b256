"""Creation of unique resource representations.

A *representation* is a linear value: owning it is the only authority to
use the resource it stands for. Linearity is emulated at runtime by
:class:`Linear` (no copy, no pickle, use-after-consume raises). Uniqueness
across separate values is the job of :class:`RepCreator`, which refuses to
build a representation whose identifier overlaps one it has already issued.
"""
from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import Callable, Generic, TypeVar

from .assertions import nocalls, not_duplicable
from .errors import CapacityError, ConsumedError, OverlapError

UNIT_MAX = 2**64 - 1

T = TypeVar("T", bound="ResourceIdentifier")
R = TypeVar("R")


@not_duplicable
class Linear:
    """Base for values that may be moved but never duplicated."""

    __slots__ = ("_live",)

    def __init__(self):
        self._live = True

    @property
    def live(self) -> bool:
        return self._live

    def _check_live(self):
        if not self._live:
            raise ConsumedError(f"{type(self).__name__} has already been consumed")

    def _consume(self):
        self._check_live()
        self._live = False

    def __copy__(self):
        raise TypeError(f"{type(self).__name__} is linear and cannot be copied")

    def __deepcopy__(self, memo):
        raise TypeError(f"{type(self).__name__} is linear and cannot be copied")

    def __reduce_ex__(self, protocol):
        raise TypeError(f"{type(self).__name__} is linear and cannot be serialized")

    def __repr__(self):
        state = "" if self._live else " consumed"
        return f"<{type(self).__name__}{state}>"


class ResourceIdentifier(abc.ABC):
    """Duplicable identity of a resource. Grants no access by itself."""

    @abc.abstractmethod
    def overlaps(self, other) -> bool:
        ...


@dataclass(frozen=True)
class IntervalId(ResourceIdentifier):
    """Inclusive unit range ``[start, end]``; empty when ``start > end``."""

    start: int
    end: int

    def __post_init__(self):
        for value in (self.start, self.end):
            if not isinstance(value, int) or isinstance(value, bool):
                raise TypeError("interval bounds must be integers")
            if not 0 <= value <= UNIT_MAX:
                raise ValueError(f"interval bound {value} outside 0..2**64-1")

    @classmethod
    def empty(cls) -> "IntervalId":
        return cls(1, 0)

    @property
    def is_empty(self) -> bool:
        return self.start > self.end

    def __len__(self):
        return 0 if self.is_empty else self.end - self.start + 1

    def overlaps(self, other) -> bool:
        if self.is_empty or other.is_empty:
            return False
        return self.start <= other.end and other.start <= self.end

    def __str__(self):
        return "[]" if self.is_empty else f"[{self.start},{self.end}]"


@dataclass(frozen=True)
class PciLocation(ResourceIdentifier):
    bus: int
    device: int
    function: int

    def __post_init__(self):
        for name, hi in (("bus", 255), ("device", 31), ("function", 7)):
            value = getattr(self, name)
            if not isinstance(value, int) or not 0 <= value <= hi:
                raise ValueError(f"PCI {name} must be in 0..{hi}, got {value!r}")

    def overlaps(self, other) -> bool:
        return (self.bus, self.device, self.function) == (other.bus, other.device, other.function)

    def __str__(self):
        return f"{self.bus:02x}:{self.device:02x}.{self.function}"


def overlaps(a: ResourceIdentifier, b: ResourceIdentifier) -> bool:
    if type(a) is not type(b):
        raise TypeError(f"cannot compare {type(a).__name__} with {type(b).__name__}")
    return a.overlaps(b)


class RepCreator(Generic[T, R]):
    """Issues representations whose identifiers never overlap.

    Identifiers are recorded forever; release of a resource goes through the
    owner of its Free-state representation, never through re-creation.
    Before :meth:`enable_heap` is called only the fixed-size early store is
    usable.
    """

    EARLY_CAPACITY = 32

    def __init__(self, id_type: type, make: Callable[[T], R], *, heap_ready: bool = True,
                 early_capacity: int = EARLY_CAPACITY):
        self._id_type = id_type
        self._make = make
        self._early: list = []
        self._early_capacity = early_capacity
        self._main: list | None = [] if heap_ready else None

    @property
    def heap_ready(self) -> bool:
        return self._main is not None

    @nocalls("_make")
    def enable_heap(self):
        if self._main is None:
            self._main = []

    @nocalls("_make")
    def identifiers(self) -> tuple:
        """Snapshot of all recorded identifiers, early store first."""
        return tuple(self._early) + tuple(self._main or ())

    @nocalls("_make")
    def find_overlap(self, ident: T):
        for stored in self._early:
            if stored.overlaps(ident):
                return stored
        for stored in self._main or ():
            if stored.overlaps(ident):
                return stored
        return None

    def create_unique_representation(self, ident: T) -> R:
        if not isinstance(ident, self._id_type):
            raise TypeError(f"expected {self._id_type.__name__}, got {type(ident).__name__}")
        clash = self.find_overlap(ident)
        if clash is not None:
            raise OverlapError(f"{ident} overlaps existing representation {clash}")
        if self._main is None and len(self._early) >= self._early_capacity:
            raise CapacityError(
                f"early store full ({self._early_capacity} entries) before dynamic storage is available")
        rep = self._make(ident)
        if self._main is None:
            self._early.append(ident)
        else:
            # newest first
            self._main.insert(0, ident)
        return rep

    def __len__(self):
        return len(self._early) + len(self._main or ())
