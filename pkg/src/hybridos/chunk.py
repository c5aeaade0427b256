"""Exclusive integer intervals: the base representation for pages and frames."""
from __future__ import annotations

from .assertions import fields_type, not_duplicable, private_fields
from .errors import NotAdjacent, OutOfBounds
from .rep_core import UNIT_MAX, IntervalId, Linear, RepCreator

_KEY = object()


@not_duplicable
@private_fields("_range")
@fields_type("_range", "IntervalId")
class Chunk(Linear):
    """An owned, non-overlapping ``[start, end]`` range of units.

    Only a :class:`RepCreator` built by :func:`chunk_creator`, or the
    consuming :meth:`split_at` / :meth:`merge`, can produce one.
    """

    __slots__ = ("_range",)
    _range: IntervalId

    def __init__(self, key, ident: IntervalId):
        if key is not _KEY:
            raise TypeError("Chunk is created only through chunk_creator(), split_at() or merge()")
        super().__init__()
        if not ident.is_empty and ident.end == UNIT_MAX:
            raise ValueError("chunk end must be below 2**64-1")
        self._range = ident

    @property
    def start(self) -> int:
        self._check_live()
        return self._range.start

    @property
    def end(self) -> int:
        self._check_live()
        return self._range.end

    @property
    def identifier(self) -> IntervalId:
        self._check_live()
        return self._range

    @property
    def is_empty(self) -> bool:
        self._check_live()
        return self._range.is_empty

    def __len__(self):
        self._check_live()
        return len(self._range)

    def contains(self, unit: int) -> bool:
        self._check_live()
        return self._range.start <= unit <= self._range.end

    def split_at(self, boundary: int) -> tuple["Chunk", "Chunk"]:
        """Consume this chunk, returning ``[start, boundary-1]`` and ``[boundary, end]``."""
        self._check_live()
        r = self._range
        if r.is_empty or not r.start < boundary <= r.end:
            raise OutOfBounds(f"boundary {boundary} outside ({r.start}, {r.end}]")
        self._consume()
        return (Chunk(_KEY, IntervalId(r.start, boundary - 1)),
                Chunk(_KEY, IntervalId(boundary, r.end)))

    def merge(self, other: "Chunk") -> "Chunk":
        """Consume two adjacent chunks, returning the covering chunk."""
        self._check_live()
        other._check_live()
        a, b = self._range, other._range
        if a.is_empty or b.is_empty:
            raise NotAdjacent("cannot merge an empty chunk")
        if a.end + 1 == b.start:
            covering = IntervalId(a.start, b.end)
        elif b.end + 1 == a.start:
            covering = IntervalId(b.start, a.end)
        else:
            kind = "overlap" if a.overlaps(b) else "gap"
            raise NotAdjacent(f"{a} and {b} are not adjacent ({kind})")
        self._consume()
        other._consume()
        return Chunk(_KEY, covering)

    def __repr__(self):
        if not self._live:
            return "<Chunk consumed>"
        return f"Chunk{self._range}"


def _make_chunk(ident: IntervalId) -> Chunk:
    if ident.is_empty:
        raise ValueError("an empty range is not a resource")
    return Chunk(_KEY, ident)


def chunk_creator(*, heap_ready: bool = True) -> RepCreator[IntervalId, Chunk]:
    return RepCreator(IntervalId, _make_chunk, heap_ready=heap_ready)


def _reconstitute(ident: IntervalId) -> Chunk:
    # Trusted: rebuilds a chunk whose value was forgotten while its units
    # were recorded elsewhere (page table entries). No bookkeeping check.
    return _make_chunk(ident)


def split_at(c: Chunk, boundary: int) -> tuple[Chunk, Chunk]:
    return c.split_at(boundary)


def merge(a: Chunk, b: Chunk) -> Chunk:
    return a.merge(b)


def contains(c: Chunk, unit: int) -> bool:
    return c.contains(unit)
