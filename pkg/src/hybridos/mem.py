"""Typestate page and frame management over a simulated page table.

Pages and frames are :class:`~hybridos.chunk.Chunk` wrappers whose class
encodes their state (Free, Allocated, Mapped, Unmapped). ``Pages[Mapped]``
is :class:`MappedPages`, and only that class can touch memory. Mapping
consumes an allocated pages/frames pair, installs one PTE per page and
forgets the frames; dropping the mapped pages clears the PTEs, rebuilds the
frames from them and walks both values back to their free lists.
"""
from __future__ import annotations

import bisect
import enum
import struct
import warnings

from .assertions import fields_type, nomutates, not_duplicable, private_fields
from .chunk import Chunk, _reconstitute, chunk_creator
from .errors import (
    InvariantViolation, LengthMismatch, Misaligned, MmioAccessError, NotFree, OutOfBounds,
    OutOfRange, OutOfResources, OverlapsPriorCarve, ProtectionFault, TableConflict,
)
from .rep_core import IntervalId, Linear, RepCreator

PAGE_SIZE = 4096

_KEY = object()


class MapFlags(enum.Enum):
    READ_ONLY = "ro"
    READ_WRITE = "rw"
    DEVICE = "device"

    @property
    def writable(self) -> bool:
        return self is not MapFlags.READ_ONLY


class Free:
    pass


class Allocated:
    pass


class Mapped:
    pass


class Unmapped:
    pass


class SimPageTable:
    """Flat single-level page table: page number -> (frame number, flags)."""

    def __init__(self):
        self._entries: dict[int, tuple[int, MapFlags]] = {}
        self._by_frame: dict[int, int] = {}

    def __len__(self):
        return len(self._entries)

    def __contains__(self, page):
        return page in self._entries

    def lookup(self, page: int):
        return self._entries.get(page)

    def frame_of(self, page: int) -> int:
        try:
            return self._entries[page][0]
        except KeyError:
            raise InvariantViolation(f"page {page} has no entry") from None

    def entries(self) -> dict[int, tuple[int, MapFlags]]:
        return dict(sorted(self._entries.items()))

    def duplicate_frames(self) -> list[int]:
        """Full scan; frames that appear in more than one entry."""
        seen, dups = set(), []
        for frame, _ in self._entries.values():
            if frame in seen:
                dups.append(frame)
            seen.add(frame)
        return dups

    def _insert(self, page: int, frame: int, flags: MapFlags):
        if page in self._entries:
            raise TableConflict(f"page {page} already mapped")
        if frame in self._by_frame:
            raise TableConflict(f"frame {frame} already mapped by page {self._by_frame[frame]}")
        self._entries[page] = (frame, flags)
        self._by_frame[frame] = page

    def _set_flags(self, page: int, flags: MapFlags):
        frame, _ = self._entries[page]
        self._entries[page] = (frame, flags)

    def _clear(self, page: int) -> int:
        try:
            frame, _ = self._entries.pop(page)
        except KeyError:
            raise InvariantViolation(f"clearing unmapped page {page}") from None
        del self._by_frame[frame]
        return frame


class SimPhysMemory:
    """RAM as a flat byte array, plus MMIO windows dispatched to device models.

    The CPU path (:meth:`read`/:meth:`write`) is what mapped pages use. The
    DMA path reaches RAM only.
    """

    def __init__(self, num_frames: int):
        self._ram = bytearray(num_frames * PAGE_SIZE)
        self._windows: list[tuple[int, int, object]] = []

    @property
    def num_frames(self) -> int:
        return len(self._ram) // PAGE_SIZE

    def attach_mmio(self, first_frame: int, num_frames: int, handler):
        lo, hi = first_frame * PAGE_SIZE, (first_frame + num_frames) * PAGE_SIZE
        if lo < len(self._ram):
            raise ValueError("MMIO window overlaps RAM")
        for start, end, _ in self._windows:
            if lo < end and start < hi:
                raise ValueError("MMIO windows overlap")
        self._windows.append((lo, hi, handler))

    def _window(self, addr: int):
        for start, end, handler in self._windows:
            if start <= addr < end:
                return start, end, handler
        return None

    def _ram_range(self, addr: int, n: int):
        if addr < 0 or n < 0 or addr + n > len(self._ram):
            raise OutOfBounds(f"physical range {addr:#x}+{n} outside RAM")

    def read(self, addr: int, n: int) -> bytes:
        if addr + n <= len(self._ram):
            self._ram_range(addr, n)
            return bytes(self._ram[addr:addr + n])
        start, end, handler = self._mmio_target(addr, n)
        return handler.mmio_read(addr - start).to_bytes(4, "little")

    def write(self, addr: int, data: bytes):
        n = len(data)
        if addr + n <= len(self._ram):
            self._ram_range(addr, n)
            self._ram[addr:addr + n] = data
            return
        start, end, handler = self._mmio_target(addr, n)
        handler.mmio_write(addr - start, int.from_bytes(data, "little"))

    def _mmio_target(self, addr: int, n: int):
        window = self._window(addr)
        if window is None:
            raise OutOfBounds(f"physical address {addr:#x} is neither RAM nor MMIO")
        if n != 4 or addr % 4:
            raise MmioAccessError(f"MMIO access must be an aligned 32-bit word ({addr:#x}+{n})")
        return window

    def dma_read(self, addr: int, n: int) -> bytes:
        self._ram_range(addr, n)
        return bytes(self._ram[addr:addr + n])

    def dma_write(self, addr: int, data: bytes):
        self._ram_range(addr, len(data))
        self._ram[addr:addr + len(data)] = data


@fields_type("_chunk", "Chunk")
@private_fields("_chunk")
class _Typed(Linear):
    __slots__ = ("_chunk", "_mem")
    _chunk: Chunk
    state: type = None
    _family: dict = {}

    def __init__(self, key, chunk: Chunk, mem: "MemorySystem"):
        if key is not _KEY:
            raise TypeError(f"{type(self).__name__} cannot be constructed directly")
        super().__init__()
        self._chunk = chunk
        self._mem = mem

    def __class_getitem__(cls, state):
        return cls._family[state]

    @property
    def start(self) -> int:
        self._check_live()
        return self._chunk.start

    @property
    def end(self) -> int:
        self._check_live()
        return self._chunk.end

    @property
    def identifier(self) -> IntervalId:
        self._check_live()
        return self._chunk.identifier

    def __len__(self):
        self._check_live()
        return len(self._chunk)

    def _into(self, cls):
        self._consume()
        return cls(_KEY, self._chunk, self._mem)

    def _take_chunk(self) -> Chunk:
        self._consume()
        return self._chunk

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if self._live:
            self.drop()

    def drop(self):
        raise TypeError(f"{type(self).__name__} is owned by its allocator")

    def __del__(self):
        if getattr(self, "_live", False) and self.state is not Free:
            warnings.warn(f"{self!r} garbage-collected without drop(); its resources leak",
                          ResourceWarning, stacklevel=2)

    def __repr__(self):
        if not self._live:
            return f"<{type(self).__name__} consumed>"
        return f"{type(self).__name__}[{self._chunk.start},{self._chunk.end}]"


@not_duplicable
@fields_type("_chunk", "Chunk")
class TypedPages(_Typed):
    __slots__ = ()
    _family: dict = {}


@not_duplicable
@fields_type("_chunk", "Chunk")
class TypedFrames(_Typed):
    __slots__ = ()
    _family: dict = {}


@not_duplicable
class FreePages(TypedPages):
    __slots__ = ()
    state = Free


@not_duplicable
class AllocatedPages(TypedPages):
    __slots__ = ()
    state = Allocated

    def drop(self):
        self._mem._allocator_for_pages()._insert(self._into(FreePages))


@not_duplicable
class UnmappedPages(TypedPages):
    __slots__ = ()
    state = Unmapped

    def drop(self):
        self._into(AllocatedPages).drop()


@not_duplicable
class MappedPages(TypedPages):
    """Pages with live PTEs; the only state with access to memory."""

    __slots__ = ("_carves",)
    state = Mapped

    def __init__(self, key, chunk, mem):
        super().__init__(key, chunk, mem)
        self._carves: list[tuple[int, int]] = []

    @property
    def vaddr(self) -> int:
        return self.start * PAGE_SIZE

    @property
    def nbytes(self) -> int:
        return len(self) * PAGE_SIZE

    @property
    @nomutates("_chunk", "_carves")
    def flags(self) -> MapFlags:
        self._check_live()
        return self._mem.table.lookup(self._chunk.start)[1]

    @nomutates("_chunk", "_carves")
    def frames(self) -> list[int]:
        self._check_live()
        table = self._mem.table
        return [table.frame_of(p) for p in range(self._chunk.start, self._chunk.end + 1)]

    def _segments(self, offset: int, n: int):
        if offset < 0 or n < 0 or offset + n > self.nbytes:
            raise OutOfBounds(f"byte range {offset}+{n} outside {self.nbytes}-byte mapping")
        table = self._mem.table
        first = self._chunk.start
        while n > 0:
            page, within = divmod(offset, PAGE_SIZE)
            step = min(n, PAGE_SIZE - within)
            yield table.frame_of(first + page) * PAGE_SIZE + within, step
            offset += step
            n -= step

    def read(self, offset: int, n: int) -> bytes:
        self._check_live()
        phys = self._mem.phys
        return b"".join(phys.read(addr, step) for addr, step in self._segments(offset, n))

    def write(self, offset: int, data: bytes):
        self._check_live()
        if not self.flags.writable:
            raise ProtectionFault(f"write to read-only mapping {self!r}")
        phys = self._mem.phys
        pos = 0
        for addr, step in self._segments(offset, len(data)):
            phys.write(addr, data[pos:pos + step])
            pos += step

    def remap(self, flags: MapFlags):
        self._check_live()
        if not isinstance(flags, MapFlags):
            raise TypeError("flags must be a MapFlags member")
        table = self._mem.table
        for page in range(self._chunk.start, self._chunk.end + 1):
            table._set_flags(page, flags)

    def _carve_address(self, offset: int, size: int, align: int) -> int:
        # Checked stage: the carved extent lies inside this mapping, is aligned,
        # and does not overlap anything carved before.
        self._check_live()
        if align < 1 or align & (align - 1):
            raise ValueError(f"alignment {align} is not a power of two")
        if size < 1 or offset < 0 or offset + size > self.nbytes:
            raise OutOfRange(f"carve {offset}+{size} outside {self.nbytes}-byte mapping")
        addr = self.vaddr + offset
        if addr % align:
            raise Misaligned(f"address {addr:#x} not aligned to {align}")
        last = offset + size - 1
        for lo, hi in self._carves:
            if offset <= hi and lo <= last:
                raise OverlapsPriorCarve(f"[{offset},{last}] overlaps carved [{lo},{hi}]")
        self._carves.append((offset, last))
        return addr

    def carve(self, offset: int, size: int, align: int = 1, layout: struct.Struct | None = None) -> "TypedView":
        addr = self._carve_address(offset, size, align)
        return _cast(self, addr, size, layout)

    def drop(self):
        """Unmap: clear PTEs, rebuild the forgotten frames, return both to their allocators."""
        self._check_live()
        mem = self._mem
        freed = [mem.table._clear(p) for p in range(self._chunk.start, self._chunk.end + 1)]
        self._into(UnmappedPages).drop()
        for start, end in coalesce(freed):
            UnmappedFrames(_KEY, _reconstitute(IntervalId(start, end)), mem).drop()


@not_duplicable
class FreeFrames(TypedFrames):
    __slots__ = ()
    state = Free


@not_duplicable
class AllocatedFrames(TypedFrames):
    __slots__ = ()
    state = Allocated

    def drop(self):
        self._mem._allocator_for_frames(self._chunk.start)._insert(self._into(FreeFrames))


@not_duplicable
class MappedFrames(TypedFrames):
    __slots__ = ()
    state = Mapped


@not_duplicable
class UnmappedFrames(TypedFrames):
    __slots__ = ()
    state = Unmapped

    def drop(self):
        self._into(AllocatedFrames).drop()


for _cls in (FreePages, AllocatedPages, MappedPages, UnmappedPages):
    TypedPages._family[_cls.state] = _cls
for _cls in (FreeFrames, AllocatedFrames, MappedFrames, UnmappedFrames):
    TypedFrames._family[_cls.state] = _cls


def coalesce(units) -> list[tuple[int, int]]:
    """Group unit numbers into maximal contiguous ``(start, end)`` runs."""
    runs: list[list[int]] = []
    ordered = sorted(units)
    for a, b in zip(ordered, ordered[1:]):
        if a == b:
            raise InvariantViolation(f"unit {a} recorded twice")
    for u in ordered:
        if runs and runs[-1][1] + 1 == u:
            runs[-1][1] = u
        else:
            runs.append([u, u])
    return [(a, b) for a, b in runs]


@not_duplicable
class TypedView(Linear):
    """A carved, bounds-checked window into a :class:`MappedPages`.

    Valid only while the pages it was carved from remain mapped.
    """

    __slots__ = ("_pages", "_offset", "_size", "_layout")

    def __init__(self, key, pages: MappedPages, offset: int, size: int, layout):
        if key is not _KEY:
            raise TypeError("TypedView is produced only by carve_typed()")
        super().__init__()
        self._pages = pages
        self._offset = offset
        self._size = size
        self._layout = layout

    def _check_live(self):
        super()._check_live()
        self._pages._check_live()

    @property
    def size(self) -> int:
        return self._size

    @property
    def vaddr(self) -> int:
        self._check_live()
        return self._pages.vaddr + self._offset

    @property
    def phys_addr(self) -> int:
        self._check_live()
        page, within = divmod(self._offset, PAGE_SIZE)
        return self._pages._mem.table.frame_of(self._pages.start + page) * PAGE_SIZE + within

    @property
    def layout(self):
        return self._layout

    def __len__(self):
        if self._layout is None:
            return self._size
        return self._size // self._layout.size

    def _bounds(self, off: int, n: int):
        if off < 0 or n < 0 or off + n > self._size:
            raise OutOfBounds(f"view access {off}+{n} outside {self._size}-byte view")

    def read(self, off: int, n: int) -> bytes:
        self._check_live()
        self._bounds(off, n)
        return self._pages.read(self._offset + off, n)

    def write(self, off: int, data: bytes):
        self._check_live()
        self._bounds(off, len(data))
        self._pages.write(self._offset + off, data)

    def read_u32(self, off: int) -> int:
        return int.from_bytes(self.read(off, 4), "little")

    def write_u32(self, off: int, value: int):
        self.write(off, (value & 0xFFFFFFFF).to_bytes(4, "little"))

    def record(self, i: int) -> tuple:
        size = self._layout.size
        return self._layout.unpack(self.read(i * size, size))

    def set_record(self, i: int, *values):
        self.write(i * self._layout.size, self._layout.pack(*values))

    def record_phys_addr(self, i: int) -> int:
        return self.phys_addr + i * self._layout.size

    def _release(self):
        if self._live:
            self._consume()


def _cast(pages: MappedPages, addr: int, size: int, layout) -> TypedView:
    # Trusted stage: reinterpret an already-checked extent.
    return TypedView(_KEY, pages, addr - pages.vaddr, size, layout)


class Allocator:
    """First-fit allocator over Free-state representations ordered by start."""

    def __init__(self, kind: str, mem: "MemorySystem", whole: _Typed):
        self.kind = kind
        self._mem = mem
        fam = TypedPages._family if kind == "pages" else TypedFrames._family
        self._free_cls = fam[Free]
        self._alloc_cls = fam[Allocated]
        self._free: list = []
        self._starts: list[int] = []
        self.first = whole.start
        self.capacity = len(whole)
        self._insert(whole)

    def __contains__(self, unit: int) -> bool:
        return self.first <= unit < self.first + self.capacity

    def free_intervals(self) -> list[tuple[int, int]]:
        return [(r.start, r.end) for r in self._free]

    @property
    def free_units(self) -> int:
        return sum(len(r) for r in self._free)

    def _pop(self, i: int) -> Chunk:
        del self._starts[i]
        return self._free.pop(i)._take_chunk()

    def _put(self, i: int, chunk: Chunk):
        self._starts.insert(i, chunk.start)
        self._free.insert(i, self._free_cls(_KEY, chunk, self._mem))

    def allocate(self, count: int):
        if count < 1:
            raise ValueError("allocation count must be at least 1")
        for i, rep in enumerate(self._free):
            if len(rep) >= count:
                chunk = self._pop(i)
                if len(chunk) > count:
                    chunk, rest = chunk.split_at(chunk.start + count)
                    self._put(i, rest)
                return self._alloc_cls(_KEY, chunk, self._mem)
        raise OutOfResources(f"no free run of {count} {self.kind}")

    def allocate_at(self, start: int, count: int):
        if count < 1:
            raise ValueError("allocation count must be at least 1")
        end = start + count - 1
        i = bisect.bisect_right(self._starts, start) - 1
        if i < 0 or self._free[i].end < end:
            raise NotFree(f"{self.kind} [{start},{end}] are not entirely free")
        chunk = self._pop(i)
        if chunk.start < start:
            left, chunk = chunk.split_at(start)
            self._put(i, left)
            i += 1
        if chunk.end > end:
            chunk, right = chunk.split_at(end + 1)
            self._put(i, right)
        return self._alloc_cls(_KEY, chunk, self._mem)

    def _insert(self, rep):
        if type(rep) is not self._free_cls:
            raise TypeError(f"allocator holds {self._free_cls.__name__}, got {type(rep).__name__}")
        if rep.start not in self or rep.end not in self:
            raise InvariantViolation(f"{rep!r} outside {self.kind} allocator range")
        i = bisect.bisect_left(self._starts, rep.start)
        chunk = rep._take_chunk()
        if i > 0 and self._free[i - 1].end >= chunk.start:
            raise InvariantViolation(f"{chunk!r} overlaps free {self._free[i - 1]!r}")
        if i < len(self._free) and self._free[i].start <= chunk.end:
            raise InvariantViolation(f"{chunk!r} overlaps free {self._free[i]!r}")
        if i > 0 and self._free[i - 1].end + 1 == chunk.start:
            chunk = self._pop(i - 1).merge(chunk)
            i -= 1
        if i < len(self._free) and chunk.end + 1 == self._free[i].start:
            chunk = chunk.merge(self._pop(i))
        self._put(i, chunk)


class MemorySystem:
    """Page allocator, frame allocator(s), page table and physical memory as one unit.

    Frames ``[0, num_frames)`` are RAM. ``mmio_frames`` extra frames after
    RAM form a device window handed out only by :meth:`device_frames`'s
    ``allocate_at``.
    """

    def __init__(self, num_frames: int, num_pages: int, *, mmio_frames: int = 0,
                 page_creator: RepCreator | None = None, frame_creator: RepCreator | None = None):
        if num_frames < 1 or num_pages < 1:
            raise ValueError("frame and page counts must be positive")
        self.page_creator = page_creator if page_creator is not None else chunk_creator()
        self.frame_creator = frame_creator if frame_creator is not None else chunk_creator()
        self.table = SimPageTable()
        self.phys = SimPhysMemory(num_frames)
        pages = self.page_creator.create_unique_representation(IntervalId(0, num_pages - 1))
        ram = self.frame_creator.create_unique_representation(IntervalId(0, num_frames - 1))
        self.pages = Allocator("pages", self, FreePages(_KEY, pages, self))
        self.frames = Allocator("frames", self, FreeFrames(_KEY, ram, self))
        self.device_frames = None
        if mmio_frames:
            window = self.frame_creator.create_unique_representation(
                IntervalId(num_frames, num_frames + mmio_frames - 1))
            self.device_frames = Allocator("frames", self, FreeFrames(_KEY, window, self))

    def _allocator_for_pages(self) -> Allocator:
        return self.pages

    def _allocator_for_frames(self, start: int) -> Allocator:
        if start in self.frames:
            return self.frames
        if self.device_frames is not None and start in self.device_frames:
            return self.device_frames
        raise InvariantViolation(f"frame {start} belongs to no allocator")

    def allocators(self) -> list[Allocator]:
        return [a for a in (self.pages, self.frames, self.device_frames) if a is not None]

    def free_state(self) -> tuple:
        """Interval sets of every free list, for reclamation comparisons."""
        return tuple(tuple(a.free_intervals()) for a in self.allocators())

    def map(self, pages: AllocatedPages, frames: AllocatedFrames,
            flags: MapFlags = MapFlags.READ_WRITE) -> MappedPages:
        if type(pages) is not AllocatedPages or type(frames) is not AllocatedFrames:
            raise TypeError("map() takes Pages[Allocated] and Frames[Allocated]")
        if not isinstance(flags, MapFlags):
            raise TypeError("flags must be a MapFlags member")
        pages._check_live()
        frames._check_live()
        if pages._mem is not self or frames._mem is not self:
            raise ValueError("pages and frames belong to a different memory system")
        if len(pages) != len(frames):
            raise LengthMismatch(f"{len(pages)} pages vs {len(frames)} frames")
        pairs = list(zip(range(pages.start, pages.end + 1), range(frames.start, frames.end + 1)))
        for page, frame in pairs:
            if page in self.table or frame in self.table._by_frame:
                raise TableConflict(f"page {page} or frame {frame} already has an entry")
        mapped = pages._into(MappedPages)
        # The frames value is forgotten; the PTEs are its only record until unmap.
        frames._into(MappedFrames)._consume()
        for page, frame in pairs:
            self.table._insert(page, frame, flags)
        return mapped


def init(num_frames: int, num_pages: int, **kwargs) -> MemorySystem:
    return MemorySystem(num_frames, num_pages, **kwargs)


def allocate(alloc: Allocator, count: int):
    return alloc.allocate(count)


def allocate_at(alloc: Allocator, start: int, count: int):
    return alloc.allocate_at(start, count)


def map_pages(pages: AllocatedPages, frames: AllocatedFrames, flags: MapFlags = MapFlags.READ_WRITE) -> MappedPages:
    return pages._mem.map(pages, frames, flags)


def remap(p: MappedPages, flags: MapFlags):
    p.remap(flags)


def drop_cascade(p: MappedPages):
    p.drop()


def carve_typed(p: MappedPages, offset: int, size: int, align: int = 1, layout=None) -> TypedView:
    return p.carve(offset, size, align, layout)
