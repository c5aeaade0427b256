"""82599 driver built on the IRS: unique NIC value, queue typestates, checked bookkeeping.

The NIC owns its :class:`PciDevice`, its :class:`~hybridos.nic_hal.RegisterFile`
and every mapping it allocates. Queues are handed out as typestate values:
``RxQueue[Disabled]`` has no receive method, ``RxQueue[Enabled]`` does, and
``RxQueue[L3L4Filter]`` / ``RxQueue[RSS]`` record which distribution
mechanism owns the queue so the two cannot be combined. Dropping the NIC
invalidates every queue and filter entry, unmaps everything and returns the
PCI device.

The verified core is :meth:`_Transmitting.send_batch`,
:meth:`_Receiving.receive_batch`, :meth:`IxgbeNic.add_filter` and the
carve-based constructors. Everything else is held to ``nomutates`` /
``nocalls`` declarations checked by :mod:`hybridos.conformance`.
"""
from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass

from . import mem as memory
from . import regmap as rm
from .assertions import fields_type, nocalls, nomutates, not_duplicable, private_fields
from .device_sim import DESCRIPTOR, STATUS_DD, TX_CMD_EOP, TX_CMD_IFCS, TX_CMD_RS
from .errors import (
    DuplicateFilter, InvalidConfig, PacketTooLarge, StateConflict, TableFull,
    ValueOutOfRange,
)
from .nic_hal import ALL_INTERRUPTS, FilterCtrlFlags, RdRxCtlOptions, RegisterFile, protocol_code
from .packet import SCTP, TCP, UDP, FiveTuple
from .rep_core import Linear, PciLocation, RepCreator

_KEY = object()

BUFFER_SIZE = 2048
BAR_FRAMES = 32
MIN_RING, MAX_RING = 8, 4096
RING_ALIGN = 128
MAX_QUEUES = 64
RSS_QUEUES = 16


class Disabled:
    pass


class Enabled:
    pass


class L3L4Filter:
    pass


class RSS:
    pass


# PCI

@not_duplicable
@private_fields("_location", "_bar0")
class PciDevice(Linear):
    """Sole authority over one PCI function and its register BAR."""

    __slots__ = ("_location", "_bar0")

    def __init__(self, key, location: PciLocation, bar0: int):
        if key is not _KEY:
            raise TypeError("PciDevice values come from PciBus")
        super().__init__()
        self._location = location
        self._bar0 = bar0

    @property
    def location(self) -> PciLocation:
        return self._location

    @property
    def bar0_frame(self) -> int:
        self._check_live()
        return self._bar0

    def _move(self) -> "PciDevice":
        self._consume()
        return PciDevice(_KEY, self._location, self._bar0)

    def __repr__(self):
        return f"PciDevice({self._location}{'' if self._live else ', consumed'})"


class PciBus:
    """Enumerated devices; each location yields exactly one PciDevice."""

    def __init__(self):
        self._bars: dict[PciLocation, int] = {}
        self._creator: RepCreator[PciLocation, PciDevice] = RepCreator(
            PciLocation, lambda loc: PciDevice(_KEY, loc, self._bars[loc]))

    def add_device(self, location: PciLocation, bar0_frame: int) -> PciDevice:
        self._bars.setdefault(location, bar0_frame)
        return self._creator.create_unique_representation(location)

    def locations(self) -> tuple:
        return self._creator.identifiers()


# configuration

@dataclass(frozen=True)
class DriverConfig:
    rx_queues: int = 1
    tx_queues: int = 1
    ring_size: int = 64
    restricted: bool = True

    def __post_init__(self):
        for name in ("rx_queues", "tx_queues"):
            n = getattr(self, name)
            if not isinstance(n, int) or not 1 <= n <= MAX_QUEUES:
                raise InvalidConfig(f"{name} must be in 1..{MAX_QUEUES}, got {n!r}")
        n = self.ring_size
        if not isinstance(n, int) or not MIN_RING <= n <= MAX_RING or n & (n - 1):
            raise InvalidConfig(f"ring size must be a power of two in [{MIN_RING}, {MAX_RING}], got {n!r}")

    @property
    def ring_pages(self) -> int:
        return -(-self.ring_size * DESCRIPTOR.size // memory.PAGE_SIZE)

    @property
    def rx_buffers(self) -> int:
        return self.ring_size * (1 if self.restricted else 2)

    def pages_needed(self) -> int:
        """Pages (and RAM frames) one NIC with this config allocates."""
        per_buffer = BUFFER_SIZE / memory.PAGE_SIZE
        rx = self.ring_pages + int(self.rx_buffers * per_buffer)
        tx = self.ring_pages + int(self.ring_size * per_buffer)
        return self.rx_queues * rx + self.tx_queues * tx


# queues

def _span_pages(nbytes: int) -> int:
    return -(-nbytes // memory.PAGE_SIZE)


@private_fields("_next_index", "_clean_index")
class _Ring:
    """Per-queue bookkeeping shared by successive typestate values of one queue."""

    __slots__ = ("nic", "index", "kind", "ring_pages", "buf_pages", "ring", "buffers",
                 "slots", "_next_index", "_clean_index", "_desc_buf", "_pool", "holder", "filters")

    def __init__(self, nic, index, kind, ring_pages, buf_pages, ring, buffers):
        self.nic = nic
        self.index = index
        self.kind = kind
        self.ring_pages = ring_pages
        self.buf_pages = buf_pages
        self.ring = ring
        self.buffers = buffers
        self.slots = len(ring)
        self._next_index = 0
        self._clean_index = 0
        self._desc_buf = list(range(self.slots))
        self._pool = deque(range(self.slots, len(buffers)))
        self.holder = None
        self.filters: set[int] = set()

    @property
    def next_index(self) -> int:
        return self._next_index


class _Queue(Linear):
    __slots__ = ("_core",)
    _core: _Ring
    state: type = None
    _family: dict = {}

    def __init__(self, key, core: _Ring):
        if key is not _KEY:
            raise TypeError(f"{type(self).__name__} values come from IxgbeNic")
        super().__init__()
        self._core = core
        core.holder = self

    def __class_getitem__(cls, state):
        return cls._family[state]

    def _check_live(self):
        super()._check_live()
        self._core.nic._check_live()

    def _become(self, cls):
        self._consume()
        return cls(_KEY, self._core)

    @property
    def index(self) -> int:
        return self._core.index

    @property
    @nomutates("_next_index", "_clean_index")
    def next_index(self) -> int:
        self._check_live()
        return self._core._next_index

    @property
    def ring_size(self) -> int:
        return self._core.slots

    def __repr__(self):
        tail = "" if self._live else " consumed"
        return f"<{type(self).__name__} {self._core.index}{tail}>"


@fields_type("_core", "_Ring")
class RxQueue(_Queue):
    __slots__ = ()
    _family: dict = {}


@fields_type("_core", "_Ring")
class TxQueue(_Queue):
    __slots__ = ()
    _family: dict = {}


class _Receiving:
    __slots__ = ()

    def receive_batch(self, max_packets: int) -> list[bytes]:
        """Collect up to ``max_packets`` completed descriptors in ring order and re-arm them."""
        self._check_live()
        if max_packets < 0:
            raise ValueError("max_packets must be non-negative")
        core = self._core
        regs = core.nic._regs
        restricted = core.nic.config.restricted
        out = []
        i = core._next_index
        while len(out) < max_packets:
            addr, length, _cso, _cmd, status, _css, _vlan = core.ring.record(i)
            if not status & STATUS_DD:
                break
            buf = core._desc_buf[i]
            out.append(core.buffers[buf].read(0, length))
            if not restricted:
                core._pool.append(buf)
                buf = core._pool.popleft()
                core._desc_buf[i] = buf
            core.ring.set_record(i, core.buffers[buf].phys_addr, 0, 0, 0, 0, 0, 0)
            i = (i + 1) % core.slots
        if out:
            core._next_index = i
            regs.rdt_write(core.index, (i - 1) % core.slots)
        return out


class _Transmitting:
    __slots__ = ()

    def _reclaim(self):
        core = self._core
        while core._clean_index != core._next_index:
            status = core.ring.record(core._clean_index)[4]
            if not status & STATUS_DD:
                break
            core._clean_index = (core._clean_index + 1) % core.slots

    def send_batch(self, packets) -> int:
        """Queue as many of ``packets`` as the ring has room for; returns how many."""
        self._check_live()
        packets = list(packets)
        for p in packets:
            if len(p) > BUFFER_SIZE:
                raise PacketTooLarge(f"{len(p)}-byte packet exceeds {BUFFER_SIZE}-byte buffer")
        if not packets:
            return 0
        core = self._core
        self._reclaim()
        room = (core._clean_index - core._next_index - 1) % core.slots
        sent = 0
        i = core._next_index
        for p in packets[:room]:
            buf = core.buffers[i]
            buf.write(0, p)
            core.ring.set_record(i, buf.phys_addr, len(p), 0, TX_CMD_EOP | TX_CMD_IFCS | TX_CMD_RS, 0, 0, 0)
            i = (i + 1) % core.slots
            sent += 1
        if sent:
            core._next_index = i
            core.nic._regs.tdt_write(core.index, i)
        return sent

    @property
    @nomutates("_next_index", "_clean_index")
    def in_flight(self) -> int:
        core = self._core
        return (core._next_index - core._clean_index) % core.slots


@not_duplicable
@fields_type("_core", "_Ring")
class DisabledRxQueue(RxQueue):
    __slots__ = ()
    state = Disabled

    @nomutates("_filters", "_clean_index")
    def enable(self) -> "EnabledRxQueue":
        self._check_live()
        core = self._core
        regs = core.nic._regs
        regs.rx_queue_enable(core.index)
        # descriptors are armed afresh; anything left from an earlier enable is discarded
        core._next_index = regs.rdh_read(core.index)
        for i in range(core.slots):
            core.ring.set_record(i, core.buffers[core._desc_buf[i]].phys_addr, 0, 0, 0, 0, 0, 0)
        regs.rdt_write(core.index, (core._next_index - 1) % core.slots)
        return self._become(EnabledRxQueue)


@not_duplicable
@fields_type("_core", "_Ring")
class EnabledRxQueue(_Receiving, RxQueue):
    __slots__ = ()
    state = Enabled

    @nomutates("_next_index", "_clean_index", "_filters")
    def disable(self) -> DisabledRxQueue:
        self._check_live()
        self._core.nic._regs.rx_queue_disable(self._core.index)
        return self._become(DisabledRxQueue)


@not_duplicable
@fields_type("_core", "_Ring")
class FilteredRxQueue(_Receiving, RxQueue):
    __slots__ = ()
    state = L3L4Filter

    @property
    @nomutates("_next_index", "_clean_index", "_filters")
    def filter_slots(self) -> tuple[int, ...]:
        return tuple(sorted(self._core.filters))

    @nomutates("_next_index", "_clean_index", "_filters")
    def unfilter(self) -> EnabledRxQueue:
        """Back to plain Enabled once every filter on this queue has been removed."""
        self._check_live()
        if self._core.filters:
            raise StateConflict(f"queue {self.index} still has filters in slots {self.filter_slots}")
        return self._become(EnabledRxQueue)


@not_duplicable
@fields_type("_core", "_Ring")
class RssRxQueue(_Receiving, RxQueue):
    __slots__ = ()
    state = RSS


@not_duplicable
@fields_type("_core", "_Ring")
@private_fields("_proof")
class DisabledTxQueue(TxQueue):
    """Holds the TxQueueDisabled proof needed to reposition the head before enabling."""

    __slots__ = ("_proof",)
    state = Disabled

    def __init__(self, key, core, proof=None):
        super().__init__(key, core)
        if proof is None:
            proof = core.nic._regs.txdctl_disable(core.index)
        self._proof = proof

    def enable(self) -> "EnabledTxQueue":
        self._check_live()
        core = self._core
        regs = core.nic._regs
        # unsent descriptors from an earlier enable are abandoned
        core._clean_index = core._next_index
        regs.tdh_write(core.index, core._next_index, self._proof)
        regs.tdt_write(core.index, core._next_index)
        regs.txdctl_enable(core.index)
        return self._become(EnabledTxQueue)


@not_duplicable
@fields_type("_core", "_Ring")
class EnabledTxQueue(_Transmitting, TxQueue):
    __slots__ = ()
    state = Enabled

    @nomutates("_next_index", "_clean_index", "_filters")
    def disable(self) -> DisabledTxQueue:
        self._check_live()
        proof = self._core.nic._regs.txdctl_disable(self._core.index)
        self._consume()
        return DisabledTxQueue(_KEY, self._core, proof)


for _cls in (DisabledRxQueue, EnabledRxQueue, FilteredRxQueue, RssRxQueue):
    RxQueue._family[_cls.state] = _cls
for _cls in (DisabledTxQueue, EnabledTxQueue):
    TxQueue._family[_cls.state] = _cls


# filters

@not_duplicable
@private_fields("_flow", "_target", "_slot", "_nic")
class FilterEntry(Linear):
    __slots__ = ("_flow", "_target", "_slot", "_nic")

    def __init__(self, key, nic, flow: FiveTuple, queue: int, slot: int):
        if key is not _KEY:
            raise TypeError("FilterEntry values come from IxgbeNic.add_filter")
        super().__init__()
        self._nic = nic
        self._flow = flow
        self._target = queue
        self._slot = slot

    @property
    def flow(self) -> FiveTuple:
        return self._flow

    @property
    def queue(self) -> int:
        return self._target

    @property
    def slot(self) -> int:
        return self._slot

    def __repr__(self):
        tail = "" if self._live else " consumed"
        return f"<FilterEntry slot={self._slot} {self._flow} -> q{self._target}{tail}>"


def filter_key(flow: FiveTuple) -> tuple:
    """What the hardware compares: addresses, ports and the 2-bit protocol code."""
    return (int(flow.src_ip), int(flow.dst_ip), flow.src_port, flow.dst_port, protocol_code(flow.protocol))


# the NIC

@not_duplicable
@private_fields("_pci", "_regs", "_filters", "_rx", "_tx")
@fields_type("_pci", "PciDevice")
@fields_type("_regs", "RegisterFile")
class IxgbeNic(Linear):
    """Software representation of one 82599 port; its methods are the only path to the device."""

    __slots__ = ("_pci", "_regs", "_mem", "config", "_bar", "_rx", "_tx", "_untaken",
                 "_filters", "_entries", "_rss")
    _pci: PciDevice
    _regs: RegisterFile

    def __init__(self, key, pci: PciDevice, regs: RegisterFile, mem, config: DriverConfig, bar):
        if key is not _KEY:
            raise TypeError("IxgbeNic values come from init()")
        super().__init__()
        self._pci = pci
        self._regs = regs
        self._mem = mem
        self.config = config
        self._bar = bar
        self._rx: list[_Ring] = []
        self._tx: list[_Ring] = []
        self._untaken: dict[tuple[str, int], _Queue] = {}
        self._filters: dict[int, tuple] = {}
        self._entries: dict[int, FilterEntry] = {}
        self._rss: frozenset[int] = frozenset()

    @property
    def location(self) -> PciLocation:
        return self._pci.location

    @property
    @nocalls("_write", "rxctrl_rx_enable", "fctrl_write")
    def link_up(self) -> bool:
        self._check_live()
        return self._regs.link_up

    @nomutates("_next_index", "_clean_index", "_filters")
    @nocalls("_write", "set_record")
    def stats(self) -> dict[str, int]:
        self._check_live()
        return {"gprc": self._regs.gprc, "gptc": self._regs.gptc}

    @nomutates("_next_index", "_clean_index", "_filters")
    def firmware_mode(self):
        self._check_live()
        return self._regs.fwsm_mode()

    def _take(self, kind: str, index: int):
        self._check_live()
        try:
            return self._untaken.pop((kind, index))
        except KeyError:
            raise StateConflict(f"{kind} queue {index} does not exist or was already taken") from None

    @nomutates("_next_index", "_clean_index", "_filters")
    def take_rx_queue(self, index: int) -> DisabledRxQueue:
        return self._take("rx", index)

    @nomutates("_next_index", "_clean_index", "_filters")
    def take_tx_queue(self, index: int) -> DisabledTxQueue:
        return self._take("tx", index)

    # bookkeeping views for the cross-check against the device
    @nomutates("_next_index", "_clean_index", "_filters")
    @nocalls("_write", "set_record", "rdt_write", "tdt_write")
    def bookkeeping(self) -> dict:
        """Driver-side state in the same shape the device model reports it."""
        self._check_live()
        rx = {}
        for core in self._rx:
            armed = core.holder.state is not Disabled
            rx[core.index] = {"tail": (core._next_index - 1) % core.slots if armed else None,
                              "next_index": core._next_index, "state": core.holder.state.__name__}
        tx = {}
        for core in self._tx:
            tx[core.index] = {"tail": core._next_index, "next_index": core._next_index,
                              "state": core.holder.state.__name__}
        filters = {slot: key + (queue,) for slot, (key, queue) in self._filters.items()}
        return {"rx": rx, "tx": tx, "filters": filters, "rss": sorted(self._rss)}

    def add_filter(self, rxq, flow: FiveTuple) -> tuple[FilteredRxQueue, FilterEntry]:
        """Route ``flow`` to ``rxq`` through the lowest free 5-tuple slot."""
        self._check_live()
        if isinstance(rxq, RssRxQueue):
            raise StateConflict(f"queue {rxq.index} distributes by RSS; it cannot take a 5-tuple filter")
        if not isinstance(rxq, (EnabledRxQueue, FilteredRxQueue)):
            raise TypeError("add_filter takes RxQueue[Enabled] or RxQueue[L3L4Filter]")
        rxq._check_live()
        if rxq._core.nic is not self:
            raise ValueError("queue belongs to a different NIC")
        if not isinstance(flow, FiveTuple):
            raise TypeError("add_filter takes a FiveTuple")
        if flow.protocol not in (TCP, UDP, SCTP):
            raise InvalidConfig(f"5-tuple filters match TCP, UDP or SCTP, not protocol {flow.protocol}")
        key = filter_key(flow)
        for slot, (existing, queue) in self._filters.items():
            if existing == key:
                raise DuplicateFilter(f"identical filter already in slot {slot} (queue {queue})")
        slot = next((s for s in range(rm.FILTER_SLOTS) if s not in self._filters), None)
        if slot is None:
            raise TableFull(f"all {rm.FILTER_SLOTS} 5-tuple filter slots are in use")
        self._regs.five_tuple_filter_write(slot, flow, rxq.index)
        self._filters[slot] = (key, rxq.index)
        rxq._core.filters.add(slot)
        entry = FilterEntry(_KEY, self, flow, rxq.index, slot)
        self._entries[slot] = entry
        if isinstance(rxq, FilteredRxQueue):
            return rxq, entry
        return rxq._become(FilteredRxQueue), entry

    def remove_filter(self, entry: FilterEntry):
        self._check_live()
        if not isinstance(entry, FilterEntry):
            raise TypeError("remove_filter takes a FilterEntry")
        if entry._nic is not self:
            raise ValueError("filter entry belongs to a different NIC")
        entry._consume()
        slot = entry._slot
        self._regs.five_tuple_filter_clear(slot)
        del self._filters[slot]
        del self._entries[slot]
        self._rx[entry._target].filters.discard(slot)

    def configure_rss(self, rxqs) -> list[RssRxQueue]:
        """Spread traffic over ``rxqs`` through the redirection table."""
        self._check_live()
        rxqs = list(rxqs)
        if not rxqs:
            raise ValueError("RSS needs at least one queue")
        for q in rxqs:
            if isinstance(q, FilteredRxQueue):
                raise StateConflict(f"queue {q.index} is used by 5-tuple filters; it cannot join RSS")
            if isinstance(q, RssRxQueue):
                raise StateConflict(f"queue {q.index} is already in RSS")
            if not isinstance(q, EnabledRxQueue):
                raise TypeError("configure_rss takes RxQueue[Enabled] values")
            q._check_live()
            if q._core.nic is not self:
                raise ValueError("queue belongs to a different NIC")
        indices = [q.index for q in rxqs]
        if len(set(indices)) != len(indices):
            raise ValueError("duplicate queue in RSS set")
        if self._rss:
            raise StateConflict(f"RSS is already configured over queues {sorted(self._rss)}")
        if max(indices) >= RSS_QUEUES:
            raise ValueOutOfRange(f"RSS reaches queues 0..{RSS_QUEUES - 1} only")
        ordered = sorted(indices)
        self._regs.reta_write(ordered[i % len(ordered)] for i in range(rm.RETA_ENTRIES))
        self._regs.mrqc_rss(True)
        self._rss = frozenset(indices)
        return [q._become(RssRxQueue) for q in rxqs]

    def drop(self):
        """Reset the device, release every mapping and return the PciDevice."""
        self._check_live()
        for entry in self._entries.values():
            entry._consume()
        self._entries.clear()
        self._filters.clear()
        self._regs.ctrl_reset()
        for core in self._rx + self._tx:
            if core.holder is not None and core.holder._live:
                core.holder._consume()
            core.ring._release()
            for view in core.buffers:
                view._release()
            core.ring_pages.drop()
            core.buf_pages.drop()
        self._untaken.clear()
        self._consume()
        self._regs.release()._release()
        self._bar.drop()
        return self._pci

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if self._live:
            self.drop()

    def __repr__(self):
        tail = "" if self._live else " consumed"
        return f"<IxgbeNic {self._pci.location}{tail}>"


def _map_region(mem, npages: int, frames=None, flags=memory.MapFlags.READ_WRITE):
    pages = mem.pages.allocate(npages)
    try:
        frames = frames if frames is not None else mem.frames.allocate(npages)
    except Exception:
        pages.drop()
        raise
    return mem.map(pages, frames, flags)


def _build_ring(nic: IxgbeNic, mem, kind: str, index: int, nbuffers: int) -> _Ring:
    config = nic.config
    layout = struct.Struct(DESCRIPTOR.format)
    ring_pages = _map_region(mem, config.ring_pages)
    try:
        buf_pages = _map_region(mem, _span_pages(nbuffers * BUFFER_SIZE))
    except Exception:
        ring_pages.drop()
        raise
    ring = ring_pages.carve(0, config.ring_size * DESCRIPTOR.size, RING_ALIGN, layout)
    buffers = [buf_pages.carve(i * BUFFER_SIZE, BUFFER_SIZE, BUFFER_SIZE) for i in range(nbuffers)]
    return _Ring(nic, index, kind, ring_pages, buf_pages, ring, buffers)


def init(pci: PciDevice, mem, config: DriverConfig = DriverConfig()) -> IxgbeNic:
    """Bring up the port behind ``pci``. On failure nothing is kept and ``pci`` stays valid."""
    if not isinstance(pci, PciDevice):
        raise TypeError("init takes a PciDevice")
    if not isinstance(config, DriverConfig):
        raise TypeError("init takes a DriverConfig")
    pci._check_live()
    if mem.device_frames is None:
        raise InvalidConfig("memory system has no device window for the register BAR")
    bar_frames = mem.device_frames.allocate_at(pci.bar0_frame, BAR_FRAMES)
    try:
        bar = _map_region(mem, BAR_FRAMES, bar_frames, memory.MapFlags.DEVICE)
    except Exception:
        bar_frames.drop()
        raise
    regs = RegisterFile(bar.carve(0, rm.REGISTER_MAP.span, 4))
    nic = IxgbeNic(_KEY, pci, regs, mem, config, bar)
    try:
        _bring_up(nic, mem)
    except Exception:
        for core in nic._rx + nic._tx:
            core.ring_pages.drop()
            core.buf_pages.drop()
        bar.drop()
        raise
    nic._pci = pci._move()
    return nic


def _bring_up(nic: IxgbeNic, mem):
    regs = nic._regs
    config = nic.config
    regs.ctrl_reset()
    regs.eimc_write(ALL_INTERRUPTS)
    regs.rdrxctl_write(RdRxCtlOptions(crc_strip=False))
    regs.dtxmxszrq_write(rm.DTXMXSZRQ_MAX_BYTES)
    regs.dmatxctl_tx_enable()
    rx_off = regs.rxctrl_rx_disable()
    fctrl = regs.fctrl_write(FilterCtrlFlags.BROADCAST_ACCEPT_MODE, rx_off)
    for q in range(config.rx_queues):
        core = _build_ring(nic, mem, "rx", q, config.rx_buffers)
        nic._rx.append(core)
        regs.rx_ring_write(q, core.ring.phys_addr, core.ring.size)
        regs.srrctl_write(q, BUFFER_SIZE // 1024)
        nic._untaken[("rx", q)] = DisabledRxQueue(_KEY, core)
    for q in range(config.tx_queues):
        core = _build_ring(nic, mem, "tx", q, config.ring_size)
        nic._tx.append(core)
        regs.tx_ring_write(q, core.ring.phys_addr, core.ring.size)
        nic._untaken[("tx", q)] = DisabledTxQueue(_KEY, core)
    regs.rxctrl_rx_enable(fctrl)

