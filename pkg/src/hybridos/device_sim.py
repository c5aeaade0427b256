"""Behavioral model of the 82599 subset, with a datasheet oracle on every register write.

The model never rejects a write. It applies it, and appends a
:class:`Violation` to an append-only log whenever the write breaks a rule
derived from the shared register map (reserved bits, required bit patterns)
or from the small ordering-rule table below.
"""
from __future__ import annotations

import enum
import struct
from collections import deque
from dataclasses import dataclass

from . import regmap as rm
from .errors import OutOfBounds, UnknownOffset
from .packet import FiveTuple, five_tuple, rss_hash

DESCRIPTOR = struct.Struct("<QHBBBBH")
TX_CMD_EOP = 1 << 0
TX_CMD_IFCS = 1 << 1
TX_CMD_RS = 1 << 3
STATUS_DD = 1 << 0
STATUS_EOP = 1 << 1


class ViolationKind(enum.Enum):
    RESERVED_BIT_WRITE = "ReservedBitWrite"
    ORDERING_VIOLATION = "OrderingViolation"
    REQUIRED_BITS_CLEARED = "RequiredBitsCleared"
    HEAD_TAIL_OUT_OF_RANGE = "HeadTailOutOfRange"
    FILTER_MISCONFIG = "FilterMisconfig"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    register: str
    detail: str


@dataclass(frozen=True)
class OrderingRule:
    """Writing ``target`` is illegal while ``guard`` (same instance index) has ``guard_bits`` set."""

    target: str
    guard: str
    guard_bits: int
    reason: str


ORDERING_RULES = (
    OrderingRule("FCTRL", "RXCTRL", rm.RXCTRL_RXEN, "FCTRL written while RXCTRL.RXEN is set"),
    OrderingRule("TDH", "TXDCTL", rm.TXDCTL_ENABLE, "TDH written while TXDCTL.ENABLE is set"),
)


@dataclass(frozen=True)
class DeviceFilter:
    slot: int
    flow: FiveTuple
    protocol_code: int
    mask: int
    queue: int


@dataclass(frozen=True)
class RingState:
    base: int
    slots: int
    head: int
    tail: int
    enabled: bool


class SimNic:
    """One 82599 port: register storage, ring engines, filter engine, link peer."""

    def __init__(self, phys, regmap: rm.RegisterMap = rm.REGISTER_MAP, name: str = "nic"):
        self.name = name
        self._phys = phys
        self._map = regmap
        self._values: dict[int, int] = {}
        self._violations: list[Violation] = []
        self._pending: deque[bytes] = deque()
        self._peer = None
        self._fctrl_since_rx_disable = False
        self._reported_conflicts: set[tuple[int, int]] = set()
        self.delivered = 0
        self.received = 0
        self._reset()

    # wiring
    def connect(self, peer):
        """Attach the link partner: another SimNic or any callable taking a frame."""
        self._peer = peer
        self._set("LINKS", rm.LINKS_UP)

    def inject(self, frame: bytes):
        """A frame arrives on the wire."""
        self._pending.append(bytes(frame))

    def __call__(self, frame: bytes):
        self.inject(frame)

    @property
    def violations(self) -> tuple[Violation, ...]:
        return tuple(self._violations)

    @property
    def held(self) -> int:
        return len(self._pending)

    # register storage
    def _reset(self):
        self._values = {}
        for spec in self._map:
            for i in range(spec.count):
                self._values[spec.offset_of(i)] = spec.default
        if self._peer is not None:
            self._set("LINKS", rm.LINKS_UP)
        self._fctrl_since_rx_disable = False

    def _get(self, name: str, index: int = 0) -> int:
        return self._values[self._map.offset(name, index)]

    def _set(self, name: str, value: int, index: int = 0):
        self._values[self._map.offset(name, index)] = value & 0xFFFFFFFF

    def _log(self, kind: ViolationKind, register: str, detail: str):
        self._violations.append(Violation(kind, register, detail))

    def mmio_read(self, offset: int) -> int:
        if self._map.decode(offset) is None:
            raise UnknownOffset(f"no register at {offset:#x}")
        return self._values[offset]

    def mmio_write(self, offset: int, value: int):
        decoded = self._map.decode(offset)
        if decoded is None:
            raise UnknownOffset(f"no register at {offset:#x}")
        spec, index = decoded
        label = spec.name if spec.count == 1 else f"{spec.name}[{index}]"
        value &= 0xFFFFFFFF
        if spec.access in ("ro", "reserved"):
            self._log(ViolationKind.RESERVED_BIT_WRITE, label, f"write of {value:#x} to {spec.access} register")
            return
        if value & spec.reserved_mask:
            self._log(ViolationKind.RESERVED_BIT_WRITE, label,
                      f"reserved bits {value & spec.reserved_mask:#x} set in {value:#x}")
        if value & spec.required_mask != spec.required_value:
            self._log(ViolationKind.REQUIRED_BITS_CLEARED, label,
                      f"bits {spec.required_mask:#x} must read {spec.required_value:#x}, "
                      f"written {value & spec.required_mask:#x}")
        for rule in ORDERING_RULES:
            if rule.target == spec.name:
                guard_index = index if self._map[rule.guard].count > 1 else 0
                if self._get(rule.guard, guard_index) & rule.guard_bits:
                    self._log(ViolationKind.ORDERING_VIOLATION, label, rule.reason)
        value &= ~spec.reserved_mask
        handler = getattr(self, f"_on_{spec.name.lower()}", None)
        if handler is None:
            self._values[offset] = value
        else:
            handler(index, value)

    # side effects
    def _on_ctrl(self, index, value):
        if value & rm.CTRL_RST:
            self._reset()
        else:
            self._set("CTRL", value)

    def _on_rxctrl(self, index, value):
        was = self._get("RXCTRL") & rm.RXCTRL_RXEN
        now = value & rm.RXCTRL_RXEN
        if now and not was and not self._fctrl_since_rx_disable:
            self._log(ViolationKind.ORDERING_VIOLATION, "RXCTRL",
                      "RXCTRL.RXEN set without FCTRL being written since receive was disabled")
        if was and not now:
            self._fctrl_since_rx_disable = False
        self._set("RXCTRL", value)

    def _on_fctrl(self, index, value):
        if not self._get("RXCTRL") & rm.RXCTRL_RXEN:
            self._fctrl_since_rx_disable = True
        self._set("FCTRL", value)

    def _on_rdrxctl(self, index, value):
        # DMAIDONE is read-only and always reports done in this model
        self._set("RDRXCTL", value | rm.RDRXCTL_DMAIDONE)

    def _on_rdlen(self, index, value):
        self._set("RDLEN", value, index)
        self._set("RDH", 0, index)

    def _on_tdlen(self, index, value):
        self._set("TDLEN", value, index)
        self._set("TDH", 0, index)

    def _tail_check(self, name: str, len_reg: str, index: int, value: int):
        slots = self._get(len_reg, index) // 16
        if value >= max(slots, 1):
            self._log(ViolationKind.HEAD_TAIL_OUT_OF_RANGE, f"{name}[{index}]",
                      f"{name} {value} outside ring of {slots} descriptors")
            return False
        return True

    def _on_rdt(self, index, value):
        if self._tail_check("RDT", "RDLEN", index, value):
            self._set("RDT", value, index)

    def _on_tdt(self, index, value):
        if self._tail_check("TDT", "TDLEN", index, value):
            self._set("TDT", value, index)

    def _on_tdh(self, index, value):
        if self._tail_check("TDH", "TDLEN", index, value):
            self._set("TDH", value, index)

    def _on_ftqf(self, index, value):
        self._set("FTQF", value, index)
        self._check_filter_rss()

    def _on_l34timir(self, index, value):
        self._set("L34TIMIR", value, index)
        self._check_filter_rss()

    def _on_reta(self, index, value):
        self._set("RETA", value, index)
        self._check_filter_rss()

    def _on_mrqc(self, index, value):
        self._set("MRQC", value)
        self._check_filter_rss()

    # filter engine
    def filters(self) -> dict[int, DeviceFilter]:
        """Enabled 5-tuple filters as decoded from the filter registers."""
        out = {}
        for slot in range(rm.FILTER_SLOTS):
            ftqf = self._get("FTQF", slot)
            if not ftqf & rm.FTQF_ENABLE:
                continue
            ports = self._get("SDPQF", slot)
            flow = FiveTuple(self._get("SAQF", slot), self._get("DAQF", slot),
                             ports & 0xFFFF, ports >> 16, 0)
            queue = (self._get("L34TIMIR", slot) & rm.L34TIMIR_QUEUE) >> rm.L34TIMIR_QUEUE_SHIFT
            out[slot] = DeviceFilter(slot, flow, ftqf & rm.FTQF_PROTOCOL, (ftqf >> rm.FTQF_MASK_SHIFT) & 0x1F, queue)
        return out

    def rss_enabled(self) -> bool:
        return bool(self._get("MRQC") & rm.MRQC_RSS)

    def reta(self) -> list[int]:
        table = []
        for reg in range(rm.RETA_ENTRIES // 4):
            word = self._get("RETA", reg)
            table.extend((word >> (8 * k)) & 0xF for k in range(4))
        return table

    def _check_filter_rss(self):
        if not self.rss_enabled():
            return
        rss_queues = set(self.reta())
        for slot, f in self.filters().items():
            key = (slot, f.queue)
            if f.queue in rss_queues and key not in self._reported_conflicts:
                self._reported_conflicts.add(key)
                self._log(ViolationKind.FILTER_MISCONFIG, f"FTQF[{slot}]",
                          f"filter targets queue {f.queue}, which RSS also uses")

    @staticmethod
    def _filter_matches(f: DeviceFilter, flow: FiveTuple) -> bool:
        from .nic_hal import protocol_code
        checks = (
            (0, int(f.flow.src_ip) == int(flow.src_ip)),
            (1, int(f.flow.dst_ip) == int(flow.dst_ip)),
            (2, f.flow.src_port == flow.src_port),
            (3, f.flow.dst_port == flow.dst_port),
            (4, f.protocol_code == protocol_code(flow.protocol)),
        )
        return all(ok or f.mask & (1 << bit) for bit, ok in checks)

    def classify(self, frame: bytes) -> int:
        """Receive queue for ``frame``: 5-tuple filter, else RSS, else queue 0."""
        return self._classifier()(frame)

    def _classifier(self):
        # filter and RSS registers decoded once; valid until the next register write
        self._check_filter_rss()
        filters = [f for _, f in sorted(self.filters().items())]
        reta = self.reta() if self.rss_enabled() else None

        def classify(frame: bytes) -> int:
            flow = five_tuple(frame)
            if flow is None:
                return 0
            for f in filters:
                if self._filter_matches(f, flow):
                    return f.queue
            if reta is not None:
                return reta[rss_hash(flow) % rm.RETA_ENTRIES]
            return 0
        return classify

    # ring engines
    def ring(self, direction: str, queue: int) -> RingState:
        if direction == "rx":
            names, enable = ("RDBAL", "RDBAH", "RDLEN", "RDH", "RDT", "RXDCTL"), rm.RXDCTL_ENABLE
        else:
            names, enable = ("TDBAL", "TDBAH", "TDLEN", "TDH", "TDT", "TXDCTL"), rm.TXDCTL_ENABLE
        lo, hi, length, head, tail, ctl = (self._get(n, queue) for n in names)
        return RingState(lo | hi << 32, length // 16, head, tail, bool(ctl & enable))

    def _descriptor(self, ring: RingState, i: int):
        addr = ring.base + i * DESCRIPTOR.size
        return addr, DESCRIPTOR.unpack(self._phys.dma_read(addr, DESCRIPTOR.size))

    def step(self, budget: int):
        """Process up to ``budget`` transmit and ``budget`` receive descriptors."""
        if budget <= 0:
            return
        self._step_tx(budget)
        self._step_rx(budget)

    def _step_tx(self, budget: int):
        if not self._get("DMATXCTL") & rm.DMATXCTL_TE:
            return
        for q in range(self._map["TDT"].count):
            ring = self.ring("tx", q)
            if not ring.enabled or ring.slots == 0:
                continue
            head = ring.head
            while budget and head != ring.tail:
                try:
                    addr, (buf, length, cso, cmd, status, css, vlan) = self._descriptor(ring, head)
                    frame = self._phys.dma_read(buf, length)
                except OutOfBounds as exc:
                    self._log(ViolationKind.HEAD_TAIL_OUT_OF_RANGE, f"TDT[{q}]", f"descriptor {head}: {exc}")
                    frame = None
                    addr = None
                if frame is not None:
                    if self._peer is not None:
                        self._peer(frame)
                    self.delivered += 1
                    self._set("GPTC", self._get("GPTC") + 1)
                    if cmd & TX_CMD_RS:
                        self._phys.dma_write(addr, DESCRIPTOR.pack(buf, length, cso, cmd, status | STATUS_DD, css, vlan))
                head = (head + 1) % ring.slots
                budget -= 1
            self._set("TDH", head, q)

    def _step_rx(self, budget: int):
        if not self._get("RXCTRL") & rm.RXCTRL_RXEN or not self._pending:
            return
        rings = {q: self.ring("rx", q) for q in range(self._map["RDT"].count)}
        open_queues = {q for q, r in rings.items() if r.enabled and r.slots and r.head != r.tail}
        kept = []
        heads = {}
        classify = self._classifier()
        while self._pending and budget and open_queues:
            frame = self._pending.popleft()
            q = classify(frame)
            ring = rings[q]
            head = heads.get(q, ring.head)
            if q not in open_queues:
                kept.append(frame)
                continue
            try:
                addr, (buf, *_rest) = self._descriptor(ring, head)
                self._phys.dma_write(buf, frame)
                self._phys.dma_write(addr, DESCRIPTOR.pack(buf, len(frame), 0, 0, STATUS_DD | STATUS_EOP, 0, 0))
            except OutOfBounds as exc:
                self._log(ViolationKind.HEAD_TAIL_OUT_OF_RANGE, f"RDT[{q}]", f"descriptor {head}: {exc}")
                open_queues.discard(q)
                kept.append(frame)
                continue
            heads[q] = (head + 1) % ring.slots
            if heads[q] == ring.tail:
                open_queues.discard(q)
            self.received += 1
            self._set("GPRC", self._get("GPRC") + 1)
            budget -= 1
        for q, head in heads.items():
            self._set("RDH", head, q)
        # frames that found no room keep their place ahead of the unexamined rest
        self._pending.extendleft(reversed(kept))
