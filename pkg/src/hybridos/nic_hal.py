"""Register-level interface to the 82599 that only admits datasheet-valid traffic.

Every register is reached through :class:`RegisterFile` at the offset given
by the shared register map. Registers with restrictions have no raw write:
their methods accept only typed values (flag sets whose members are the
defined bits, bounded integers) and, where the datasheet imposes an order,
a single-use proof token returned by the preceding step.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

from . import regmap as rm
from .assertions import nocalls, not_duplicable, private_fields
from .errors import StaleTokenError, TokenError, ValueOutOfRange
from .mem import TypedView
from .packet import SCTP, TCP, UDP, FiveTuple
from .rep_core import Linear

_KEY = object()


class FilterCtrlFlags(enum.Flag):
    STORE_BAD_PACKETS = rm.FCTRL_SBP
    MULTICAST_PROMISCUOUS_ENABLE = rm.FCTRL_MPE
    UNICAST_PROMISCUOUS_ENABLE = rm.FCTRL_UPE
    BROADCAST_ACCEPT_MODE = rm.FCTRL_BAM


InterruptMaskFlags = enum.Flag("InterruptMaskFlags", [
    *((f"RTXQ_{i}", 1 << i) for i in range(16)),
    ("FLOW_DIRECTOR", 1 << 16),
    ("RX_MISS", 1 << 17),
    ("PCI_EXCEPTION", 1 << 18),
    ("MAILBOX", 1 << 19),
    ("LSC", 1 << 20),
    ("LINKSEC", 1 << 21),
    ("MNG", 1 << 22),
    ("GPI_SDP0", 1 << 24),
    ("GPI_SDP1", 1 << 25),
    ("GPI_SDP2", 1 << 26),
    ("GPI_SDP3", 1 << 27),
    ("ECC", 1 << 28),
    ("TCP_TIMER", 1 << 30),
], module=__name__)

ALL_INTERRUPTS = InterruptMaskFlags(sum(m.value for m in InterruptMaskFlags))


@dataclass(frozen=True)
class RdRxCtlOptions:
    crc_strip: bool = False


class FirmwareMode(enum.Enum):
    NONE = 0
    MANAGEABILITY = 1
    PASS_THROUGH = 2
    HOST_INTERFACE = 4
    INVALID = -1


_L4_CODES = {TCP: 0, UDP: 1, SCTP: 2}


def protocol_code(protocol: int) -> int:
    return _L4_CODES.get(protocol, 3)


class _Token(Linear):
    __slots__ = ("_owner", "_generation")

    def __init__(self, key, owner, generation: int):
        if key is not _KEY:
            raise TypeError(f"{type(self).__name__} can only be obtained from the operation it proves")
        super().__init__()
        self._owner = owner
        self._generation = generation


@not_duplicable
@private_fields("_owner", "_generation")
class RxCtrlDisabled(_Token):
    """Proof that RXCTRL.RXEN was cleared and has not been set since."""
    __slots__ = ()


@not_duplicable
@private_fields("_owner", "_generation")
class FilterCtrlSet(_Token):
    """Proof that FCTRL was written while receive was disabled."""
    __slots__ = ()


@not_duplicable
@private_fields("_owner", "_generation", "_queue")
class TxQueueDisabled(_Token):
    """Proof that one transmit queue's TXDCTL.ENABLE is clear."""
    __slots__ = ("_queue",)

    def __init__(self, key, owner, generation: int, queue: int):
        super().__init__(key, owner, generation)
        self._queue = queue

    @property
    def queue(self) -> int:
        return self._queue


@not_duplicable
@private_fields("_view", "_rx_generation", "_tx_generation")
class RegisterFile(Linear):
    """Typed overlay of the 82599 register block on a carved device-memory view."""

    __slots__ = ("_view", "_map", "_rx_generation", "_tx_generation")

    def __init__(self, view: TypedView, regmap: rm.RegisterMap = rm.REGISTER_MAP):
        if not isinstance(view, TypedView):
            raise TypeError("RegisterFile overlays a carved TypedView")
        if view.size < regmap.span:
            raise ValueError(f"view of {view.size} bytes cannot hold {regmap.span} bytes of registers")
        super().__init__()
        self._view = view
        self._map = regmap
        self._rx_generation = 0
        self._tx_generation: dict[int, int] = {}

    # layout access; the only place offsets are computed
    def _read(self, name: str, index: int = 0) -> int:
        self._check_live()
        return self._view.read_u32(self._map.offset(name, index))

    def _write(self, name: str, value: int, index: int = 0):
        self._check_live()
        spec = self._map[name]
        if spec.access in ("ro", "reserved"):
            raise PermissionError(f"{name} is {spec.access}")
        self._view.write_u32(spec.offset_of(index), value & ~spec.reserved_mask & 0xFFFFFFFF)

    def _check_token(self, token, cls):
        if type(token) is not cls:
            raise TypeError(f"expected a {cls.__name__} proof, got {type(token).__name__}")
        token._check_live()
        if token._owner is not self:
            raise TokenError(f"{cls.__name__} was issued by a different register file")

    # read-only registers
    @property
    def gprc(self) -> int:
        return self._read("GPRC")

    @property
    def gptc(self) -> int:
        return self._read("GPTC")

    @property
    def status(self) -> int:
        return self._read("STATUS")

    @property
    def link_up(self) -> bool:
        return bool(self._read("LINKS") & rm.LINKS_UP)

    def fwsm_mode(self) -> FirmwareMode:
        """Firmware mode, or INVALID unless the firmware-valid bit is set."""
        fwsm = self._read("FWSM")
        if not fwsm & rm.FWSM_FW_VALID:
            return FirmwareMode.INVALID
        code = (fwsm & rm.FWSM_MODE_MASK) >> rm.FWSM_MODE_SHIFT
        try:
            return FirmwareMode(code)
        except ValueError:
            return FirmwareMode.INVALID

    # device-wide control
    def ctrl_reset(self):
        self._write("CTRL", rm.CTRL_RST)
        self._rx_generation += 1
        for q in self._tx_generation:
            self._tx_generation[q] += 1

    def eimc_write(self, mask):
        if not isinstance(mask, InterruptMaskFlags):
            raise TypeError("EIMC accepts InterruptMaskFlags only")
        self._write("EIMC", mask.value)

    def rxctrl_rx_disable(self) -> RxCtrlDisabled:
        self._write("RXCTRL", self._read("RXCTRL") & ~rm.RXCTRL_RXEN)
        return RxCtrlDisabled(_KEY, self, self._rx_generation)

    def fctrl_write(self, val: FilterCtrlFlags, rx_disabled: RxCtrlDisabled) -> FilterCtrlSet:
        if not isinstance(val, FilterCtrlFlags):
            raise TypeError("FCTRL accepts FilterCtrlFlags only")
        self._check_token(rx_disabled, RxCtrlDisabled)
        if rx_disabled._generation != self._rx_generation:
            raise StaleTokenError("receive was re-enabled after this RxCtrlDisabled was issued")
        rx_disabled._consume()
        self._write("FCTRL", val.value)
        return FilterCtrlSet(_KEY, self, self._rx_generation)

    def rxctrl_rx_enable(self, fctrl_set: FilterCtrlSet):
        self._check_token(fctrl_set, FilterCtrlSet)
        fctrl_set._consume()
        self._rx_generation += 1
        self._write("RXCTRL", self._read("RXCTRL") | rm.RXCTRL_RXEN)

    def rdrxctl_write(self, options: RdRxCtlOptions = RdRxCtlOptions()):
        if not isinstance(options, RdRxCtlOptions):
            raise TypeError("RDRXCTL accepts RdRxCtlOptions only")
        spec = self._map["RDRXCTL"]
        value = spec.required_value
        if options.crc_strip:
            value |= rm.RDRXCTL_CRCSTRIP
        self._write("RDRXCTL", value)

    def dtxmxszrq_write(self, max_bytes_req: int):
        if not isinstance(max_bytes_req, int) or not 0 <= max_bytes_req <= rm.DTXMXSZRQ_MAX_BYTES:
            raise ValueOutOfRange(f"DTXMXSZRQ field is 12 bits, got {max_bytes_req!r}")
        self._write("DTXMXSZRQ", max_bytes_req)

    def dmatxctl_tx_enable(self):
        self._write("DMATXCTL", rm.DMATXCTL_TE)

    # receive queues
    @staticmethod
    def _ring_args(phys_addr: int, length_bytes: int):
        if phys_addr % 128:
            raise ValueOutOfRange(f"ring base {phys_addr:#x} is not 128-byte aligned")
        if length_bytes <= 0 or length_bytes % 128 or length_bytes >= 1 << 20:
            raise ValueOutOfRange(f"ring length {length_bytes} must be a positive multiple of 128 below 1 MiB")

    def rx_ring_write(self, queue: int, phys_addr: int, length_bytes: int):
        self._ring_args(phys_addr, length_bytes)
        self._write("RDBAL", phys_addr & 0xFFFFFFFF, queue)
        self._write("RDBAH", phys_addr >> 32, queue)
        self._write("RDLEN", length_bytes, queue)

    def srrctl_write(self, queue: int, buffer_kb: int, drop_enable: bool = True):
        if not isinstance(buffer_kb, int) or not 1 <= buffer_kb <= rm.SRRCTL_BSIZEPACKET:
            raise ValueOutOfRange(f"receive buffer size {buffer_kb} KiB out of range")
        self._write("SRRCTL", buffer_kb | (rm.SRRCTL_DROP_EN if drop_enable else 0), queue)

    def rx_queue_enable(self, queue: int):
        self._write("RXDCTL", self._read("RXDCTL", queue) | rm.RXDCTL_ENABLE, queue)

    def rx_queue_disable(self, queue: int):
        self._write("RXDCTL", self._read("RXDCTL", queue) & ~rm.RXDCTL_ENABLE, queue)

    def rx_queue_enabled(self, queue: int) -> bool:
        return bool(self._read("RXDCTL", queue) & rm.RXDCTL_ENABLE)

    def _ring_slots(self, len_reg: str, queue: int) -> int:
        return self._read(len_reg, queue) // 16

    def rdt_write(self, queue: int, value: int):
        slots = self._ring_slots("RDLEN", queue)
        if not 0 <= value < slots:
            raise ValueOutOfRange(f"RDT {value} outside ring of {slots} descriptors")
        self._write("RDT", value, queue)

    def rdh_read(self, queue: int) -> int:
        return self._read("RDH", queue)

    def rdt_read(self, queue: int) -> int:
        return self._read("RDT", queue)

    # transmit queues
    def tx_ring_write(self, queue: int, phys_addr: int, length_bytes: int):
        self._ring_args(phys_addr, length_bytes)
        self._write("TDBAL", phys_addr & 0xFFFFFFFF, queue)
        self._write("TDBAH", phys_addr >> 32, queue)
        self._write("TDLEN", length_bytes, queue)

    def txdctl_disable(self, queue: int) -> TxQueueDisabled:
        self._write("TXDCTL", self._read("TXDCTL", queue) & ~rm.TXDCTL_ENABLE, queue)
        generation = self._tx_generation.setdefault(queue, 0)
        return TxQueueDisabled(_KEY, self, generation, queue)

    def tdh_write(self, queue: int, value: int, tx_disabled: TxQueueDisabled):
        self._check_token(tx_disabled, TxQueueDisabled)
        if tx_disabled._queue != queue:
            raise TokenError(f"proof is for transmit queue {tx_disabled._queue}, not {queue}")
        if tx_disabled._generation != self._tx_generation.get(queue, 0):
            raise StaleTokenError(f"transmit queue {queue} was enabled after this proof was issued")
        slots = self._ring_slots("TDLEN", queue)
        if not 0 <= value < slots:
            raise ValueOutOfRange(f"TDH {value} outside ring of {slots} descriptors")
        tx_disabled._consume()
        self._write("TDH", value, queue)

    def txdctl_enable(self, queue: int):
        self._tx_generation[queue] = self._tx_generation.get(queue, 0) + 1
        self._write("TXDCTL", self._read("TXDCTL", queue) | rm.TXDCTL_ENABLE, queue)

    def tx_queue_enabled(self, queue: int) -> bool:
        return bool(self._read("TXDCTL", queue) & rm.TXDCTL_ENABLE)

    def tdt_write(self, queue: int, value: int):
        slots = self._ring_slots("TDLEN", queue)
        if not 0 <= value < slots:
            raise ValueOutOfRange(f"TDT {value} outside ring of {slots} descriptors")
        self._write("TDT", value, queue)

    def tdh_read(self, queue: int) -> int:
        return self._read("TDH", queue)

    def tdt_read(self, queue: int) -> int:
        return self._read("TDT", queue)

    # 5-tuple filters and RSS
    def five_tuple_filter_write(self, slot: int, flow: FiveTuple, queue: int, priority: int = 1):
        if not isinstance(flow, FiveTuple):
            raise TypeError("filters take a FiveTuple")
        if not 0 <= slot < rm.FILTER_SLOTS:
            raise ValueOutOfRange(f"filter slot {slot} outside 0..{rm.FILTER_SLOTS - 1}")
        if not 0 <= queue <= 0x7F:
            raise ValueOutOfRange(f"queue {queue} out of range")
        if not 1 <= priority <= 7:
            raise ValueOutOfRange(f"filter priority {priority} outside 1..7")
        self._write("SAQF", int(flow.src_ip), slot)
        self._write("DAQF", int(flow.dst_ip), slot)
        self._write("SDPQF", flow.src_port | flow.dst_port << 16, slot)
        self._write("L34TIMIR", queue << rm.L34TIMIR_QUEUE_SHIFT, slot)
        ftqf = protocol_code(flow.protocol) | priority << rm.FTQF_PRIORITY_SHIFT | rm.FTQF_ENABLE
        self._write("FTQF", ftqf, slot)

    def five_tuple_filter_clear(self, slot: int):
        if not 0 <= slot < rm.FILTER_SLOTS:
            raise ValueOutOfRange(f"filter slot {slot} outside 0..{rm.FILTER_SLOTS - 1}")
        self._write("FTQF", 0, slot)

    def reta_write(self, table):
        entries = list(table)
        if len(entries) != rm.RETA_ENTRIES or any(not 0 <= q <= 0xF for q in entries):
            raise ValueOutOfRange(f"redirection table needs {rm.RETA_ENTRIES} queue indices in 0..15")
        for reg in range(rm.RETA_ENTRIES // 4):
            word = 0
            for k in range(4):
                word |= entries[reg * 4 + k] << (8 * k)
            self._write("RETA", word, reg)

    def mrqc_rss(self, enable: bool):
        self._write("MRQC", rm.MRQC_RSS if enable else 0)

    @nocalls("_write")
    def release(self) -> TypedView:
        """Give back the underlying view; the register file is consumed."""
        self._consume()
        return self._view
