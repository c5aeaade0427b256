"""Known 82599 driver bugs, each replayed two ways.

The raw replay drives a fresh :class:`~hybridos.device_sim.SimNic` through
``mmio_write`` exactly as a buggy driver would and expects the oracle to log
the bug's violation kind and nothing else. The HAL replay attempts the same
thing through :mod:`hybridos.nic_hal` / :mod:`hybridos.ixgbe_driver` and
expects every attempt to be refused.
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable

from . import regmap as rm
from .device_sim import SimNic, ViolationKind
from .errors import ConsumedError, StaleTokenError, StateConflict, TokenError, ValueOutOfRange
from .ixgbe_driver import DriverConfig
from .mem import SimPhysMemory
from .nic_hal import ALL_INTERRUPTS, FilterCtrlFlags, InterruptMaskFlags, RdRxCtlOptions
from .packet import FiveTuple
from .testbed import Testbed, register_file_on_sim

RING_BYTES = 64 * 16


def _w(dev: SimNic, name: str, value: int, index: int = 0):
    dev.mmio_write(rm.REGISTER_MAP.offset(name, index), value)


def _rejects(fn, *errors) -> bool:
    try:
        fn()
    except errors:
        return True
    return False


# raw replays

def _raw_eimc(dev):
    _w(dev, "EIMC", 0xFFFFFFFF)


def _raw_dtxmxszrq(dev):
    _w(dev, "DTXMXSZRQ", 0x1000 | 0x10)


def _raw_rdrxctl(dev):
    # RSCACKC and FCOE_WRFIX left clear, as the buggy drivers did
    _w(dev, "RDRXCTL", rm.RDRXCTL_CRCSTRIP)


def _raw_fctrl(dev):
    _w(dev, "FCTRL", rm.FCTRL_BAM)
    _w(dev, "RXCTRL", rm.RXCTRL_RXEN)
    _w(dev, "FCTRL", rm.FCTRL_BAM | rm.FCTRL_MPE)


def _raw_tdh(dev):
    _w(dev, "TDLEN", RING_BYTES)
    _w(dev, "TXDCTL", rm.TXDCTL_ENABLE)
    _w(dev, "TDH", 5)


def _raw_rss_filter(dev):
    _w(dev, "L34TIMIR", 1 << rm.L34TIMIR_QUEUE_SHIFT)
    _w(dev, "FTQF", rm.FTQF_ENABLE | 1 << rm.FTQF_PRIORITY_SHIFT)
    for reg in range(rm.RETA_ENTRIES // 4):
        _w(dev, "RETA", 0x01010101, reg)
    _w(dev, "MRQC", rm.MRQC_RSS)


def _raw_tail(dev):
    _w(dev, "RDLEN", RING_BYTES)
    _w(dev, "RDT", RING_BYTES // 16)


# HAL replays

@contextmanager
def _hal():
    regs, dev, mapped = register_file_on_sim()
    try:
        yield regs, dev
    finally:
        if regs.live:
            regs.release()._release()
        mapped.drop()


def _hal_eimc():
    with _hal() as (regs, dev):
        return (_rejects(lambda: regs.eimc_write(0xFFFFFFFF), TypeError)
                and _rejects(lambda: InterruptMaskFlags(1 << 31), ValueError)
                and not _reaches_reserved(regs, dev))


def _reaches_reserved(regs, dev) -> bool:
    regs.eimc_write(ALL_INTERRUPTS)
    return bool(dev.violations)


def _hal_dtxmxszrq():
    with _hal() as (regs, dev):
        regs.dtxmxszrq_write(rm.DTXMXSZRQ_MAX_BYTES)
        return (_rejects(lambda: regs.dtxmxszrq_write(rm.DTXMXSZRQ_MAX_BYTES + 1), ValueOutOfRange)
                and _rejects(lambda: regs.dtxmxszrq_write(-1), ValueOutOfRange)
                and not dev.violations)


def _hal_rdrxctl():
    with _hal() as (regs, dev):
        for strip in (False, True):
            regs.rdrxctl_write(RdRxCtlOptions(crc_strip=strip))
        return (_rejects(lambda: RdRxCtlOptions(rsc_ack=False), TypeError)
                and _rejects(lambda: regs.rdrxctl_write(0), TypeError)
                and not dev.violations)


def _hal_fctrl():
    with _hal() as (regs, dev):
        off = regs.rxctrl_rx_disable()
        fset = regs.fctrl_write(FilterCtrlFlags.BROADCAST_ACCEPT_MODE, off)
        regs.rxctrl_rx_enable(fset)
        stale = regs.rxctrl_rx_disable()
        ok = regs.fctrl_write(FilterCtrlFlags(0), stale)
        regs.rxctrl_rx_enable(ok)
        return (_rejects(lambda: regs.fctrl_write(FilterCtrlFlags.BROADCAST_ACCEPT_MODE), TypeError)
                and _rejects(lambda: regs.fctrl_write(FilterCtrlFlags.BROADCAST_ACCEPT_MODE, off), ConsumedError)
                and _rejects(lambda: regs.fctrl_write(rm.FCTRL_BAM, regs.rxctrl_rx_disable()), TypeError)
                and _stale_rejected(regs)
                and _rejects(lambda: regs.rxctrl_rx_enable(regs.rxctrl_rx_disable()), TypeError)
                and not dev.violations)


def _stale_rejected(regs) -> bool:
    early = regs.rxctrl_rx_disable()
    fset = regs.fctrl_write(FilterCtrlFlags(0), regs.rxctrl_rx_disable())
    regs.rxctrl_rx_enable(fset)
    return _rejects(lambda: regs.fctrl_write(FilterCtrlFlags(0), early), StaleTokenError)


def _hal_tdh():
    with _hal() as (regs, dev):
        regs.tx_ring_write(0, 0, RING_BYTES)
        regs.tx_ring_write(1, 0, RING_BYTES)
        proof = regs.txdctl_disable(0)
        other = regs.txdctl_disable(1)
        regs.txdctl_enable(0)
        return (_rejects(lambda: regs.tdh_write(0, 5, proof), StaleTokenError)
                and _rejects(lambda: regs.tdh_write(0, 5, other), TokenError)
                and _rejects(lambda: regs.tdh_write(0, 5), TypeError)
                and not dev.violations)


def _hal_rss_filter():
    tb = Testbed(1, DriverConfig(rx_queues=2, ring_size=8))
    with tb.nic() as nic:
        q0 = nic.take_rx_queue(0).enable()
        q1 = nic.take_rx_queue(1).enable()
        flow = FiveTuple("10.0.0.1", "10.0.0.2", 1000, 2000, 17)
        filtered, _entry = nic.add_filter(q0, flow)
        refused = _rejects(lambda: nic.configure_rss([filtered, q1]), StateConflict)
        [rss1] = nic.configure_rss([q1])
        refused = refused and _rejects(lambda: nic.add_filter(rss1, flow), StateConflict)
    return refused and not tb.violations() and tb.reclaimed()


def _hal_tail():
    with _hal() as (regs, dev):
        regs.rx_ring_write(0, 0, RING_BYTES)
        regs.rdt_write(0, RING_BYTES // 16 - 1)
        return (_rejects(lambda: regs.rdt_write(0, RING_BYTES // 16), ValueOutOfRange)
                and _rejects(lambda: regs._write("RDH", 0, 0), PermissionError)
                and not dev.violations)


@dataclass(frozen=True)
class BugCase:
    key: str
    source: str
    description: str
    expected: ViolationKind
    raw: Callable
    hal: Callable


CORPUS = (
    BugCase("eimc_reserved", "DPDK 23", "write to reserved bit of EIMC",
            ViolationKind.RESERVED_BIT_WRITE, _raw_eimc, _hal_eimc),
    BugCase("dtxmxszrq_reserved", "ixy/Redox/RedLeaf", "write to reserved bits of DTXMXSZRQ",
            ViolationKind.RESERVED_BIT_WRITE, _raw_dtxmxszrq, _hal_dtxmxszrq),
    BugCase("rdrxctl_required", "DPDK 22", "RDRXCTL written without RSCACKC and FCOE_WRFIX",
            ViolationKind.REQUIRED_BITS_CLEARED, _raw_rdrxctl, _hal_rdrxctl),
    BugCase("fctrl_rxen", "DPDK 21", "FCTRL changed while RXCTRL.RXEN is set",
            ViolationKind.ORDERING_VIOLATION, _raw_fctrl, _hal_fctrl),
    BugCase("tdh_after_enable", "DPDK 25", "TDH set after TXDCTL.ENABLE",
            ViolationKind.ORDERING_VIOLATION, _raw_tdh, _hal_tdh),
    BugCase("rss_and_filter", "DPDK 399", "one queue fed by both RSS and a 5-tuple filter",
            ViolationKind.FILTER_MISCONFIG, _raw_rss_filter, _hal_rss_filter),
    BugCase("tail_out_of_range", "ring bookkeeping", "RDT set past the end of the ring",
            ViolationKind.HEAD_TAIL_OUT_OF_RANGE, _raw_tail, _hal_tail),
)


@dataclass(frozen=True)
class CaseResult:
    case: BugCase
    observed: tuple
    oracle_ok: bool
    hal_ok: bool

    @property
    def ok(self) -> bool:
        return self.oracle_ok and self.hal_ok


def replay_raw(case: BugCase) -> SimNic:
    dev = SimNic(SimPhysMemory(1))
    case.raw(dev)
    return dev


def run_case(case: BugCase) -> CaseResult:
    dev = replay_raw(case)
    observed = tuple(v.kind for v in dev.violations)
    oracle_ok = bool(observed) and set(observed) == {case.expected}
    return CaseResult(case, observed, oracle_ok, bool(case.hal()))


def legal_init_violations() -> list:
    tb = Testbed(1, DriverConfig(rx_queues=2, tx_queues=2, ring_size=8))
    nic = tb.nic()
    with nic:
        for i in range(2):
            nic.take_rx_queue(i).enable()
            nic.take_tx_queue(i).enable()
    return tb.violations()


def run_corpus() -> list[CaseResult]:
    return [run_case(c) for c in CORPUS]
