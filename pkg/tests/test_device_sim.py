import pytest
from hypothesis import given, strategies as st

from hybridos import packet
from hybridos import regmap as rm
from hybridos.device_sim import (
    DESCRIPTOR, STATUS_DD, STATUS_EOP, TX_CMD_EOP, TX_CMD_IFCS, TX_CMD_RS, SimNic, ViolationKind,
)
from hybridos.errors import UnknownOffset
from hybridos.mem import PAGE_SIZE, SimPhysMemory
from hybridos.packet import FiveTuple
from hybridos.testbed import register_file_on_sim

FLOW = FiveTuple("10.0.0.1", "10.0.0.2", 1000, 2000, packet.UDP)


def w(dev, name, value, index=0):
    dev.mmio_write(rm.REGISTER_MAP.offset(name, index), value)


def r(dev, name, index=0):
    return dev.mmio_read(rm.REGISTER_MAP.offset(name, index))


def kinds(dev):
    return [v.kind for v in dev.violations]


def rx_ready(dev, phys, slots=8, posted=7):
    """Receive ring at address 0, buffers from frame 1 on, ``posted`` descriptors armed."""
    for i in range(slots):
        phys.write(i * 16, DESCRIPTOR.pack(PAGE_SIZE + i * 2048, 0, 0, 0, 0, 0, 0))
    w(dev, "RDLEN", slots * 16)
    w(dev, "RXDCTL", rm.RXDCTL_ENABLE)
    w(dev, "FCTRL", rm.FCTRL_BAM)
    w(dev, "RXCTRL", rm.RXCTRL_RXEN)
    w(dev, "RDT", posted)


def test_unmapped_offset():
    dev = SimNic(SimPhysMemory(1))
    with pytest.raises(UnknownOffset):
        dev.mmio_read(0x4)
    with pytest.raises(UnknownOffset):
        dev.mmio_write(0xFFFFF0, 0)


def test_rxen_without_fctrl_ordering_violation():
    dev = SimNic(SimPhysMemory(1))
    w(dev, "RXCTRL", rm.RXCTRL_RXEN)
    assert kinds(dev) == [ViolationKind.ORDERING_VIOLATION]


def test_fctrl_while_rx_enabled_violation():
    dev = SimNic(SimPhysMemory(1))
    w(dev, "FCTRL", 0)
    w(dev, "RXCTRL", rm.RXCTRL_RXEN)
    assert dev.violations == ()
    w(dev, "FCTRL", rm.FCTRL_BAM)
    assert kinds(dev) == [ViolationKind.ORDERING_VIOLATION]


def test_reserved_and_readonly_writes_logged_and_dropped():
    dev = SimNic(SimPhysMemory(1))
    w(dev, "GPRC", 5)
    assert r(dev, "GPRC") == 0
    w(dev, "EIMC", 1 << 23 | 1)
    assert r(dev, "EIMC") == 1
    assert kinds(dev) == [ViolationKind.RESERVED_BIT_WRITE] * 2


def test_required_bits():
    dev = SimNic(SimPhysMemory(1))
    w(dev, "RDRXCTL", rm.RDRXCTL_RSCACKC | rm.RDRXCTL_FCOE_WRFIX)
    assert dev.violations == ()
    assert r(dev, "RDRXCTL") & rm.RDRXCTL_DMAIDONE
    w(dev, "RDRXCTL", rm.RDRXCTL_RSCACKC)
    assert kinds(dev) == [ViolationKind.REQUIRED_BITS_CLEARED]


def test_gprc_counts_received_packets():
    phys = SimPhysMemory(4)
    dev = SimNic(phys)
    rx_ready(dev, phys)
    for seq in range(3):
        dev.inject(packet.build(FLOW, 64, seq))
    dev.step(8)
    assert r(dev, "GPRC") == 3
    assert r(dev, "RDH") == 3
    for i in range(3):
        addr, length, _cso, _cmd, status, _css, _vlan = DESCRIPTOR.unpack(phys.read(i * 16, 16))
        assert status == STATUS_DD | STATUS_EOP and length == 64
        assert phys.read(addr, length) == packet.build(FLOW, 64, i)
    assert dev.violations == ()


def test_budget_zero_changes_nothing():
    phys = SimPhysMemory(4)
    dev = SimNic(phys)
    rx_ready(dev, phys)
    dev.inject(packet.build(FLOW, 64))
    before = (dict(dev._values), bytes(phys.read(0, 3 * PAGE_SIZE)))
    dev.step(0)
    assert (dict(dev._values), bytes(phys.read(0, 3 * PAGE_SIZE))) == before
    assert dev.held == 1


def test_tx_descriptor_sent_and_marked_done():
    phys = SimPhysMemory(4)
    dev = SimNic(phys)
    out = []
    dev.connect(out.append)
    frame = packet.build(FLOW, 60)
    phys.write(PAGE_SIZE, frame)
    phys.write(0, DESCRIPTOR.pack(PAGE_SIZE, len(frame), 0, TX_CMD_EOP | TX_CMD_IFCS | TX_CMD_RS, 0, 0, 0))
    w(dev, "TDLEN", 128)
    w(dev, "DMATXCTL", rm.DMATXCTL_TE)
    w(dev, "TXDCTL", rm.TXDCTL_ENABLE)
    w(dev, "TDT", 1)
    dev.step(8)
    assert out == [frame]
    assert r(dev, "TDH") == 1
    assert DESCRIPTOR.unpack(phys.read(0, 16))[4] & STATUS_DD
    assert r(dev, "GPTC") == 1
    assert dev.violations == ()


def test_rx_without_posted_buffers_holds_packet():
    phys = SimPhysMemory(4)
    dev = SimNic(phys)
    rx_ready(dev, phys, posted=0)
    dev.inject(packet.build(FLOW, 64))
    dev.step(8)
    assert dev.held == 1
    assert r(dev, "GPRC") == 0
    assert DESCRIPTOR.unpack(phys.read(0, 16))[4] == 0


def test_tail_past_ring_logged_and_ignored():
    dev = SimNic(SimPhysMemory(1))
    w(dev, "RDLEN", 128)
    w(dev, "RDT", 8)
    assert kinds(dev) == [ViolationKind.HEAD_TAIL_OUT_OF_RANGE]
    assert r(dev, "RDT") == 0


def test_tdh_while_enabled_violation():
    dev = SimNic(SimPhysMemory(1))
    w(dev, "TDLEN", 128)
    w(dev, "TDH", 2)
    assert dev.violations == ()
    w(dev, "TXDCTL", rm.TXDCTL_ENABLE)
    w(dev, "TDH", 3)
    assert kinds(dev) == [ViolationKind.ORDERING_VIOLATION]


def test_reset_restores_defaults():
    dev = SimNic(SimPhysMemory(1))
    w(dev, "FCTRL", rm.FCTRL_BAM)
    w(dev, "CTRL", rm.CTRL_RST)
    assert r(dev, "FCTRL") == rm.REGISTER_MAP["FCTRL"].default


# classification

def test_classify_filter_then_rss_then_zero():
    regs, dev, mapped = register_file_on_sim()
    other = FiveTuple("10.9.9.9", "10.0.0.2", 5, 6, packet.TCP)
    assert dev.classify(packet.build(FLOW, 64)) == 0
    regs.five_tuple_filter_write(3, FLOW, 5)
    assert dev.classify(packet.build(FLOW, 64)) == 5
    assert dev.classify(packet.build(other, 64)) == 0
    regs.reta_write([2] * 128)
    regs.mrqc_rss(True)
    assert dev.classify(packet.build(other, 64)) == 2
    assert dev.classify(packet.build(FLOW, 64)) == 5
    assert dev.violations == ()
    regs.release()._release()
    mapped.drop()


def test_rss_indexes_reta_by_hash():
    regs, dev, mapped = register_file_on_sim()
    table = [i % 16 for i in range(128)]
    regs.reta_write(table)
    regs.mrqc_rss(True)
    for port in range(50):
        flow = FiveTuple("1.2.3.4", "5.6.7.8", port, 80, packet.TCP)
        assert dev.classify(packet.build(flow, 64)) == table[packet.rss_hash(flow) % 128]
    regs.release()._release()
    mapped.drop()


def test_filter_and_rss_on_same_queue_misconfig():
    regs, dev, mapped = register_file_on_sim()
    regs.five_tuple_filter_write(0, FLOW, 1)
    regs.reta_write([1] * 128)
    regs.mrqc_rss(True)
    assert kinds(dev) == [ViolationKind.FILTER_MISCONFIG]
    dev.classify(packet.build(FLOW, 64))
    assert len(dev.violations) == 1
    regs.release()._release()
    mapped.drop()


def test_filter_mask_ignores_field():
    dev = SimNic(SimPhysMemory(1))
    w(dev, "SAQF", int(FLOW.src_ip))
    w(dev, "DAQF", 0)
    w(dev, "SDPQF", FLOW.src_port | FLOW.dst_port << 16)
    w(dev, "L34TIMIR", 4 << rm.L34TIMIR_QUEUE_SHIFT)
    w(dev, "FTQF", 1 | 1 << rm.FTQF_PRIORITY_SHIFT | 0b00010 << rm.FTQF_MASK_SHIFT | rm.FTQF_ENABLE)
    assert dev.classify(packet.build(FLOW, 64)) == 4


# conservation

@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 10), st.integers(0, 7)), max_size=30))
def test_injected_equals_received_plus_held(schedule):
    phys = SimPhysMemory(8)
    dev = SimNic(phys)
    rx_ready(dev, phys, slots=8, posted=0)
    injected = 0
    for n_in, budget, tail in schedule:
        for _ in range(n_in):
            dev.inject(packet.build(FLOW, 64, injected))
            injected += 1
        w(dev, "RDT", tail)
        dev.step(budget)
        assert injected == dev.received + dev.held
    assert dev.violations == ()
