"""Brute-force models and randomized workloads shared by unit and acceptance tests."""
import random

from hybridos import mem as memory
from hybridos import packet
from hybridos.chunk import chunk_creator, merge, split_at
from hybridos.errors import NotAdjacent, OutOfResources, OverlapError
from hybridos.ixgbe_driver import DriverConfig
from hybridos.packet import FiveTuple
from hybridos.rep_core import IntervalId
from hybridos.testbed import Testbed


def runs(units):
    """Maximal contiguous runs of a unit set, lowest first."""
    out = []
    for u in sorted(units):
        if out and out[-1][1] + 1 == u:
            out[-1][1] = u
        else:
            out.append([u, u])
    return [tuple(r) for r in out]


def first_fit(free_units, count):
    """Start of the lowest free run holding ``count`` units, or None."""
    for a, b in runs(free_units):
        if b - a + 1 >= count:
            return a
    return None


def all_pairs_disjoint(intervals):
    sets = [set(range(a, b + 1)) for a, b in intervals]
    return all(not sets[i] & sets[j] for i in range(len(sets)) for j in range(i + 1, len(sets)))


def uniqueness_sequence(rng, steps=12, space=64):
    """Random create/split/merge/drop over one creator; returns overlap count among live chunks."""
    cr = chunk_creator()
    live = []
    bad = 0
    for _ in range(steps):
        op = rng.random()
        if op < 0.4:
            a = rng.randrange(space)
            b = min(space - 1, a + rng.randrange(8))
            try:
                live.append(cr.create_unique_representation(IntervalId(a, b)))
            except OverlapError:
                pass
        elif op < 0.65 and live:
            c = live.pop(rng.randrange(len(live)))
            if len(c) > 1:
                live.extend(split_at(c, rng.randint(c.start + 1, c.end)))
            else:
                live.append(c)
        elif op < 0.9 and len(live) > 1:
            i, j = rng.sample(range(len(live)), 2)
            try:
                m = merge(live[i], live[j])
            except NotAdjacent:
                pass
            else:
                live = [c for k, c in enumerate(live) if k not in (i, j)] + [m]
        elif live:
            live.pop(rng.randrange(len(live)))._consume()
        if not all_pairs_disjoint([(c.start, c.end) for c in live]):
            bad += 1
    return bad


class MappingWorkload:
    """Random allocate/map/remap/write/drop against a shadow model of table and free lists."""

    def __init__(self, rng, frames=16, pages=16, steps=10):
        self.rng = rng
        self.ms = memory.MemorySystem(frames, pages)
        self.initial = self.ms.free_state()
        self.free_pages = set(range(pages))
        self.free_frames = set(range(frames))
        self.shadow = {}
        self.mapped = []
        self.steps = steps
        self.failures = []

    def _check(self, where):
        ms = self.ms
        if ms.table.duplicate_frames():
            self.failures.append(f"{where}: duplicate frame {ms.table.duplicate_frames()}")
        table = {p: f for p, (f, _) in ms.table.entries().items()}
        if table != self.shadow:
            self.failures.append(f"{where}: table {table} != shadow {self.shadow}")
        if set(u for a, b in ms.pages.free_intervals() for u in range(a, b + 1)) != self.free_pages:
            self.failures.append(f"{where}: page free list drifted")
        if set(u for a, b in ms.frames.free_intervals() for u in range(a, b + 1)) != self.free_frames:
            self.failures.append(f"{where}: frame free list drifted")

    def _map(self):
        n = self.rng.randint(1, 4)
        want_p, want_f = first_fit(self.free_pages, n), first_fit(self.free_frames, n)
        try:
            p = self.ms.pages.allocate(n)
        except OutOfResources:
            if want_p is not None:
                self.failures.append("page allocation refused though a run fits")
            return
        try:
            f = self.ms.frames.allocate(n)
        except OutOfResources:
            if want_f is not None:
                self.failures.append("frame allocation refused though a run fits")
            p.drop()
            return
        if (p.start, f.start) != (want_p, want_f):
            self.failures.append(f"first-fit mismatch {(p.start, f.start)} != {(want_p, want_f)}")
        flags = self.rng.choice([memory.MapFlags.READ_WRITE, memory.MapFlags.READ_ONLY])
        pages, frames = range(p.start, p.end + 1), range(f.start, f.end + 1)
        m = self.ms.map(p, f, flags)
        self.free_pages -= set(pages)
        self.free_frames -= set(frames)
        self.shadow.update(zip(pages, frames))
        self.mapped.append(m)

    def _remap(self):
        m = self.rng.choice(self.mapped)
        before = m.frames()
        m.remap(self.rng.choice(list(memory.MapFlags)))
        if m.frames() != before:
            self.failures.append("remap changed the frame column")

    def _write(self):
        m = self.rng.choice(self.mapped)
        if not m.flags.writable:
            return
        off = self.rng.randrange(m.nbytes - 8)
        data = self.rng.randbytes(8)
        m.write(off, data)
        # direct byte-array oracle through the shadow table
        got = b"".join(
            self.ms.phys.read(self.shadow[m.start + (off + i) // memory.PAGE_SIZE] * memory.PAGE_SIZE
                              + (off + i) % memory.PAGE_SIZE, 1)
            for i in range(8))
        if got != data or m.read(off, 8) != data:
            self.failures.append("write did not land at the mapped frames")

    def _drop(self, m=None):
        m = m or self.mapped.pop(self.rng.randrange(len(self.mapped)))
        pages = range(m.start, m.end + 1)
        frames = [self.shadow.pop(p) for p in pages]
        m.drop()
        self.free_pages |= set(pages)
        self.free_frames |= set(frames)

    def run(self):
        self._check("init")
        for step in range(self.steps):
            r = self.rng.random()
            if r < 0.45 or not self.mapped:
                self._map()
            elif r < 0.6:
                self._remap()
            elif r < 0.75:
                self._write()
            else:
                self._drop()
            self._check(f"step {step}")
        while self.mapped:
            self._drop(self.mapped.pop())
        self._check("teardown")
        reclaimed = self.ms.free_state() == self.initial and len(self.ms.table) == 0
        return self.failures, reclaimed


def ring_workload(ring_size, steps, seed, restricted=True):
    """Loop NIC output back into its own input; random send/step/receive.

    Returns ``(failures, violations, sent, received)``.
    """
    rng = random.Random(seed)
    tb = Testbed(1, DriverConfig(ring_size=ring_size, restricted=restricted))
    dev = tb.devices[0]
    dev.connect(dev)
    nic = tb.nic()
    rxq = nic.take_rx_queue(0).enable()
    txq = nic.take_tx_queue(0).enable()
    flow = FiveTuple("10.0.0.1", "10.0.0.2", 1000, 2000, packet.UDP)
    failures, seq, got = [], 0, []
    for step in range(steps):
        op = rng.random()
        if op < 0.4:
            k = rng.randint(0, ring_size + 4)
            frames = [packet.build(flow, 64, seq + i) for i in range(k)]
            sent = txq.send_batch(frames)
            if not 0 <= sent <= min(k, ring_size - 1):
                failures.append(f"step {step}: sent {sent} of {k}")
            seq += sent
        elif op < 0.7:
            dev.step(rng.randint(0, ring_size))
        else:
            got += rxq.receive_batch(rng.randint(0, ring_size))
        for q in (rxq, txq):
            if not 0 <= q.next_index < ring_size:
                failures.append(f"step {step}: next_index {q.next_index} outside ring")
        book = nic.bookkeeping()
        for side in ("rx", "tx"):
            for q, info in book[side].items():
                if info["tail"] is not None and not 0 <= info["tail"] < ring_size:
                    failures.append(f"step {step}: {side}{q} tail {info['tail']}")
    if [packet.sequence(f) for f in got] != list(range(len(got))):
        failures.append("received frames out of order or duplicated")
    if len(got) > seq:
        failures.append("received more than was sent")
    nic.drop()
    if not tb.reclaimed():
        failures.append("memory not reclaimed after drop")
    return failures, tb.violations(), seq, len(got)
