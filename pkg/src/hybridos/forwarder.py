"""Two simulated ports and a forwarding loop: tester -> NIC A -> app -> NIC B -> sink.

Scenario files are ``key value`` lines::

    rx_queues 2
    tx_queues 1
    ring_size 512
    batch 32
    packets 10000
    payload 64
    restricted true
    filter 10.0.0.1,10.0.0.2,1000,2000,17 queue=1
    rss 0,1
    schedule traffic.sched

Without ``schedule`` the tester sends ``packets`` frames of ``payload`` bytes,
``batch`` per step, over flows drawn with the seeded RNG. A schedule file has
one record per frame, ``step length queue=N`` or ``step length tuple=a,b,c,d,e``;
``queue=N`` stands for the fixed flow :func:`hint_flow` ``(N)``.
"""
from __future__ import annotations

import random
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from . import packet
from .errors import InvalidConfig
from .ixgbe_driver import BUFFER_SIZE, DriverConfig
from .packet import FiveTuple
from .testbed import Testbed


def hint_flow(queue: int) -> FiveTuple:
    return FiveTuple(f"10.0.{queue}.1", f"10.1.{queue}.1", 1024 + queue, 80, packet.UDP)


@dataclass
class Scenario:
    rx_queues: int = 1
    tx_queues: int = 1
    ring_size: int = 512
    batch: int = 32
    packets: int = 0
    payload: int = 64
    restricted: bool = False
    filters: list = field(default_factory=list)
    rss: tuple = ()
    schedule: list = field(default_factory=list)
    flows: int = 8

    @classmethod
    def parse(cls, text: str, base: Path | None = None) -> "Scenario":
        sc = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition(" ")
            value = value.strip()
            try:
                if key in ("rx_queues", "tx_queues", "ring_size", "batch", "packets", "payload", "flows"):
                    setattr(sc, key, int(value))
                elif key == "restricted":
                    sc.restricted = value.lower() in ("1", "true", "yes", "on")
                elif key == "filter":
                    tup, _, q = value.partition(" queue=")
                    sc.filters.append((FiveTuple.parse(tup), int(q)))
                elif key == "rss":
                    sc.rss = tuple(int(q) for q in value.split(","))
                elif key == "schedule":
                    path = Path(value) if base is None else base / value
                    sc.schedule = parse_schedule(path.read_text())
                else:
                    raise InvalidConfig(f"unknown key {key!r}")
            except (ValueError, OSError) as exc:
                raise InvalidConfig(f"scenario line {lineno}: {exc}") from None
        sc.validate()
        return sc

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        path = Path(path)
        return cls.parse(path.read_text(), path.parent)

    def validate(self):
        if self.batch < 1:
            raise InvalidConfig("batch must be at least 1")
        if self.packets < 0:
            raise InvalidConfig("packets must be non-negative")
        if not packet.MIN_FRAME <= self.payload <= BUFFER_SIZE:
            raise InvalidConfig(f"payload must be within {packet.MIN_FRAME}..{BUFFER_SIZE} bytes")
        for _, q in self.filters:
            if not 0 <= q < self.rx_queues:
                raise InvalidConfig(f"filter queue {q} does not exist")
            if q in self.rss:
                raise InvalidConfig(f"queue {q} cannot take both RSS and a filter")
        for q in self.rss:
            if not 0 <= q < self.rx_queues:
                raise InvalidConfig(f"RSS queue {q} does not exist")

    def config(self) -> DriverConfig:
        return DriverConfig(self.rx_queues, self.tx_queues, self.ring_size, self.restricted)

    def traffic(self, seed: int):
        """``(step, flow, length)`` for every frame the tester sends."""
        if self.schedule:
            return list(self.schedule)
        rng = random.Random(seed)
        flows = [FiveTuple(f"192.168.{rng.randrange(256)}.{rng.randrange(1, 255)}",
                           f"172.16.{rng.randrange(256)}.{rng.randrange(1, 255)}",
                           rng.randrange(1024, 65536), rng.choice((53, 80, 443)),
                           rng.choice((packet.TCP, packet.UDP)))
                 for _ in range(max(1, self.flows))]
        return [(i // self.batch, rng.choice(flows), self.payload) for i in range(self.packets)]


def parse_schedule(text: str) -> list:
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            step, length, target = line.split()
            if target.startswith("queue="):
                flow = hint_flow(int(target[6:]))
            elif target.startswith("tuple="):
                flow = FiveTuple.parse(target[6:])
            else:
                raise ValueError(f"expected queue= or tuple=, got {target!r}")
            out.append((int(step), flow, int(length)))
        except ValueError as exc:
            raise InvalidConfig(f"schedule line {lineno}: {exc}") from None
    return sorted(out, key=lambda rec: rec[0])


@dataclass
class ForwardResult:
    injected: int
    forwarded: int
    held: int
    in_order: bool
    rx_counts: dict
    tx_counts: dict
    violations: list
    reclaimed: bool
    elapsed: float

    @property
    def dropped(self) -> int:
        return self.injected - self.forwarded - self.held

    @property
    def ok(self) -> bool:
        return (self.forwarded == self.injected and self.in_order and not self.violations
                and self.reclaimed)

    def report(self) -> list[str]:
        lines = [
            f"injected {self.injected}",
            f"forwarded {self.forwarded}",
            f"dropped {self.dropped}",
            f"held {self.held}",
            f"in_order {str(self.in_order).lower()}",
        ]
        lines += [f"rx_queue.{q} {n}" for q, n in sorted(self.rx_counts.items())]
        lines += [f"tx_queue.{q} {n}" for q, n in sorted(self.tx_counts.items())]
        lines.append(f"violations {len(self.violations)}")
        lines += [f"violation {v.kind} {v.register} {v.detail}" for v in self.violations]
        lines.append(f"reclaimed {str(self.reclaimed).lower()}")
        lines.append(f"timing.elapsed_s {self.elapsed:.3f}")
        return lines


def forward(sc: Scenario, seed: int = 0, idle_limit: int = 8) -> ForwardResult:
    started = time.monotonic()
    traffic = sc.traffic(seed)
    tb = Testbed(2, sc.config())
    dev_a, dev_b = tb.devices
    delivered = []
    dev_b.connect(delivered.append)
    dev_a.connect(dev_b)

    nic_a, nic_b = tb.nic(0), tb.nic(1)
    rxqs = {q: nic_a.take_rx_queue(q).enable() for q in range(sc.rx_queues)}
    txqs = [nic_b.take_tx_queue(q).enable() for q in range(sc.tx_queues)]
    for flow, q in sc.filters:
        rxqs[q], _entry = nic_a.add_filter(rxqs[q], flow)
    if sc.rss:
        for q, rq in zip(sc.rss, nic_a.configure_rss([rxqs[q] for q in sc.rss])):
            rxqs[q] = rq

    rx_counts = dict.fromkeys(rxqs, 0)
    tx_counts = dict.fromkeys(range(len(txqs)), 0)
    backlog = [deque() for _ in txqs]
    pending = deque(traffic)
    step, idle, seq = 0, 0, 0
    while True:
        while pending and pending[0][0] <= step:
            _, flow, length = pending.popleft()
            dev_a.inject(packet.build(flow, length, seq))
            seq += 1
        before = (len(delivered), dev_a.held, dev_a.received, sum(map(len, backlog)))
        dev_a.step(sc.batch)
        for q, rq in rxqs.items():
            frames = rq.receive_batch(sc.batch)
            rx_counts[q] += len(frames)
            backlog[q % len(txqs)].extend(frames)
        for t, tq in enumerate(txqs):
            if backlog[t]:
                sent = tq.send_batch(list(backlog[t])[:sc.batch])
                tx_counts[t] += sent
                for _ in range(sent):
                    backlog[t].popleft()
        dev_b.step(sc.batch)
        after = (len(delivered), dev_a.held, dev_a.received, sum(map(len, backlog)))
        idle = 0 if after != before else idle + 1
        step += 1
        if not pending and idle >= idle_limit:
            break

    in_order = _in_order(delivered)
    nic_a.drop()
    nic_b.drop()
    return ForwardResult(len(traffic), len(delivered), dev_a.held + sum(map(len, backlog)), in_order,
                         dict(rx_counts), dict(tx_counts), tb.violations(), tb.reclaimed(),
                         time.monotonic() - started)


def _in_order(frames) -> bool:
    """Per flow, sequence numbers arrive strictly increasing and every frame is intact."""
    last = {}
    for f in frames:
        flow, seq = packet.five_tuple(f), packet.sequence(f)
        if last.get(flow, -1) >= seq or f != packet.build(flow, len(f), seq):
            return False
        last[flow] = seq
    return True
