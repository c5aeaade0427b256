"""Minimal Ethernet/IPv4/L4 framing: enough to carry and classify a 5-tuple."""
from __future__ import annotations

import ipaddress
import struct
from dataclasses import dataclass

ETH_HEADER = struct.Struct("!6s6sH")
IPV4_HEADER = struct.Struct("!BBHHHBBH4s4s")
PORTS = struct.Struct("!HH")
SEQUENCE = struct.Struct("!Q")
HEADER_LEN = ETH_HEADER.size + IPV4_HEADER.size + PORTS.size
MIN_FRAME = HEADER_LEN + SEQUENCE.size

TCP, UDP, SCTP = 6, 17, 132


@dataclass(frozen=True)
class FiveTuple:
    src_ip: ipaddress.IPv4Address
    dst_ip: ipaddress.IPv4Address
    src_port: int
    dst_port: int
    protocol: int

    def __post_init__(self):
        object.__setattr__(self, "src_ip", ipaddress.IPv4Address(self.src_ip))
        object.__setattr__(self, "dst_ip", ipaddress.IPv4Address(self.dst_ip))
        for port in (self.src_port, self.dst_port):
            if not 0 <= port <= 0xFFFF:
                raise ValueError(f"port {port} out of range")
        if not 0 <= self.protocol <= 0xFF:
            raise ValueError(f"protocol {self.protocol} out of range")

    @classmethod
    def parse(cls, text: str) -> "FiveTuple":
        """``src,dst,sport,dport,proto`` as used in schedule and scenario files."""
        src, dst, sport, dport, proto = text.split(",")
        return cls(src, dst, int(sport), int(dport), int(proto))

    def __str__(self):
        return f"{self.src_ip},{self.dst_ip},{self.src_port},{self.dst_port},{self.protocol}"


def build(flow: FiveTuple, length: int, seq: int = 0) -> bytes:
    """Frame of exactly ``length`` bytes carrying ``flow`` and a sequence number."""
    if length < MIN_FRAME:
        raise ValueError(f"frame length {length} below minimum {MIN_FRAME}")
    eth = ETH_HEADER.pack(b"\x02\x00\x00\x00\x00\x02", b"\x02\x00\x00\x00\x00\x01", 0x0800)
    ip = IPV4_HEADER.pack(0x45, 0, length - ETH_HEADER.size, 0, 0, 64, flow.protocol, 0,
                          flow.src_ip.packed, flow.dst_ip.packed)
    body = PORTS.pack(flow.src_port, flow.dst_port) + SEQUENCE.pack(seq)
    pad = bytes((seq + i) & 0xFF for i in range(length - MIN_FRAME))
    return eth + ip + body + pad


def five_tuple(frame: bytes) -> FiveTuple | None:
    if len(frame) < HEADER_LEN:
        return None
    (ethertype,) = struct.unpack_from("!H", frame, 12)
    if ethertype != 0x0800:
        return None
    fields = IPV4_HEADER.unpack_from(frame, ETH_HEADER.size)
    protocol, src, dst = fields[6], fields[8], fields[9]
    sport, dport = PORTS.unpack_from(frame, ETH_HEADER.size + IPV4_HEADER.size)
    return FiveTuple(ipaddress.IPv4Address(src), ipaddress.IPv4Address(dst), sport, dport, protocol)


def sequence(frame: bytes) -> int:
    return SEQUENCE.unpack_from(frame, HEADER_LEN)[0]


def rss_hash(flow: FiveTuple) -> int:
    """Sum-fold of the tuple's 16-bit words. Deterministic stand-in for Toeplitz."""
    src, dst = int(flow.src_ip), int(flow.dst_ip)
    return ((src >> 16) + (src & 0xFFFF) + (dst >> 16) + (dst & 0xFFFF)
            + flow.src_port + flow.dst_port + flow.protocol)
