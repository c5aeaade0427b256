"""Loader for ``registers.map``, the one register layout used by HAL and device model."""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

ACCESS_CLASSES = ("ro", "rw", "restricted", "reserved")

# Bit fields within the modeled registers.
CTRL_RST = 1 << 26
RXCTRL_RXEN = 1 << 0
FCTRL_SBP = 1 << 1
FCTRL_MPE = 1 << 8
FCTRL_UPE = 1 << 9
FCTRL_BAM = 1 << 10
RDRXCTL_CRCSTRIP = 1 << 1
RDRXCTL_DMAIDONE = 1 << 3
RDRXCTL_RSCFRSTSIZE = 0x1F << 17
RDRXCTL_RSCACKC = 1 << 25
RDRXCTL_FCOE_WRFIX = 1 << 26
RXDCTL_ENABLE = 1 << 25
TXDCTL_ENABLE = 1 << 25
SRRCTL_BSIZEPACKET = 0x1F
SRRCTL_DROP_EN = 1 << 28
DMATXCTL_TE = 1 << 0
LINKS_UP = 1 << 30
FWSM_MODE_SHIFT = 1
FWSM_MODE_MASK = 0x7 << FWSM_MODE_SHIFT
FWSM_FW_VALID = 1 << 15
DTXMXSZRQ_MAX_BYTES = 0xFFF
FTQF_PROTOCOL = 0x3
FTQF_PRIORITY_SHIFT = 2
FTQF_MASK_SHIFT = 25
FTQF_ENABLE = 1 << 31
L34TIMIR_QUEUE_SHIFT = 21
L34TIMIR_QUEUE = 0x7F << L34TIMIR_QUEUE_SHIFT
MRQC_RSS = 0x1
RETA_ENTRIES = 128
FILTER_SLOTS = 128


@dataclass(frozen=True)
class RegisterSpec:
    name: str
    offset: int
    count: int
    stride: int
    access: str
    reserved_mask: int
    required_mask: int
    required_value: int
    default: int

    def offset_of(self, index: int = 0) -> int:
        if not 0 <= index < self.count:
            raise IndexError(f"{self.name} has {self.count} instance(s), index {index} invalid")
        return self.offset + index * self.stride


class RegisterMap:
    def __init__(self, specs):
        self._specs = {s.name: s for s in specs}
        self._by_offset: dict[int, tuple[RegisterSpec, int]] = {}
        for s in specs:
            if s.access not in ACCESS_CLASSES:
                raise ValueError(f"{s.name}: unknown access class {s.access!r}")
            for i in range(s.count):
                off = s.offset_of(i)
                if off % 4:
                    raise ValueError(f"{s.name}[{i}] offset {off:#x} not word aligned")
                if off in self._by_offset:
                    raise ValueError(f"{s.name}[{i}] collides with {self._by_offset[off][0].name}")
                self._by_offset[off] = (s, i)

    @classmethod
    def parse(cls, text: str) -> "RegisterMap":
        specs = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 9:
                raise ValueError(f"line {lineno}: expected 9 fields, got {len(fields)}")
            name, access = fields[0], fields[4]
            nums = [int(f, 0) for f in fields[1:4]] + [int(f, 0) for f in fields[5:]]
            offset, count, stride, reserved, req_mask, req_value, default = nums
            specs.append(RegisterSpec(name, offset, count, stride, access, reserved, req_mask, req_value, default))
        return cls(specs)

    @classmethod
    def load(cls, path: str | Path | None = None) -> "RegisterMap":
        if path is None:
            text = resources.files(__package__).joinpath("registers.map").read_text()
        else:
            text = Path(path).read_text()
        return cls.parse(text)

    def __getitem__(self, name: str) -> RegisterSpec:
        return self._specs[name]

    def __iter__(self):
        return iter(self._specs.values())

    def offset(self, name: str, index: int = 0) -> int:
        return self._specs[name].offset_of(index)

    def decode(self, offset: int) -> tuple[RegisterSpec, int] | None:
        return self._by_offset.get(offset)

    @property
    def span(self) -> int:
        """Bytes needed to cover every register."""
        return max(self._by_offset) + 4


REGISTER_MAP = RegisterMap.load()
