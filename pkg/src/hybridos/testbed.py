"""Wiring for simulated setups: memory, device models on MMIO windows, PCI bus."""
from __future__ import annotations

from . import mem as memory
from . import regmap as rm
from .device_sim import SimNic
from .ixgbe_driver import BAR_FRAMES, DriverConfig, PciBus, init
from .nic_hal import RegisterFile
from .rep_core import PciLocation


class Testbed:
    """``count`` simulated 82599 ports sized for ``config``, ready for :func:`init`."""

    __test__ = False  # keeps pytest from collecting it

    def __init__(self, count: int = 1, config: DriverConfig = DriverConfig(), spare_pages: int = 8):
        self.config = config
        need = config.pages_needed() * count
        ram = need + spare_pages
        self.mem = memory.MemorySystem(ram, need + BAR_FRAMES * count + spare_pages,
                                       mmio_frames=BAR_FRAMES * count)
        self.bus = PciBus()
        self.devices: list[SimNic] = []
        self.pci = []
        for i in range(count):
            bar = ram + i * BAR_FRAMES
            dev = SimNic(self.mem.phys, name=chr(ord("a") + i))
            self.mem.phys.attach_mmio(bar, BAR_FRAMES, dev)
            self.devices.append(dev)
            self.pci.append(self.bus.add_device(PciLocation(0, i + 1, 0), bar))
        self.initial_free = self.mem.free_state()

    def nic(self, i: int = 0, config: DriverConfig | None = None):
        """Initialise port ``i``; the bus's PciDevice for it is moved into the NIC."""
        return init(self.pci[i], self.mem, config or self.config)

    def violations(self):
        return [v for d in self.devices for v in d.violations]

    def reclaimed(self) -> bool:
        return self.mem.free_state() == self.initial_free


def register_file_on_sim():
    """A bare RegisterFile over one SimNic, for exercising the HAL without the driver."""
    mem = memory.MemorySystem(8, 8 + BAR_FRAMES, mmio_frames=BAR_FRAMES)
    dev = SimNic(mem.phys)
    mem.phys.attach_mmio(8, BAR_FRAMES, dev)
    frames = mem.device_frames.allocate_at(8, BAR_FRAMES)
    pages = mem.pages.allocate(BAR_FRAMES)
    mapped = mem.map(pages, frames, memory.MapFlags.DEVICE)
    regs = RegisterFile(mapped.carve(0, rm.REGISTER_MAP.span, 4))
    return regs, dev, mapped
