"""Unique resource representations, typestate memory and a simulated 82599 driver."""

from .errors import HybridOSError

__version__ = "0.1.0"
