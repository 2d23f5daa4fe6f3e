"""Intrinsic graphs in the Heisenberg group: area, variations, characteristics and calibrations."""

__version__ = "0.1.0"
