"""Arrival-time statistics of spin-1/2 particles in a wave guide under
spin-dependent Bohmian guidance laws, with binned spin-POVM auditing."""

__version__ = "0.1.0"
