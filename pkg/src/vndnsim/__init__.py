"""Discrete-event comparison of native and overlay NDN over a shared 802.11 cell."""

__version__ = "1.0.0"
