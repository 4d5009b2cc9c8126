"""Gradient-ascent engineering of a global field that drives spin chains
into complete graph states, with Rydberg-chain error modeling."""

__version__ = "0.1.0"
