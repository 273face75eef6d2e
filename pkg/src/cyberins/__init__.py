"""Cyberattack load-loss simulation and mutual insurance pricing for
interconnected transmission grids."""

__version__ = "0.1.0"
