"""Decentralised multi-UAV double deep Q-learning for energy-efficient
coverage of unevenly distributed ground users."""

__version__ = "0.1.0"
