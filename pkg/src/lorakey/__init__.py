"""Simulation and analysis of RSSI-based key generation under colluding eavesdroppers."""

__version__ = "0.1.0"
