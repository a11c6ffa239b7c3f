"""Cyclic-arbitrage bot detection and optimistic-MEV measurement from chain-data exports."""

__version__ = "0.1.0"
