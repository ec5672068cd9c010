"""Partition-function estimation and bounds via MAP queries under random parity constraints."""

__version__ = "0.1.0"
