"""Distributed, privacy-respecting contact back-tracking.

Pseudonymous encounter logging, signed infection certificates,
store-and-forward notification with receiver-side verification, and a
deterministic agent-based simulator that drives the whole protocol.
"""

__version__ = "0.1.0"
