"""Self-consistent Pauli noise learning and gauge-aware error cancellation."""

__version__ = "0.1.0"
