"""Fixed-delay streaming over packet-erasure links with unreliable erasure feedback."""

__version__ = "0.1.0"
