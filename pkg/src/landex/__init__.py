"""Multi-denomination price indices for virtual land sales."""

__version__ = "0.1.0"
