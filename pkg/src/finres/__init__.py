"""Time-varying VAR resilience and connectedness toolkit."""

__version__ = "0.1.0"
