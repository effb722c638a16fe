"""Coach for human-drawn digits against a fixed classifier."""

__version__ = "0.1.0"
