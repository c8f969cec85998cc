"""Detection and sanitization of tracking link decorations."""

__version__ = "0.1.0"
