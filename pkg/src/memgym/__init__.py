"""Simulated-user benchmark for long-horizon assistant memory."""

__version__ = "0.1.0"
