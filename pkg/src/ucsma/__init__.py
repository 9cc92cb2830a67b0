"""Event-driven simulation of CSMA and unlocking CSMA link scheduling."""

__version__ = "0.1.0"
