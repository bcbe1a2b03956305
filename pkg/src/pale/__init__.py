"""Beep-based leader election: node state machine, simulator and trace checkers."""

__version__ = "0.1.0"
