"""Desk-scale neural-operator laboratory."""

__version__ = "0.1.0"
