"""Smoothclimb - policy optimization by continuation with mirror policies."""

__version__ = "0.1.0"
