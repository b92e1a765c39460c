"""Logging and manifest generation."""
