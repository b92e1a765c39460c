"""Subcommands: sweep, verify, optimize, compare."""
