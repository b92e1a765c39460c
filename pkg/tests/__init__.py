"""Tests for Maple Lofi pipeline."""
