"""Tests for pinnverse."""
