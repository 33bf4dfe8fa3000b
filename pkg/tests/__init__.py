"""Test suite for the instanton-safety project."""
