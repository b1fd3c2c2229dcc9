"""Test suite for biharm."""
