"""Bundled test-system case files."""
