"""Shared helpers for errors, I/O and serialization."""
