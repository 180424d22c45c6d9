"""Scope-based configuration."""
