"""File adapters."""
