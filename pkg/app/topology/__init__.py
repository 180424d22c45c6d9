"""Merge tree computation, comparison and ensemble analysis."""
