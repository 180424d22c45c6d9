"""Merge tree Wasserstein toolkit."""
