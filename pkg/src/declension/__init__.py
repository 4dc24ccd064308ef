"""Noun declension toolkit."""
