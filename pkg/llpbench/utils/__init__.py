"""Utility helpers shared across llpbench stages."""
