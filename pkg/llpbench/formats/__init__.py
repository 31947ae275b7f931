"""Artifact formats and their JSON schemas."""
