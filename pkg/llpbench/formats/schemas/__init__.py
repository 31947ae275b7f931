"""JSON schema assets for artifact validation."""
