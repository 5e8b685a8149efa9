"""Coupling design and exact verification for engineered spin chains."""
