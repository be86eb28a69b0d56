"""Command-line adapters that satisfy the external backend file contract."""
