"""Built-in run presets (YAML package data)."""
