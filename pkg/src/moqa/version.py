"""THIS FILE IS GENERATED FROM moqa PYPROJECT.TOML."""
version = "0.1.0"
