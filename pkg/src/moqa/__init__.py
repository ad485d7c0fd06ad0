"""moqa."""

from .version import version as __version__

__all__ = [
    "__version__",
    "cli",
    "config",
    "ensemble",
    "exceptions",
    "poly",
    "problem",
    "spectra",
    "utils",
]
