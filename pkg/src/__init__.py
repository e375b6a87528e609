"""One-bit spectral power estimation: library and command-line tool."""

__version__ = "1.0.0"
__description__ = "Spectral power estimation from hard-limited samples"

from .config import get_settings

__all__ = ["get_settings"]
