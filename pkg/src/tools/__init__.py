"""Sweep-mode package for the one-bit spectral estimator."""

import sys
from pathlib import Path

# Ensure proper path setup
current_dir = Path(__file__).parent
src_dir = current_dir.parent
sys.path.insert(0, str(src_dir))

from .base import (
    SweepMode,
    ModeResult,
    ModeCategory,
    ModeRegistry,
    PointContext,
    mode_registry,
    register_mode,
    get_mode_registry,
)

# Import all mode modules to register them
from . import analytic_modes
from . import montecarlo_modes

__all__ = [
    "SweepMode",
    "ModeResult",
    "ModeCategory",
    "ModeRegistry",
    "PointContext",
    "mode_registry",
    "register_mode",
    "get_mode_registry",
]
