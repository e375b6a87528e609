"""Configuration package for the one-bit spectral estimator."""

from .settings import settings, get_settings, reload_settings, PRESETS, EstimatorSettings

__all__ = ["settings", "get_settings", "reload_settings", "PRESETS", "EstimatorSettings"]
