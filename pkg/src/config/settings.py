"""
Configuration management for the one-bit spectral power estimator.
"""
from typing import Dict, Any, Optional
from pydantic_settings import BaseSettings
from pydantic import Field
from pathlib import Path


class EstimatorSettings(BaseSettings):
    """Main configuration for estimation runs, sweeps and numerics."""

    # Identity
    project_name: str = Field(default="onebit-spectral", description="Name of the tool")
    project_version: str = Field(default="1.0.0", description="Tool version")

    # Experiment defaults
    default_n: int = Field(default=100_000, description="Windows per dataset (N)")
    default_k: int = Field(default=1000, description="Monte-Carlo realizations (K)")
    default_iterations: int = Field(default=5, description="Scoring iterations (I)")
    default_floor_db: float = Field(default=-30.0, description="Back-projection floor in dB")
    default_seed: int = Field(default=0, description="Root seed for synthetic data")
    default_threads: int = Field(default=1, description="Worker threads")
    default_sweep_step_db: float = Field(default=2.5, description="Sweep grid step in dB")

    # Numerics
    quad_abs_tol: float = Field(default=1e-9, description="Absolute tolerance per orthant integral")
    quad_max_evals: int = Field(default=2048, description="Integrand evaluation cap per integral")
    psd_tolerance: float = Field(default=1e-10, description="Smallest admissible eigenvalue (negated)")
    correlation_clamp: float = Field(default=1e-12, description="Distance of the clamp from |rho| = 1")
    ridge_scale: float = Field(default=1e-10, description="Relative ridge for factorization retry")
    orthant_batch_size: int = Field(default=4096, description="Quadruples per vectorized quadrature batch")
    orthant_seconds_per_eval: float = Field(default=2e-6, description="Cost constant for assembly estimates")
    mc_failure_fraction: float = Field(default=0.01, description="Largest tolerated share of failed trials")

    # Output
    csv_significant_digits: int = Field(default=9, description="Significant digits in CSV output")
    moment_cache_entries: int = Field(default=4, description="In-process fourth-moment tables kept")

    # Logging
    log_level: str = Field(default="WARNING", description="Logging level")
    log_json: bool = Field(default=False, description="Emit JSON log lines")
    log_file: Optional[str] = Field(default=None, description="Optional log file path")

    # Paths
    project_root: Path = Field(default_factory=lambda: Path(__file__).parent.parent.parent)
    data_dir: Path = Field(default_factory=lambda: Path(__file__).parent.parent.parent / "data")
    scenario_dir: Path = Field(default_factory=lambda: Path(__file__).parent.parent.parent / "data" / "scenarios")
    cache_dir: Path = Field(default_factory=lambda: Path(__file__).parent.parent.parent / "data" / "cache")
    logs_dir: Path = Field(default_factory=lambda: Path(__file__).parent.parent.parent / "logs")

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        env_prefix = "ONEBIT_"
        case_sensitive = False


# Named option bundles; a preset only fills in what the user left unset.
PRESETS: Dict[str, Dict[str, Any]] = {
    "desk": {"M": 16, "n": 10_000, "k": 200},
    "full": {"n": 100_000, "k": 1000},
}


# Global settings instance
settings = EstimatorSettings()


def get_settings() -> EstimatorSettings:
    """Get the global settings instance."""
    return settings


def reload_settings() -> EstimatorSettings:
    """Reload settings from environment."""
    global settings
    settings = EstimatorSettings()
    return settings
