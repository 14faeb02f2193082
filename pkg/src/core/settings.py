from typing import Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


# App settings
TITLE = "FlexPlanner"
VERSION = "1.0.0"

SECONDS_PER_HOUR = 3600
SECONDS_PER_DAY = 86400


class Settings(BaseSettings):
    """Runtime configuration, overridable through FLEXPLANNER_* env vars or a .env file."""
    model_config = SettingsConfigDict(
        env_prefix="FLEXPLANNER_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # LP solver
    lp_backend: Literal["highs", "simplex"] = "highs"
    lp_tolerance: float = Field(1e-7, gt=0)
    lp_max_iterations: int = Field(500_000, ge=1)

    # Policy structure defaults
    default_bandwidth: int = Field(4, ge=0)
    default_freezer_delay_s: int = Field(300, ge=0)

    # Simulation oracle
    oracle_signals: int = Field(200, ge=1)
    simulation_tolerance: float = Field(1e-6, gt=0)

    # Parallelism and output
    workers: int = Field(1, ge=1)
    output_dir: str = "out"
    log_level: str = "INFO"


settings = Settings()

# Frequently used defaults
LP_BACKEND = settings.lp_backend
LP_TOLERANCE = settings.lp_tolerance
LP_MAX_ITERATIONS = settings.lp_max_iterations
DEFAULT_BANDWIDTH = settings.default_bandwidth
DEFAULT_FREEZER_DELAY_S = settings.default_freezer_delay_s
ORACLE_SIGNALS = settings.oracle_signals
SIMULATION_TOLERANCE = settings.simulation_tolerance
WORKERS = settings.workers
OUTPUT_DIR = settings.output_dir
