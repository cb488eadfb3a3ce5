"""
Runtime Configuration

Settings are read from environment variables (optionally from a .env file)
and can be overridden per invocation by CLI flags.
"""

import os
from functools import lru_cache
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator

load_dotenv()


def _env(name: str, default: str) -> str:
    return os.getenv(f"COVERTRAJ_{name}", default)


class Settings(BaseModel):
    """Process-wide defaults"""

    data_dir: Path = Field(default_factory=lambda: Path(_env("DATA_DIR", "data")))
    set_path: Optional[Path] = Field(default_factory=lambda: _optional_path("SET_PATH"))
    model_path: Optional[Path] = Field(default_factory=lambda: _optional_path("MODEL_PATH"))
    dt: float = Field(default_factory=lambda: float(_env("DT", "0.5")))
    horizon_s: float = Field(default_factory=lambda: float(_env("HORIZON_S", "6.0")))
    substeps: int = Field(default_factory=lambda: int(_env("SUBSTEPS", "10")))
    wheelbase: float = Field(default_factory=lambda: float(_env("WHEELBASE", "3.0")))
    n_jobs: int = Field(default_factory=lambda: int(_env("N_JOBS", "1")))
    log_level: str = Field(default_factory=lambda: _env("LOG_LEVEL", "INFO").upper())

    @field_validator("dt", "horizon_s", "wheelbase")
    @classmethod
    def _positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("must be positive")
        return v

    @field_validator("substeps")
    @classmethod
    def _at_least_one(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be at least 1")
        return v

    @property
    def horizon_steps(self) -> int:
        return int(round(self.horizon_s / self.dt))

    def resolved_set_path(self) -> Path:
        return self.set_path or self.data_dir / "sets" / "trajectory_set.json"

    def resolved_model_path(self) -> Path:
        return self.model_path or self.data_dir / "models" / "set_classifier.json"


def _optional_path(name: str) -> Optional[Path]:
    value = os.getenv(f"COVERTRAJ_{name}")
    return Path(value) if value else None


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Get or create the global settings instance"""
    return Settings()
