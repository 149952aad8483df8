# app/config.py
from pydantic_settings import BaseSettings
from pydantic import Field
from functools import lru_cache
from typing import List


class Settings(BaseSettings):
    """Toolkit settings, overridable through GESTUREQC_* variables or .env."""

    # App Info
    app_name: str = Field(default="Gesture QC Toolkit")
    app_version: str = Field(default="1.0.0")
    debug: bool = Field(default=False)
    log_level: str = Field(default="INFO")

    # Fan-out
    workers: int = Field(default=1, ge=1)

    # Blur metric
    blur_low: float = Field(default=10.0)
    blur_high: float = Field(default=50.0)
    image_extensions: str = Field(default=".pgm,.ppm,.png,.jpg,.jpeg,.bmp")

    # Evaluation
    reference_confidence: float = Field(default=0.25, ge=0.0, le=1.0)

    # Compliance audit
    min_transitions: int = Field(default=4, ge=0)
    smoothing_window: int = Field(default=3, ge=1)
    max_no_detection: float = Field(default=0.2, ge=0.0, le=1.0)

    # Augmentation canvas fill
    fill_value: int = Field(default=114, ge=0, le=255)

    @property
    def image_extensions_list(self) -> List[str]:
        return [e.strip().lower() for e in self.image_extensions.split(",")]

    class Config:
        env_prefix = "GESTUREQC_"
        env_file = ".env"
        env_file_encoding = "utf-8"


@lru_cache()
def get_settings() -> Settings:
    """Cached settings instance."""
    return Settings()
