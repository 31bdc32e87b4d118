"""
Configuration module for tsirelson-norms.
Manages enumeration caps, precision, averaging-tree guards, verification
sampling, spreading-model horizons, and logging settings.
"""

from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class EngineConfig(BaseModel):
    """Norm engine configuration."""

    cap_nonmodified: int = Field(
        default=16, ge=1, description="Max support size for admissible searches"
    )
    cap_modified: int = Field(
        default=12, ge=1, description="Max support size for allowable searches"
    )
    precision: int = Field(default=64, ge=16, description="Bits for dyadic enclosures")
    max_precision: int = Field(
        default=256, ge=16, description="Precision limit for argmax refinement"
    )
    table_horizon: int = Field(
        default=12, ge=1, description="Bound for regularity and clubsuit checks"
    )


class AveragesConfig(BaseModel):
    """Averaging-tree construction configuration."""

    max_leaves: int = Field(
        default=40000, ge=1, description="Leaf budget before SupplyExhausted"
    )
    supply_start: int = Field(default=1, ge=1, description="First basis index supplied")


class VerifyConfig(BaseModel):
    """Verification suite configuration."""

    seed: int = Field(default=20240917, description="Seed for every randomized suite")
    samples: int = Field(default=100, ge=1, description="Samples per randomized suite")
    family_cap: int = Field(
        default=5000, ge=1, description="Enumerated families before sampling fallback"
    )
    fallback_samples: int = Field(
        default=200, ge=1, description="Random families drawn after the fallback"
    )


class SpreadingConfig(BaseModel):
    """Spreading-model and classification configuration."""

    horizon: int = Field(default=1024, ge=4, description="Finite horizon for theta_n")
    grid_mesh: int = Field(default=6, ge=1, description="Simplex grid mesh exponent g")
    coarse_mesh: int = Field(default=3, ge=1, description="Mesh exponent of the first pass")
    trend_low: float = Field(default=0.9, description="Last/first quarter ratio below which c_n decays")
    trend_high: float = Field(default=0.95, description="Ratio above which c_n is stable")
    inf_threshold: float = Field(default=0.001, description="Smallest c_n counted as bounded below")
    oscillation_factor: float = Field(
        default=2.0, description="Max/min ratio of quarter medians flagged as oscillation"
    )


class LoggingConfig(BaseModel):
    """Logging configuration."""

    level: str = Field(default="INFO", description="Log level")
    format: Literal["json", "text"] = Field(default="json", description="Log format: json or text")
    log_dir: Optional[Path] = Field(
        default=None, description="Directory for tsirelson.log; stderr only when unset"
    )


class Config(BaseSettings):
    """Main application configuration."""

    engine: EngineConfig = Field(default_factory=EngineConfig)
    averages: AveragesConfig = Field(default_factory=AveragesConfig)
    verify: VerifyConfig = Field(default_factory=VerifyConfig)
    spreading: SpreadingConfig = Field(default_factory=SpreadingConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)
    cap_override: Optional[int] = Field(
        default=None, ge=1, description="Raises both enumeration caps (TSL_CAP_OVERRIDE)"
    )

    model_config = SettingsConfigDict(env_prefix="TSL_", env_nested_delimiter="__")

    @model_validator(mode="after")
    def _apply_cap_override(self) -> "Config":
        if self.cap_override is not None:
            self.engine.cap_nonmodified = max(self.engine.cap_nonmodified, self.cap_override)
            self.engine.cap_modified = max(self.engine.cap_modified, self.cap_override)
        return self

    def cap_for(self, modified: bool) -> int:
        return self.engine.cap_modified if modified else self.engine.cap_nonmodified


def load_config(config_path: Optional[Path] = None) -> Config:
    """Load configuration from file or environment.

    Args:
        config_path: Optional path to YAML config file

    Returns:
        Config instance
    """
    if config_path and config_path.exists():
        import yaml

        with open(config_path, "r") as f:
            data = yaml.safe_load(f) or {}
        return Config(**data)
    return Config()


def get_default_config() -> Config:
    """Get default configuration.

    Returns:
        Config with the defaults used by CI runs
    """
    return Config()
