from pydantic import BaseSettings, confloat, conint, validator

from linkscrub.core.constants import FEATURE_VERSION
from linkscrub.graph.flows import DEFAULT_MIN_LEN

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class PipelineSettings(BaseSettings):
    """Defaults of the command line flags, each one overridable as LINKSCRUB_<FIELD>"""

    seed: int = 0
    min_value_len: conint(ge=0) = DEFAULT_MIN_LEN
    threshold: confloat(ge=0.0, le=1.0) = 0.5
    format_version: str = FEATURE_VERSION
    log_level: str = "WARNING"
    tree_count: conint(ge=1) = 100
    folds: conint(ge=2) = 10
    n_jobs: conint(ge=1) = 1
    partial_matching: bool = False

    class Config:
        env_prefix = "LINKSCRUB_"

    @validator("log_level")
    def known_level(cls, level: str) -> str:
        level = level.upper()
        if level not in LOG_LEVELS:
            raise ValueError(f"log level must be one of {LOG_LEVELS}")

        return level


__all__ = [
    "PipelineSettings",
    "LOG_FORMAT",
    "LOG_LEVELS",
]
