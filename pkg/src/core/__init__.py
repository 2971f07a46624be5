"""Configuration, errors and command orchestration"""

from .config import RunConfig, load_config
from .pipeline import VerificationPipeline
from .runner import HeegnerRunner

__all__ = ["RunConfig", "load_config", "VerificationPipeline", "HeegnerRunner"]
