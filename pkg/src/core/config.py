"""Configuration management for verification runs"""

import json
import logging
import os
from pathlib import Path
from typing import Dict, Any, List, Mapping, Optional

from .errors import InvalidConfig

ENV_FIELDS = {
    "HEEGNER1_PREC_BITS": ("prec_bits", int),
    "HEEGNER1_TOL_LOG2": ("tol_log2", int),
    "HEEGNER1_CACHE_DIR": ("cache_dir", str),
}
OUTPUT_FORMATS = ("json", "text")
DEFAULT_CONFIG_PATH = Path(__file__).resolve().parents[2] / "config" / "default_config.json"

logger = logging.getLogger(__name__)


class RunConfig:
    """Configuration for a single CLI invocation or batch run"""

    def __init__(self, config_dict: Optional[Dict[str, Any]] = None):
        self.config = config_dict or {}

        self.prec_bits = int(self.config.get('prec_bits', 300))
        self.tol_log2 = int(self.config.get('tol_log2', -100))
        self.cache_dir = Path(self.config.get('cache_dir', '.heegner_cache'))
        self.output_format = self.config.get('output_format', 'json')

        # Recognition and elimination budgets
        self.escalation_bits: List[int] = list(self.config.get('escalation_bits', [300, 600, 1200, 2400]))
        self.height_bits = int(self.config.get('height_bits', 64))
        self.divisor_height_bits = int(self.config.get('divisor_height_bits', 160))
        self.max_raw_form_level = int(self.config.get('max_raw_form_level', 13))
        self.max_raw_form_degree = int(self.config.get('max_raw_form_degree', 60))

        # Background operation settings
        self.max_workers = int(self.config.get('max_workers', 4))
        self.cache_results = bool(self.config.get('cache_results', True))
        self.log_level = self.config.get('log_level', 'WARNING')

    def validate(self) -> "RunConfig":
        """Raise InvalidConfig on the first offending field"""
        if self.prec_bits < 64:
            raise InvalidConfig('prec_bits', f"must be >= 64, got {self.prec_bits}")
        if self.tol_log2 >= -16:
            raise InvalidConfig('tol_log2', f"must be < -16, got {self.tol_log2}")
        if self.output_format not in OUTPUT_FORMATS:
            raise InvalidConfig('output_format', f"expected one of {OUTPUT_FORMATS}, got {self.output_format!r}")
        if not self.escalation_bits or any(b < 64 for b in self.escalation_bits):
            raise InvalidConfig('escalation_bits', "needs at least one entry, each >= 64")
        if self.height_bits < 1:
            raise InvalidConfig('height_bits', "must be positive")
        if self.divisor_height_bits < 1:
            raise InvalidConfig('divisor_height_bits', "must be positive")
        if self.max_workers < 1:
            raise InvalidConfig('max_workers', "must be positive")
        return self

    def escalation_schedule(self, start_bits: Optional[int] = None) -> List[int]:
        """Precision ladder beginning at start_bits (or prec_bits)"""
        start = start_bits or self.prec_bits
        ladder = [b for b in self.escalation_bits if b > start]
        return [start] + ladder

    def update_config(self, new_config: Dict[str, Any]) -> None:
        """Update configuration with new values"""
        self.config.update(new_config)
        self.__init__(self.config)

    def to_dict(self) -> Dict[str, Any]:
        """Convert configuration to dictionary"""
        return {
            'prec_bits': self.prec_bits,
            'tol_log2': self.tol_log2,
            'cache_dir': str(self.cache_dir),
            'output_format': self.output_format,
            'escalation_bits': self.escalation_bits,
            'height_bits': self.height_bits,
            'divisor_height_bits': self.divisor_height_bits,
            'max_raw_form_level': self.max_raw_form_level,
            'max_raw_form_degree': self.max_raw_form_degree,
            'max_workers': self.max_workers,
            'cache_results': self.cache_results,
            'log_level': self.log_level,
        }


def _read_defaults(path: Optional[Path]) -> Dict[str, Any]:
    if path is None or not path.exists():
        return {}
    try:
        return json.loads(path.read_text(encoding='utf-8'))
    except (OSError, json.JSONDecodeError) as e:
        logger.warning(f"Ignoring unreadable config file {path}: {e}")
        return {}


def _read_environment(environ: Mapping[str, str]) -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for name, (field, cast) in ENV_FIELDS.items():
        raw = environ.get(name)
        if raw is None or raw == "":
            continue
        try:
            values[field] = cast(raw)
        except ValueError:
            raise InvalidConfig(field, f"environment variable {name}={raw!r} is not a valid {cast.__name__}")
    return values


def load_config(flags: Optional[Mapping[str, Any]] = None,
                environ: Optional[Mapping[str, str]] = None,
                defaults_path: Optional[Path] = DEFAULT_CONFIG_PATH) -> RunConfig:
    """Flags override environment, environment overrides file defaults"""
    merged: Dict[str, Any] = {}
    merged.update(_read_defaults(defaults_path))
    merged.update(_read_environment(os.environ if environ is None else environ))
    for key, value in (flags or {}).items():
        if value is not None:
            merged[key] = value
    return RunConfig(merged).validate()
