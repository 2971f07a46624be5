"""
Tests for configuration loading and validation
"""

import json

import pytest

from src.core.config import RunConfig, load_config
from src.core.errors import InvalidConfig


class TestRunConfig:
    """Test RunConfig defaults and validation"""

    def test_defaults(self):
        config = RunConfig().validate()
        assert config.prec_bits == 300
        assert config.tol_log2 == -100
        assert config.output_format == "json"
        assert config.escalation_bits == [300, 600, 1200, 2400]
        assert config.height_bits == 64
        assert config.divisor_height_bits == 160

    def test_escalation_schedule(self):
        config = RunConfig()
        assert config.escalation_schedule() == [300, 600, 1200, 2400]
        assert config.escalation_schedule(400) == [400, 600, 1200, 2400]
        assert config.escalation_schedule(3000) == [3000]

    def test_low_precision_rejected(self):
        with pytest.raises(InvalidConfig) as exc:
            RunConfig({"prec_bits": 32}).validate()
        assert exc.value.field == "prec_bits"

    def test_loose_tolerance_rejected(self):
        with pytest.raises(InvalidConfig):
            RunConfig({"tol_log2": -8}).validate()

    def test_unknown_format_rejected(self):
        with pytest.raises(InvalidConfig):
            RunConfig({"output_format": "xml"}).validate()

    def test_update_and_dict(self):
        config = RunConfig()
        config.update_config({"prec_bits": 500})
        assert config.prec_bits == 500
        assert config.to_dict()["prec_bits"] == 500


class TestLoadConfig:
    """Test precedence: flags over environment over file defaults"""

    def test_file_defaults(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"prec_bits": 256, "height_bits": 48}))
        config = load_config(environ={}, defaults_path=path)
        assert config.prec_bits == 256
        assert config.height_bits == 48

    def test_environment_overrides_file(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"prec_bits": 256}))
        config = load_config(environ={"HEEGNER1_PREC_BITS": "400", "HEEGNER1_CACHE_DIR": str(tmp_path)},
                             defaults_path=path)
        assert config.prec_bits == 400
        assert config.cache_dir == tmp_path

    def test_flags_override_environment(self):
        config = load_config({"prec_bits": 500, "tol_log2": None},
                             environ={"HEEGNER1_PREC_BITS": "400", "HEEGNER1_TOL_LOG2": "-80"},
                             defaults_path=None)
        assert config.prec_bits == 500
        assert config.tol_log2 == -80

    def test_bad_environment_value(self):
        with pytest.raises(InvalidConfig):
            load_config(environ={"HEEGNER1_PREC_BITS": "lots"}, defaults_path=None)

    def test_unreadable_file_is_ignored(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{not json")
        assert load_config(environ={}, defaults_path=path).prec_bits == 300

    def test_invalid_flag(self):
        with pytest.raises(InvalidConfig):
            load_config({"prec_bits": 32}, environ={}, defaults_path=None)
