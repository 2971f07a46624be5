"""
Pytest configuration for the heegner-x1n test suite
"""

import sys
from pathlib import Path

import pytest

# Add project root to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.core.config import RunConfig
from src.core.runner import HeegnerRunner
from src.heegner.cmfields import field_data

# Configure pytest-asyncio
pytest_plugins = ("pytest_asyncio",)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long numeric acceptance runs (deselected by run_tests.py)")


@pytest.fixture
def run_config(tmp_path):
    """RunConfig with the cache redirected to a temporary directory"""
    return RunConfig({"cache_dir": str(tmp_path / "cache"), "max_workers": 2}).validate()


@pytest.fixture
def runner(run_config):
    return HeegnerRunner(run_config)


@pytest.fixture
def q_sqrt_m2():
    """Q(sqrt -2): dK = -8, class number 1, 5 inert and 1 mod 4"""
    return field_data(-2)


@pytest.fixture
def q_sqrt_m7():
    return field_data(-7)
