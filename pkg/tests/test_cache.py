"""
Tests for the persistent point cache
"""

import json

import pytest

from src.core.errors import CorruptCache
from src.heegner.eulerlab import CMPointSpec, eval_point
from src.utils.cache import PointCache

B = 160


@pytest.fixture(scope="module")
def point():
    return eval_point(CMPointSpec(-2, 1, 0, 5), B)


class TestPointCache:
    """Test store, load and corruption handling"""

    def test_round_trip(self, tmp_path, point):
        cache = PointCache(tmp_path)
        key = (-2, 5, 1, 0, B)
        assert cache.store(key, point)
        loaded = cache.load(key)
        assert loaded is not None
        assert loaded.err_exp == point.err_exp
        assert loaded.agrees_with(point)
        assert loaded.tau_desc == point.tau_desc

    def test_file_layout(self, tmp_path, point):
        cache = PointCache(tmp_path)
        cache.store((-2, 5, 1, 0, B), point)
        data = json.loads((tmp_path / f"D-2_N5_c1_a0_B{B}.json").read_text())
        assert data["c"] == 1
        assert set(data["c_value"]) == {"re", "im", "errExp", "prec"}

    def test_miss(self, tmp_path):
        assert PointCache(tmp_path).load((-2, 5, 1, 0, B)) is None

    def test_precision_is_part_of_key(self, tmp_path, point):
        cache = PointCache(tmp_path)
        cache.store((-2, 5, 1, 0, B), point)
        assert cache.load((-2, 5, 1, 0, 2 * B)) is None

    def test_corrupt_entry(self, tmp_path, point):
        cache = PointCache(tmp_path)
        key = (-2, 5, 1, 0, B)
        cache.store(key, point)
        path = cache.path_for(key)
        data = json.loads(path.read_text())
        del data["c_value"]
        path.write_text(json.dumps(data))
        assert cache.load(key) is None
        with pytest.raises(CorruptCache):
            cache.load_strict(key)

    def test_unparseable_entry(self, tmp_path):
        cache = PointCache(tmp_path)
        key = (-2, 5, 1, 0, B)
        cache.ensure_directory(tmp_path)
        cache.path_for(key).write_text("{")
        assert cache.load(key) is None
        with pytest.raises(CorruptCache):
            cache.load_strict(key)
