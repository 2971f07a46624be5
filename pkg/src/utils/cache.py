"""Point cache: one JSON file per (D, N, c, a, precBits)"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from ..core.errors import CorruptCache
from ..heegner.numkernel import BigComplex
from ..heegner.points import EvaluatedPoint

logger = logging.getLogger(__name__)

CacheKey = Tuple[int, int, int, int, int]
REQUIRED_FIELDS = ("D", "N", "c", "a", "tauDesc", "precBits", "b", "c_value", "errExp")


class PointCache:
    """Persistent store of evaluated CM points"""

    def __init__(self, cache_dir: Path):
        self.cache_dir = Path(cache_dir)

    @staticmethod
    def ensure_directory(path: Path) -> None:
        path.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def safe_write_file(file_path: Path, content: str, encoding: str = 'utf-8') -> bool:
        """Write to a sibling .tmp file, then rename over the target"""
        try:
            PointCache.ensure_directory(file_path.parent)
            tmp = file_path.with_suffix(file_path.suffix + ".tmp")
            tmp.write_text(content, encoding=encoding)
            tmp.replace(file_path)
            return True
        except OSError as e:
            logger.error(f"Failed to write cache file {file_path}: {e}")
            return False

    def path_for(self, key: CacheKey) -> Path:
        D, N, c, a, prec_bits = key
        return self.cache_dir / f"D{D}_N{N}_c{c}_a{a}_B{prec_bits}.json"

    @staticmethod
    def _encode(key: CacheKey, point: EvaluatedPoint) -> Dict[str, Any]:
        D, N, c, a, prec_bits = key
        return {
            "D": D, "N": N, "c": c, "a": a,
            "tauDesc": point.tau_desc,
            "precBits": prec_bits,
            "b": point.b_val.to_dict(),
            # "c" already holds the conductor
            "c_value": point.c_val.to_dict(),
            "errExp": point.err_exp,
            "index": list(point.index),
        }

    @staticmethod
    def _decode(data: Dict[str, Any], key: CacheKey) -> EvaluatedPoint:
        missing = [f for f in REQUIRED_FIELDS if f not in data]
        if missing:
            raise CorruptCache(f"Cache entry lacks fields {missing}", {"missing": missing})
        stored = (data["D"], data["N"], data["c"], data["a"], data["precBits"])
        if tuple(stored) != tuple(key):
            raise CorruptCache(f"Cache entry key {stored} does not match {key}", {"stored": list(stored)})
        try:
            b_val = BigComplex.from_dict(data["b"])
            c_val = BigComplex.from_dict(data["c_value"])
        except (KeyError, TypeError, ValueError) as e:
            raise CorruptCache(f"Malformed number in cache entry: {e}")
        return EvaluatedPoint(b_val, c_val, data["precBits"], data["N"], tau_desc=data["tauDesc"],
                              index=tuple(data.get("index", (0, 1))))

    def load(self, key: CacheKey) -> Optional[EvaluatedPoint]:
        """Cached point for key, None on a miss or an unreadable entry"""
        path = self.path_for(key)
        if not path.exists():
            logger.debug(f"Cache miss for {key}")
            return None
        try:
            data = json.loads(path.read_text(encoding='utf-8'))
            point = self._decode(data, key)
        except (OSError, json.JSONDecodeError) as e:
            logger.warning(f"Ignoring unreadable cache entry {path}: {e}")
            return None
        except CorruptCache as e:
            logger.warning(f"Ignoring corrupt cache entry {path}: {e.message}")
            return None
        logger.info(f"Cache hit for {key}")
        return point

    def load_strict(self, key: CacheKey) -> Optional[EvaluatedPoint]:
        """Like load, but raise CorruptCache instead of ignoring a bad entry"""
        path = self.path_for(key)
        if not path.exists():
            return None
        try:
            data = json.loads(path.read_text(encoding='utf-8'))
        except (OSError, json.JSONDecodeError) as e:
            raise CorruptCache(f"Unreadable cache entry {path}: {e}")
        return self._decode(data, key)

    def store(self, key: CacheKey, point: EvaluatedPoint) -> bool:
        return self.safe_write_file(self.path_for(key), json.dumps(self._encode(key, point), indent=2))
