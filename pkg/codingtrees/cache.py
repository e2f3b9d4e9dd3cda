import hashlib
from typing import Any, Dict, Optional

from pydantic import BaseModel, Field

from codingtrees.config import config


class CacheEntry(BaseModel):
    """Single cache entry with result and insertion tick"""

    result: Any
    tick: int


class OracleCache(BaseModel):
    """Memo for oracle answers (realizability, successor lists).

    Eviction drops the oldest insertion once ``max_size`` is exceeded. Ticks are a counter rather than a
    clock so cached runs stay reproducible.
    """

    cache: Dict[str, CacheEntry] = Field(default_factory=dict)
    max_size: int = Field(default_factory=lambda: config.cache_max_size)
    tick: int = Field(default=0)
    hits: int = Field(default=0)
    misses: int = Field(default=0)

    def _make_key(self, name: str, args: tuple) -> str:
        """Create a cache key from oracle name and arguments"""
        return hashlib.md5(str([name, str(args)]).encode()).hexdigest()

    def get(self, name: str, args: tuple) -> Optional[Any]:
        """Get cached result if present"""
        key = self._make_key(name, args)
        entry = self.cache.get(key)
        if entry is None:
            self.misses += 1
            return None
        self.hits += 1
        return entry.result

    def set(self, name: str, args: tuple, result: Any):
        """Cache an oracle answer"""
        key = self._make_key(name, args)
        self.tick += 1
        self.cache.pop(key, None)  # pylint: disable=no-member
        self.cache[key] = CacheEntry(result=result, tick=self.tick)

        # Dict order is insertion order, so the first key is the oldest
        if len(self.cache) > self.max_size:
            oldest_key = next(iter(self.cache))
            del self.cache[oldest_key]

    def __len__(self) -> int:
        return len(self.cache)
