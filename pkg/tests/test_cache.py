import pytest

from codingtrees.cache import CacheEntry, OracleCache


@pytest.fixture
def cache():
    return OracleCache(max_size=3)


def test_basic_cache_operations(cache):
    # Test setting and getting a value
    cache.set("admits", (1, "abc", True), True)
    result = cache.get("admits", (1, "abc", True))
    assert result is True

    # Test getting non-existent value
    result = cache.get("nonexistent", ())
    assert result is None
    assert cache.hits == 1
    assert cache.misses == 1


def test_cache_key_consistency(cache):
    # Test that same arguments produce same key
    key1 = cache._make_key("admits", (1, "abc"))
    key2 = cache._make_key("admits", (1, "abc"))
    assert key1 == key2

    # Different oracles never share keys
    assert cache._make_key("admits", (1,)) != cache._make_key("successors", (1,))


def test_false_answers_are_cached(cache):
    cache.set("admits", (2,), False)
    assert cache.get("admits", (2,)) is False


def test_cache_size_limit(cache):
    # Fill cache to max size
    cache.set("oracle1", (), "result1")
    cache.set("oracle2", (), "result2")
    cache.set("oracle3", (), "result3")

    # Add one more item, should remove oldest
    cache.set("oracle4", (), "result4")

    # First item should be gone
    assert cache.get("oracle1", ()) is None

    # Other items should still be there
    assert cache.get("oracle2", ()) == "result2"
    assert cache.get("oracle3", ()) == "result3"
    assert cache.get("oracle4", ()) == "result4"
    assert len(cache) == 3


def test_overwrite_refreshes_age(cache):
    cache.set("oracle1", (), "old")
    cache.set("oracle2", (), "result2")
    cache.set("oracle1", (), "new")
    cache.set("oracle3", (), "result3")
    cache.set("oracle4", (), "result4")

    # oracle2 is now the oldest entry
    assert cache.get("oracle2", ()) is None
    assert cache.get("oracle1", ()) == "new"


def test_ticks_are_monotonic(cache):
    cache.set("a", (), 1)
    cache.set("b", (), 2)
    ticks = [entry.tick for entry in cache.cache.values()]
    assert ticks == sorted(ticks)
    assert cache.tick == 2


def test_cache_entry_model():
    entry = CacheEntry(result=[1, 2], tick=5)
    assert entry.result == [1, 2]
    assert entry.tick == 5
