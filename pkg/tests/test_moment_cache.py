"""
Tests for the fourth-moment table cache.
"""
import itertools
import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add src directory to Python path
src_dir = Path(__file__).parent.parent / "src"
sys.path.insert(0, str(src_dir))

from core.auxstats import fourth_moment_table
from core.errors import ValidationError
from core.model import Scenario, ParamVector
from core.moment_cache import FourthMomentTable, MomentCache, colex_rank


def _table(M: int, tag: str) -> FourthMomentTable:
    moments = np.linspace(-0.5, 0.5, math.comb(M, 4))
    return FourthMomentTable(M=M, scenario_fp="scn" + tag, theta_fp="theta" + tag, moments=moments)


def test_colex_rank_is_a_bijection():
    M = 9
    quads = np.array(list(itertools.combinations(range(M), 4)))
    ranks = colex_rank(quads, M)
    assert sorted(ranks.tolist()) == list(range(math.comb(M, 4)))
    assert colex_rank(np.array([0, 1, 2, 3]), M) == 0
    assert colex_rank(np.array([0, 1, 2, 4]), M) == 1


def test_table_rejects_wrong_length():
    with pytest.raises(ValidationError):
        FourthMomentTable(M=6, scenario_fp="a", theta_fp="b", moments=np.zeros(14))


def test_lru_eviction(tmp_path):
    cache = MomentCache(max_entries=2, cache_dir=tmp_path)
    first, second, third = _table(5, "1"), _table(5, "2"), _table(5, "3")
    cache.put(first)
    cache.put(second)
    assert cache.get(*first.key) is first
    cache.put(third)
    # second was least recently used
    assert cache.get(*second.key) is None
    assert cache.get(*first.key) is first
    assert cache.stats() == {"entries": 2, "hits": 2, "misses": 1}


def test_disabled_cache_stores_nothing(tmp_path):
    cache = MomentCache(max_entries=0, cache_dir=tmp_path)
    cache.put(_table(5, "x"))
    assert cache.stats()["entries"] == 0


def test_dump_and_load(tmp_path):
    cache = MomentCache(cache_dir=tmp_path)
    table = _table(7, "a")
    path = cache.dump(table)
    assert path == cache.default_path(*table.key)
    assert cache.list_files() == [path]

    fresh = MomentCache(cache_dir=tmp_path)
    loaded = fresh.load(path)
    assert loaded.key == table.key
    assert np.array_equal(loaded.moments, table.moments)
    assert fresh.get(*table.key) is loaded

    assert fresh.cleanup() == 1
    assert fresh.list_files() == []


def test_load_rejects_foreign_files(tmp_path):
    cache = MomentCache(cache_dir=tmp_path)
    bogus = tmp_path / "bogus.npz"
    np.savez(bogus, moments=np.zeros(5))
    with pytest.raises(ValidationError, match="not a fourth-moment table"):
        cache.load(bogus)
    with pytest.raises(ValidationError, match="not found"):
        cache.load(tmp_path / "missing.npz")


def test_persisted_table_is_reused(tmp_path):
    """A table on disk under the default name is picked up instead of recomputed."""
    scn = Scenario((0.25, 0.75), (0.1, 0.2), 5)
    theta = ParamVector((0.5, 2.0))
    writer = MomentCache(cache_dir=tmp_path)
    computed = fourth_moment_table(scn, theta, cache=writer)
    writer.dump(computed)

    reader = MomentCache(cache_dir=tmp_path)
    reused = fourth_moment_table(scn, theta, cache=reader)
    assert reused.n_evaluations == 0
    assert np.array_equal(reused.moments, computed.moments)


def test_stored_table_for_another_window_is_recomputed(tmp_path):
    scn = Scenario((0.25, 0.75), (0.1, 0.2), 5)
    theta = ParamVector((0.5, 2.0))
    cache = MomentCache(cache_dir=tmp_path)
    wrong_window = FourthMomentTable(M=6, scenario_fp=scn.fingerprint(), theta_fp=theta.fingerprint(),
                                     moments=np.zeros(math.comb(6, 4)))
    cache.dump(wrong_window, cache.default_path(scn.fingerprint(), theta.fingerprint()))

    table = fourth_moment_table(scn, theta, cache=cache)
    assert table.M == 5
    assert table.n_evaluations == math.comb(5, 4)


def test_stored_table_with_foreign_fingerprint_is_recomputed(tmp_path):
    scn = Scenario((0.25, 0.75), (0.1, 0.2), 5)
    theta = ParamVector((0.5, 2.0))
    cache = MomentCache(cache_dir=tmp_path)
    cache.dump(_table(5, "other"), cache.default_path(scn.fingerprint(), theta.fingerprint()))

    table = fourth_moment_table(scn, theta, cache=cache)
    assert table.key == (scn.fingerprint(), theta.fingerprint())
    assert table.n_evaluations > 0


def test_unreadable_stored_table_is_recomputed(tmp_path):
    scn = Scenario((0.25, 0.75), (0.1, 0.2), 5)
    theta = ParamVector((0.5, 2.0))
    cache = MomentCache(cache_dir=tmp_path)
    np.savez(cache.default_path(scn.fingerprint(), theta.fingerprint()), moments=np.zeros(5))

    table = fourth_moment_table(scn, theta, cache=cache)
    assert table.n_evaluations > 0
