"""
Fourth-moment tables and their cache.

A table holds E[z_a z_b z_c z_d] for every unordered 4-index set
{a < b < c < d} of one window, stored by colexicographic rank. Tables are
kept in a small in-process LRU keyed by (scenario fingerprint, theta
fingerprint) and can be written to / read from ``.npz`` files.

File format (version 1), a numpy ``.npz`` archive with the arrays:
    magic        "onebit-m4"
    version      1
    scenario     scenario fingerprint (hex string)
    theta        parameter fingerprint (hex string)
    M            window length
    moments      float64 vector of length binomial(M, 4), colex order
"""
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import structlog

from config import settings
from .errors import ValidationError

logger = structlog.get_logger(__name__)

CACHE_MAGIC = "onebit-m4"
CACHE_VERSION = 1


def _binomial_table(M: int) -> np.ndarray:
    table = np.zeros((M + 1, 5), dtype=np.int64)
    for n in range(M + 1):
        for k in range(5):
            table[n, k] = math.comb(n, k)
    return table


def colex_rank(sorted_idx: np.ndarray, M: int) -> np.ndarray:
    """Rank of sorted 4-index rows a < b < c < d in colexicographic order."""
    binom = _binomial_table(M)
    idx = np.asarray(sorted_idx, dtype=np.int64)
    return binom[idx[..., 0], 1] + binom[idx[..., 1], 2] + binom[idx[..., 2], 3] + binom[idx[..., 3], 4]


@dataclass
class FourthMomentTable:
    """Fourth sign moments for every 4-index set of one (scenario, theta)."""

    M: int
    scenario_fp: str
    theta_fp: str
    moments: np.ndarray
    n_evaluations: int = 0

    def __post_init__(self):
        expected = math.comb(self.M, 4)
        if self.moments.shape != (expected,):
            raise ValidationError("fourth-moment table has the wrong length",
                                  expected=expected, got=self.moments.shape)

    @property
    def key(self) -> Tuple[str, str]:
        return (self.scenario_fp, self.theta_fp)

    def lookup(self, sorted_idx: np.ndarray) -> np.ndarray:
        return self.moments[colex_rank(sorted_idx, self.M)]


class MomentCache:
    """LRU of fourth-moment tables with optional file persistence."""

    def __init__(self, max_entries: Optional[int] = None, cache_dir: Optional[Path] = None):
        self.max_entries = settings.moment_cache_entries if max_entries is None else max_entries
        self.cache_dir = Path(cache_dir or settings.cache_dir)
        self._tables: "OrderedDict[Tuple[str, str], FourthMomentTable]" = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def get(self, scenario_fp: str, theta_fp: str) -> Optional[FourthMomentTable]:
        """Return a cached table and mark it most recently used."""
        key = (scenario_fp, theta_fp)
        with self._lock:
            table = self._tables.get(key)
            if table is None:
                self.misses += 1
                return None
            self._tables.move_to_end(key)
            self.hits += 1
        logger.debug("moment_cache_hit", scenario=scenario_fp, theta=theta_fp)
        return table

    def put(self, table: FourthMomentTable) -> None:
        if self.max_entries <= 0:
            return
        with self._lock:
            self._tables[table.key] = table
            self._tables.move_to_end(table.key)
            while len(self._tables) > self.max_entries:
                self._tables.popitem(last=False)

    def clear(self) -> None:
        with self._lock:
            self._tables.clear()
            self.hits = 0
            self.misses = 0

    def default_path(self, scenario_fp: str, theta_fp: str) -> Path:
        return self.cache_dir / f"m4_{scenario_fp}_{theta_fp}.npz"

    def dump(self, table: FourthMomentTable, path: Optional[Union[str, Path]] = None) -> Path:
        """Write a table to disk and return the file path."""
        target = Path(path) if path else self.default_path(*table.key)
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "wb") as fh:
            np.savez_compressed(
                fh,
                magic=np.array(CACHE_MAGIC),
                version=np.array(CACHE_VERSION),
                scenario=np.array(table.scenario_fp),
                theta=np.array(table.theta_fp),
                M=np.array(table.M),
                moments=table.moments,
            )
        logger.info("moment_table_written", path=str(target), M=table.M, count=table.moments.size)
        return target

    def load(self, path: Union[str, Path], register: bool = True) -> FourthMomentTable:
        """Read a table from disk, validating the header."""
        source = Path(path)
        if not source.exists():
            raise ValidationError("moment table file not found", path=str(source))
        with np.load(source, allow_pickle=False) as data:
            if "magic" not in data or str(data["magic"]) != CACHE_MAGIC:
                raise ValidationError("not a fourth-moment table file", path=str(source))
            version = int(data["version"])
            if version != CACHE_VERSION:
                raise ValidationError("unsupported moment table version", path=str(source), version=version)
            table = FourthMomentTable(
                M=int(data["M"]),
                scenario_fp=str(data["scenario"]),
                theta_fp=str(data["theta"]),
                moments=np.array(data["moments"], dtype=float),
            )
        if register:
            self.put(table)
        return table

    def list_files(self) -> List[Path]:
        if not self.cache_dir.exists():
            return []
        return sorted(self.cache_dir.glob("m4_*.npz"))

    def cleanup(self) -> int:
        """Delete every cache file; return how many were removed."""
        files = self.list_files()
        for f in files:
            f.unlink()
        return len(files)

    def stats(self) -> Dict[str, int]:
        with self._lock:
            return {"entries": len(self._tables), "hits": self.hits, "misses": self.misses}


# Global cache instance
moment_cache = MomentCache()


def get_moment_cache() -> MomentCache:
    """Get the global moment cache instance."""
    return moment_cache
