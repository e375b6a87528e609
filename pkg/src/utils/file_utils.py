"""
File helpers: scenario-file lookup and parsing, atomic CSV output.

Scenario files are flat ``key = value`` text, one key per line, with ``#``
starting a comment. Recognized keys:

    D              number of sources
    M              samples per window
    sampler_ratio  sampler rate over the noise band (must be 1)
    omega_bar      comma-separated relative center frequencies
    bandwidth_bar  comma-separated relative bandwidths
    name           optional label

Numbers may be written as fractions, e.g. ``bandwidth_bar = 1/64, 1/64``.
"""
import os
import tempfile
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union
import sys

import pandas as pd

# Ensure proper path setup
current_dir = Path(__file__).parent
src_dir = current_dir.parent
sys.path.insert(0, str(src_dir))

from config import settings
from core.errors import ScenarioFileError, ValidationError
from core.model import Scenario

SCENARIO_KEYS = ("D", "M", "sampler_ratio", "omega_bar", "bandwidth_bar", "name")
_REQUIRED_KEYS = ("D", "M", "omega_bar", "bandwidth_bar")


def get_file_search_paths() -> List[Path]:
    """Directories searched for relative scenario paths, in order."""
    return [
        settings.scenario_dir,
        settings.data_dir,
        settings.project_root,
        Path.cwd(),
    ]


def find_file(filename: Union[str, Path]) -> Optional[Path]:
    """
    Find a file as given or in the search locations.

    Args:
        filename: The filename to search for

    Returns:
        Path to the file if found, None otherwise
    """
    path = Path(filename)
    if path.exists():
        return path
    if path.is_absolute():
        return None
    for location in get_file_search_paths():
        candidate = location / path
        if candidate.exists():
            return candidate
    return None


def _parse_number(text: str, key: str, path: str, line: int) -> float:
    try:
        return float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError):
        raise ScenarioFileError(f"'{text.strip()}' is not a number", path=path, line=line, field=key)


def _parse_int(text: str, key: str, path: str, line: int) -> int:
    value = _parse_number(text, key, path, line)
    if value != int(value):
        raise ScenarioFileError(f"{key} must be an integer", path=path, line=line, field=key)
    return int(value)


def _read_entries(path: Path) -> Dict[str, Tuple[str, int]]:
    entries: Dict[str, Tuple[str, int]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ScenarioFileError("expected 'key = value'", path=str(path), line=lineno)
            key, value = (part.strip() for part in text.split("=", 1))
            if key not in SCENARIO_KEYS:
                raise ScenarioFileError(f"unknown key '{key}'", path=str(path), line=lineno, field=key)
            if key in entries:
                raise ScenarioFileError(f"duplicate key '{key}'", path=str(path), line=lineno, field=key)
            if not value:
                raise ScenarioFileError(f"empty value for '{key}'", path=str(path), line=lineno, field=key)
            entries[key] = (value, lineno)
    return entries


def parse_scenario_file(filename: Union[str, Path]) -> Scenario:
    """Parse and validate a scenario file.

    Raises:
        ScenarioFileError: with the path, line number and field name of the
            offending entry.
    """
    path = find_file(filename)
    if path is None:
        raise ScenarioFileError("scenario file not found", path=str(filename))
    p = str(path)
    entries = _read_entries(path)
    for key in _REQUIRED_KEYS:
        if key not in entries:
            raise ScenarioFileError(f"missing required key '{key}'", path=p, field=key)

    D = _parse_int(entries["D"][0], "D", p, entries["D"][1])
    if D < 1:
        raise ScenarioFileError("D must be at least 1", path=p, line=entries["D"][1], field="D")
    M = _parse_int(entries["M"][0], "M", p, entries["M"][1])
    vectors = {}
    for key in ("omega_bar", "bandwidth_bar"):
        value, lineno = entries[key]
        items = value.split(",")
        if any(not item.strip() for item in items):
            raise ScenarioFileError(f"empty entry in '{key}'", path=p, line=lineno, field=key)
        vectors[key] = [_parse_number(item, key, p, lineno) for item in items]
        if len(vectors[key]) != D:
            raise ScenarioFileError(f"'{key}' lists {len(vectors[key])} values but D = {D}",
                                    path=p, line=lineno, field=key)
    ratio = 1.0
    if "sampler_ratio" in entries:
        ratio = _parse_number(entries["sampler_ratio"][0], "sampler_ratio", p, entries["sampler_ratio"][1])
    name = entries["name"][0] if "name" in entries else path.stem

    try:
        return Scenario(vectors["omega_bar"], vectors["bandwidth_bar"], M, sampler_ratio=ratio, name=name)
    except ValidationError as exc:
        field = exc.context.get("field")
        line = entries[field][1] if field in entries else None
        raise ScenarioFileError(exc.message, path=p, line=line, field=field) from exc


def format_scenario(scn: Scenario) -> str:
    """Render a scenario in the file format accepted by parse_scenario_file."""
    lines = [
        f"name = {scn.name}" if scn.name else None,
        f"D = {scn.D}",
        f"M = {scn.M}",
        f"sampler_ratio = {scn.sampler_ratio:g}",
        "omega_bar = " + ", ".join(f"{w:.17g}" for w in scn.omega),
        "bandwidth_bar = " + ", ".join(f"{b:.17g}" for b in scn.bandwidth),
    ]
    return "\n".join(line for line in lines if line is not None) + "\n"


def write_csv_atomic(frame: pd.DataFrame, target: Union[str, Path], digits: Optional[int] = None) -> Path:
    """Write a frame as CSV through a temporary file and an atomic rename.

    Floats are written with ``digits`` significant digits; on failure the
    temporary file is removed and any previous file at ``target`` is kept.
    """
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    digits = digits or settings.csv_significant_digits
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=target.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            frame.to_csv(fh, index=False, float_format=f"%.{digits}g")
        os.replace(tmp_name, target)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    return target
