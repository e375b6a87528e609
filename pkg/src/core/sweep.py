"""
Sweep definitions and the concurrent sweep runner.

A sweep evaluates a set of modes at every point of a dB grid over the second
source power while the other sources stay at a fixed level. Grid points are
dispatched concurrently; rows are collected and written in grid order.
"""
import asyncio
import math
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, Field, field_validator, model_validator
from pydantic import ValidationError as PydanticValidationError

from config import settings, PRESETS
from .errors import NumericalError, OneBitError, ValidationError
from .model import Scenario, ParamVector
from .moment_cache import MomentCache, get_moment_cache

logger = structlog.get_logger(__name__)

LOSS_MODES = ("loss",)
UNCERTAINTY_MODES = ("crb", "mc-quant", "mc-ideal")

# Per command: the modes it accepts and the ones its output always carries.
COMMAND_MODES = {
    "loss": (LOSS_MODES, ("loss",)),
    "uncertainty": (UNCERTAINTY_MODES, ("crb",)),
}

# Index of the swept source (0-based).
SWEPT_SOURCE = 1


def parse_sweep_axis(text: str) -> Tuple[float, float, float]:
    """Parse ``FROM:TO[:STEP]`` in dB; STEP defaults to the configured grid step."""
    parts = [p.strip() for p in str(text).split(":")]
    if len(parts) not in (2, 3):
        raise ValidationError("sweep must be written FROM:TO or FROM:TO:STEP", sweep=text)
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise ValidationError("sweep bounds must be numbers", sweep=text)
    if len(values) == 2:
        values.append(settings.default_sweep_step_db)
    return values[0], values[1], values[2]


def _normalize_modes(value: Any) -> List[str]:
    if isinstance(value, str):
        value = value.split(",")
    seen: List[str] = []
    for item in value:
        name = str(item).strip().lower()
        if name and name not in seen:
            seen.append(name)
    return seen


def resolve_options(options: Dict[str, Any], preset: Optional[str] = None) -> Dict[str, Any]:
    """Fill unset options (None) from a preset, then from the settings defaults."""
    resolved = {k: v for k, v in options.items() if v is not None}
    if preset:
        if preset not in PRESETS:
            raise ValidationError(f"unknown preset '{preset}'", available=sorted(PRESETS))
        for key, value in PRESETS[preset].items():
            resolved.setdefault(key, value)
    defaults = {
        "n": settings.default_n,
        "k": settings.default_k,
        "iters": settings.default_iterations,
        "floor_db": settings.default_floor_db,
        "seed": settings.default_seed,
        "threads": settings.default_threads,
    }
    for key, value in defaults.items():
        resolved.setdefault(key, value)
    return resolved


class SweepSpec(BaseModel):
    """A validated sweep definition."""

    scenario: Path
    theta1_db: float
    sweep_from: float
    sweep_to: float
    sweep_step: float = Field(default_factory=lambda: settings.default_sweep_step_db)
    n: int = Field(default_factory=lambda: settings.default_n, ge=1)
    k: int = Field(default_factory=lambda: settings.default_k, ge=0)
    iters: int = Field(default_factory=lambda: settings.default_iterations, ge=1)
    floor_db: float = Field(default_factory=lambda: settings.default_floor_db)
    seed: int = Field(default_factory=lambda: settings.default_seed, ge=0)
    modes: List[str] = Field(default_factory=lambda: list(UNCERTAINTY_MODES))
    out: Optional[Path] = None
    preset: Optional[str] = None
    threads: int = Field(default_factory=lambda: settings.default_threads, ge=1)
    M: Optional[int] = Field(default=None, ge=2)
    trials_out: Optional[Path] = None

    @field_validator("modes", mode="before")
    @classmethod
    def _split_modes(cls, value: Any) -> List[str]:
        return _normalize_modes(value)

    @model_validator(mode="after")
    def _check_grid(self) -> "SweepSpec":
        if not self.sweep_step > 0:
            raise ValueError("sweep step must be positive")
        if self.sweep_from > self.sweep_to:
            raise ValueError("sweep start must not exceed sweep end")
        return self

    @classmethod
    def build(cls, **kwargs: Any) -> "SweepSpec":
        """Construct a spec, reporting problems as ValidationError."""
        try:
            return cls(**kwargs)
        except PydanticValidationError as exc:
            first = exc.errors()[0]
            field = ".".join(str(p) for p in first.get("loc", ())) or "sweep"
            raise ValidationError(f"invalid sweep definition: {first.get('msg')}", field=field) from exc

    def grid(self) -> np.ndarray:
        """Grid values floor((to - from) / step) + 1 points from ``sweep_from``."""
        count = int(math.floor((self.sweep_to - self.sweep_from) / self.sweep_step + 1e-9)) + 1
        return np.round(self.sweep_from + self.sweep_step * np.arange(count), 12)

    def load_scenario(self) -> Scenario:
        from utils.file_utils import parse_scenario_file

        scn = parse_scenario_file(self.scenario)
        if self.M is not None and self.M != scn.M:
            scn = scn.with_window(self.M)
        if scn.D < 2:
            raise ValidationError("sweeps need at least two sources", D=scn.D, path=str(self.scenario))
        return scn

    def theta_at(self, scn: Scenario, theta2_db: float) -> ParamVector:
        """Sources held at theta1_db except the swept one; theta_0 = 1."""
        levels = [self.theta1_db] * scn.D
        levels[SWEPT_SOURCE] = float(theta2_db)
        return ParamVector.from_db(levels, 0.0)


def command_modes(command: str, requested: Optional[Sequence[str]] = None) -> List[str]:
    """Modes a command evaluates; requested modes are checked against what it accepts."""
    if command not in COMMAND_MODES:
        raise ValidationError(f"unknown command '{command}'", available=sorted(COMMAND_MODES))
    allowed, required = COMMAND_MODES[command]
    if not requested:
        return list(allowed)
    names = _normalize_modes(requested)
    unsupported = [m for m in names if m not in allowed]
    if unsupported:
        raise ValidationError(f"'{command}' does not support mode(s) {', '.join(unsupported)}",
                              supported=list(allowed))
    return [m for m in required if m not in names] + names


class SweepRunner:
    """Evaluates the modes of a SweepSpec over its grid."""

    def __init__(self, spec: SweepSpec, registry=None, cache: Optional[MomentCache] = None,
                 on_point: Optional[Callable[[int, Dict[str, float]], None]] = None):
        from tools import get_mode_registry

        self.spec = spec
        self.registry = registry or get_mode_registry()
        self.cache = cache if cache is not None else get_moment_cache()
        self.on_point = on_point
        self.scenario = spec.load_scenario()
        self.modes = self._active_modes()
        self.trials: List[pd.DataFrame] = []

    def _active_modes(self) -> List[str]:
        unknown = [m for m in self.spec.modes if self.registry.get_mode(m) is None]
        if unknown:
            raise ValidationError("unknown sweep mode", modes=unknown, available=self.registry.list_modes())
        modes = list(self.spec.modes)
        if self.spec.k == 0:
            modes = [m for m in modes if not m.startswith("mc-")]
        if not modes:
            raise ValidationError("no sweep mode left to evaluate", requested=self.spec.modes, K=self.spec.k)
        return modes

    def columns(self) -> List[str]:
        cols = ["theta2_db"]
        for name in self.modes:
            cols.extend(self.registry.get_mode(name).columns(self.scenario.D))
        return cols

    def _split_threads(self, points: int) -> Tuple[int, int]:
        """(concurrent points, worker threads inside one point)."""
        total = self.spec.threads
        concurrent = max(1, min(total, points))
        return concurrent, max(1, total // concurrent)

    async def run_point(self, index: int, theta2_db: float, gate: asyncio.Semaphore,
                        inner_threads: int) -> Dict[str, float]:
        from tools import PointContext

        async with gate:
            started = time.perf_counter()
            ctx = PointContext(
                scenario=self.scenario,
                theta=self.spec.theta_at(self.scenario, theta2_db),
                theta2_db=float(theta2_db),
                index=index,
                n=self.spec.n,
                k=self.spec.k,
                iterations=self.spec.iters,
                floor_db=self.spec.floor_db,
                seed=self.spec.seed,
                threads=inner_threads,
                cache=self.cache,
            )
            row: Dict[str, float] = {"theta2_db": float(theta2_db)}
            for name in self.modes:
                result = await self.registry.execute_mode(name, ctx)
                if not result.success:
                    if isinstance(result.exception, OneBitError):
                        raise result.exception
                    raise NumericalError(result.error or "sweep mode failed", mode=name, theta2_db=theta2_db)
                row.update(result.data)
                if "trials" in result.metadata:
                    self.trials.append(result.metadata["trials"])
            logger.info("sweep_point_done", index=index, theta2_db=float(theta2_db),
                        elapsed=round(time.perf_counter() - started, 3))
            if self.on_point is not None:
                self.on_point(index, row)
            return row

    async def run(self) -> pd.DataFrame:
        """Evaluate every grid point and return the rows in grid order."""
        grid = self.spec.grid()
        concurrent, inner = self._split_threads(grid.size)
        gate = asyncio.Semaphore(concurrent)
        logger.info("sweep_started", points=int(grid.size), modes=self.modes, M=self.scenario.M,
                    concurrent=concurrent, inner_threads=inner)
        rows = await asyncio.gather(*(self.run_point(i, v, gate, inner) for i, v in enumerate(grid)))
        return pd.DataFrame(rows, columns=self.columns())

    def run_sync(self) -> pd.DataFrame:
        return asyncio.run(self.run())

    def trials_frame(self) -> pd.DataFrame:
        """Per-trial estimates of every Monte-Carlo mode, sorted by grid point."""
        if not self.trials:
            return pd.DataFrame(columns=["theta2_db", "mode", "trial"])
        frame = pd.concat(self.trials, ignore_index=True)
        return frame.sort_values(["theta2_db", "mode", "trial"], kind="stable").reset_index(drop=True)

    def write(self, frame: pd.DataFrame, target: Optional[Path] = None) -> Path:
        from utils.file_utils import write_csv_atomic

        target = target or self.spec.out
        if target is None:
            raise ValidationError("no output path given", field="out")
        path = write_csv_atomic(frame, target)
        if self.spec.trials_out is not None:
            write_csv_atomic(self.trials_frame(), self.spec.trials_out)
        return path
