"""
Base classes and registry for sweep modes.

A sweep mode turns one grid point (scenario plus parameter vector) into a
few named output columns. Modes run their numerics in a worker thread and
report back through a ModeResult, so one failing point never tears down the
event loop of the sweep runner.
"""
import asyncio
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Type

import numpy as np
import structlog

from core.errors import OneBitError
from core.model import Scenario, ParamVector
from core.moment_cache import MomentCache

logger = structlog.get_logger(__name__)


class ModeCategory(Enum):
    """Categories for organizing sweep modes."""
    ANALYTIC = "analytic"
    MONTE_CARLO = "monte_carlo"


@dataclass
class PointContext:
    """Everything a mode needs to evaluate one grid point."""
    scenario: Scenario
    theta: ParamVector
    theta2_db: float
    index: int
    n: int
    k: int
    iterations: int
    floor_db: float
    seed: int
    threads: int = 1
    cache: Optional[MomentCache] = None

    def point_seed(self) -> int:
        """Seed of this grid point, derived from the run seed and the point index."""
        return int(np.random.SeedSequence([self.seed, self.index]).generate_state(1)[0])


@dataclass
class ModeResult:
    """Represents the result of evaluating one mode at one grid point."""
    success: bool
    data: Dict[str, float] = field(default_factory=dict)
    error: Optional[str] = None
    metadata: Dict[str, Any] = field(default_factory=dict)
    exception: Optional[BaseException] = field(default=None, repr=False)

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            "success": self.success,
            "data": self.data,
            "error": self.error,
            "metadata": {k: v for k, v in self.metadata.items() if k != "trials"},
        }


class SweepMode(ABC):
    """Abstract base class for all sweep modes."""

    name: str = ""
    category: ModeCategory = ModeCategory.ANALYTIC

    def __init__(self):
        if not self.name:
            self.name = self.__class__.__name__.lower().replace("mode", "")
        self.description = (self.__doc__ or "No description available").strip()

    @abstractmethod
    def columns(self, D: int) -> List[str]:
        """Output column names for a scenario with D sources."""

    @abstractmethod
    def compute(self, ctx: PointContext) -> ModeResult:
        """Evaluate the mode synchronously."""

    async def execute(self, ctx: PointContext) -> ModeResult:
        """Evaluate the mode in a worker thread, capturing package errors."""
        try:
            return await asyncio.to_thread(self.compute, ctx)
        except OneBitError as exc:
            logger.warning("mode_failed", mode=self.name, index=ctx.index, error=str(exc))
            return ModeResult(success=False, error=str(exc), exception=exc,
                              metadata={"mode": self.name, "index": ctx.index})


class ModeRegistry:
    """Registry for managing available sweep modes."""

    def __init__(self):
        self.modes: Dict[str, SweepMode] = {}
        self.categories: Dict[ModeCategory, List[str]] = {category: [] for category in ModeCategory}

    def register(self, mode: SweepMode) -> None:
        self.modes[mode.name] = mode
        self.categories[mode.category].append(mode.name)

    def get_mode(self, name: str) -> Optional[SweepMode]:
        return self.modes.get(name)

    def list_modes(self, category: Optional[ModeCategory] = None) -> List[str]:
        """List mode names, optionally filtered by category."""
        if category:
            return list(self.categories.get(category, []))
        return list(self.modes.keys())

    def describe(self, D: int = 2) -> List[Dict[str, Any]]:
        return [
            {"name": m.name, "category": m.category.value, "columns": m.columns(D), "description": m.description}
            for m in self.modes.values()
        ]

    async def execute_mode(self, name: str, ctx: PointContext) -> ModeResult:
        """Execute a mode by name."""
        mode = self.get_mode(name)
        if not mode:
            return ModeResult(success=False, error=f"Mode '{name}' not found")
        return await mode.execute(ctx)


# Global mode registry
mode_registry = ModeRegistry()


def register_mode(mode_class: Type[SweepMode]) -> Type[SweepMode]:
    """Decorator to register a sweep mode class."""
    mode_registry.register(mode_class())
    return mode_class


def get_mode_registry() -> ModeRegistry:
    """Get the global mode registry."""
    return mode_registry
