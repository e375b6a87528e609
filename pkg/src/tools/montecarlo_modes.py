"""
Monte-Carlo sweep modes: empirical uncertainty of the two estimators.

Both modes draw their windows from the same per-point seed, so at one grid
point the hard-limited and the ideal receiver see the same realizations.
"""
from typing import List

import numpy as np

from core.estimator import ScoringConfig
from core.model import db_to_linear
from core.simkit import EstimatorMode, run_mc

from .base import ModeCategory, ModeResult, PointContext, SweepMode, register_mode


class _MonteCarloMode(SweepMode):
    category = ModeCategory.MONTE_CARLO
    estimator_mode: EstimatorMode = EstimatorMode.QUANTIZED
    suffix: str = ""

    def columns(self, D: int) -> List[str]:
        return [f"sigma_hat_{self.suffix}_{d + 1}" for d in range(D)]

    def compute(self, ctx: PointContext) -> ModeResult:
        cfg = ScoringConfig(iterations=ctx.iterations, theta_floor=db_to_linear(ctx.floor_db))
        report = run_mc(ctx.scenario, ctx.theta, ctx.n, ctx.k, cfg=cfg, seed=ctx.point_seed(),
                        mode=self.estimator_mode, threads=ctx.threads, cache=ctx.cache)
        sigma = report.sigma_hat if report.reportable else np.full(ctx.theta.D, np.nan)
        trials = report.to_frame()
        trials.insert(0, "mode", self.name)
        trials.insert(0, "theta2_db", ctx.theta2_db)
        return ModeResult(
            success=True,
            data=dict(zip(self.columns(ctx.theta.D), sigma.tolist())),
            metadata={"mode": self.name, "index": ctx.index, "failed": report.n_failed,
                      "reportable": report.reportable, "trials": trials},
        )


@register_mode
class McQuantMode(_MonteCarloMode):
    """Empirical relative uncertainty of the hard-limited scoring estimator."""

    name = "mc-quant"
    estimator_mode = EstimatorMode.QUANTIZED
    suffix = "quant"


@register_mode
class McIdealMode(_MonteCarloMode):
    """Empirical relative uncertainty of the unquantized maximum-likelihood estimator."""

    name = "mc-ideal"
    estimator_mode = EstimatorMode.IDEAL
    suffix = "ideal"
