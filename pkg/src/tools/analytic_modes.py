"""
Analytic sweep modes: information loss and predicted uncertainties.
"""
from typing import List

from core.infometrics import fisher_report, info_loss

from .base import ModeCategory, ModeResult, PointContext, SweepMode, register_mode


@register_mode
class LossMode(SweepMode):
    """Per-source information loss chi_d in dB (ideal over quantized CRB diagonal)."""

    name = "loss"
    category = ModeCategory.ANALYTIC

    def columns(self, D: int) -> List[str]:
        return [f"chi_{d + 1}_db" for d in range(D)]

    def compute(self, ctx: PointContext) -> ModeResult:
        _, chi_db = info_loss(ctx.scenario, ctx.theta, cache=ctx.cache, threads=ctx.threads)
        return ModeResult(
            success=True,
            data=dict(zip(self.columns(ctx.theta.D), chi_db.tolist())),
            metadata={"mode": self.name, "index": ctx.index},
        )


@register_mode
class CrbMode(SweepMode):
    """Predicted relative uncertainty for N windows, ideal and hard-limited receiver."""

    name = "crb"
    category = ModeCategory.ANALYTIC

    def columns(self, D: int) -> List[str]:
        return [f"sigma_ideal_{d + 1}" for d in range(D)] + [f"sigma_quant_{d + 1}" for d in range(D)]

    def compute(self, ctx: PointContext) -> ModeResult:
        report = fisher_report(ctx.scenario, ctx.theta, ctx.n, cache=ctx.cache, threads=ctx.threads)
        values = report.crb_sigma_ideal.tolist() + report.crb_sigma_quant.tolist()
        return ModeResult(
            success=True,
            data=dict(zip(self.columns(ctx.theta.D), values)),
            metadata={"mode": self.name, "index": ctx.index, "loss_db": report.loss_db.tolist()},
        )
