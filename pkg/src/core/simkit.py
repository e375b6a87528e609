"""
Synthetic data and Monte-Carlo trials.

Windows are drawn as y = L g with L the lower Cholesky factor of R_y(theta)
and g standard normal. Randomness is keyed by (seed, trial, block): every
block of windows owns a counter-based Philox stream seeded from
SeedSequence([seed, trial, block]), and normals come from the inverse normal
CDF applied to open-interval uniforms, so a batch does not depend on how
trials are scheduled across threads.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd
import structlog
from scipy.special import ndtri

from config import settings
from .auxstats import PairIndex
from .errors import McReportInvalid, NumericalError, ValidationError
from .estimator import ScoringConfig, estimate_ideal, estimate_quant
from .model import Scenario, ParamVector, build_ry, cholesky_with_ridge
from .moment_cache import MomentCache

logger = structlog.get_logger(__name__)

# Windows generated per Philox stream.
BLOCK_WINDOWS = 8192

# Half a unit in the last place of a 53-bit uniform; keeps u inside (0, 1).
_HALF_ULP = 2.0 ** -54


class EstimatorMode(str, Enum):
    """Which receiver a Monte-Carlo run simulates."""
    QUANTIZED = "quantized"
    IDEAL = "ideal"


def _check_seed(seed: int, trial: int) -> None:
    if seed < 0 or trial < 0:
        raise ValidationError("seed and trial index must be non-negative", seed=seed, trial=trial)


def _window_blocks(scn: Scenario, theta: ParamVector, N: int, seed: int,
                   trial: int = 0) -> Iterator[np.ndarray]:
    if N < 1:
        raise ValidationError("N must be at least 1", N=N)
    _check_seed(seed, trial)
    factor = cholesky_with_ridge(build_ry(scn, theta), settings.ridge_scale, what="R_y")
    for block, lo in enumerate(range(0, N, BLOCK_WINDOWS)):
        rows = min(BLOCK_WINDOWS, N - lo)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, trial, block])))
        g = ndtri(rng.random((rows, scn.M)) + _HALF_ULP)
        yield g @ factor.T


def sample_windows(scn: Scenario, theta: ParamVector, N: int, seed: int, trial: int = 0) -> np.ndarray:
    """N independent zero-mean Gaussian windows with covariance R_y(theta)."""
    return np.vstack(list(_window_blocks(scn, theta, N, seed, trial)))


def hard_limit(Y: np.ndarray) -> np.ndarray:
    """Elementwise sign with sign(0) = +1, as int8."""
    return np.where(np.asarray(Y) >= 0, 1, -1).astype(np.int8)


@dataclass(frozen=True, eq=False)
class TrialBatch:
    """One synthetic dataset and the summary its estimator consumes.

    ``mu_emp`` is set for hard-limited batches, ``second_moment`` for ideal
    ones. ``windows`` holds Z (int8) or Y (float) when it was kept.
    """

    mode: EstimatorMode
    n_windows: int
    seed: int
    trial: int
    mu_emp: Optional[np.ndarray] = None
    second_moment: Optional[np.ndarray] = None
    windows: Optional[np.ndarray] = None

    @property
    def provenance(self) -> Tuple[int, int]:
        return (self.seed, self.trial)


def draw_batch(scn: Scenario, theta: ParamVector, N: int, seed: int, trial: int = 0,
               mode: EstimatorMode = EstimatorMode.QUANTIZED, keep_windows: bool = False) -> TrialBatch:
    """Draw one batch and accumulate its summary block by block."""
    mode = EstimatorMode(mode)
    gram = np.zeros((scn.M, scn.M), dtype=np.int64 if mode is EstimatorMode.QUANTIZED else float)
    kept: List[np.ndarray] = []
    for Y in _window_blocks(scn, theta, N, seed, trial):
        if mode is EstimatorMode.QUANTIZED:
            Z = hard_limit(Y)
            Zi = Z.astype(np.int64)
            gram += Zi.T @ Zi
            if keep_windows:
                kept.append(Z)
        else:
            gram += Y.T @ Y
            if keep_windows:
                kept.append(Y)
    windows = np.vstack(kept) if keep_windows else None
    if mode is EstimatorMode.QUANTIZED:
        return TrialBatch(mode, N, seed, trial, mu_emp=PairIndex(scn.M).extract(gram) / N, windows=windows)
    return TrialBatch(mode, N, seed, trial, second_moment=gram / N, windows=windows)


@dataclass(frozen=True, eq=False)
class McReport:
    """Empirical error covariance and relative uncertainty over K trials."""

    K: int
    mode: EstimatorMode
    theta_true: ParamVector
    r_hat: np.ndarray
    sigma_hat: np.ndarray
    estimates: np.ndarray
    trial_ids: np.ndarray
    n_failed: int = 0

    @property
    def n_success(self) -> int:
        return int(self.trial_ids.size)

    @property
    def reportable(self) -> bool:
        """At least two successful trials back sigma_hat."""
        return self.n_success >= 2

    @property
    def failure_fraction(self) -> float:
        return self.n_failed / self.K

    def to_frame(self) -> pd.DataFrame:
        """Per-trial estimates with columns trial, theta_1 ... theta_D."""
        frame = pd.DataFrame(self.estimates, columns=[f"theta_{d + 1}" for d in range(self.theta_true.D)])
        frame.insert(0, "trial", self.trial_ids)
        return frame


Estimator = Callable[[Scenario, TrialBatch, ScoringConfig], np.ndarray]


def _default_estimator(mode: EstimatorMode, theta_noise: float, cache: Optional[MomentCache]) -> Estimator:
    if mode is EstimatorMode.QUANTIZED:
        def quantized(scn: Scenario, batch: TrialBatch, cfg: ScoringConfig) -> np.ndarray:
            return estimate_quant(scn, batch.mu_emp, cfg, cache=cache, threads=1).final.src
        return quantized

    def ideal(scn: Scenario, batch: TrialBatch, cfg: ScoringConfig) -> np.ndarray:
        return estimate_ideal(scn, cfg=cfg, theta_noise=theta_noise, second_moment=batch.second_moment).final.src
    return ideal


def summarize_trials(theta_true: ParamVector, estimates: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """R_hat = mean of (est - theta)(est - theta)^T and sigma_hat_d = sqrt(R_hat_dd) / theta_d."""
    D = theta_true.D
    if estimates.shape[0] == 0:
        return np.full((D, D), np.nan), np.full(D, np.nan)
    err = estimates - theta_true.src
    r_hat = err.T @ err / estimates.shape[0]
    return r_hat, np.sqrt(np.diag(r_hat)) / theta_true.src


def run_mc(scn: Scenario, theta_true: ParamVector, N: int, K: int, cfg: Optional[ScoringConfig] = None,
           seed: int = 0, mode: EstimatorMode = EstimatorMode.QUANTIZED, threads: Optional[int] = None,
           estimator: Optional[Estimator] = None, cache: Optional[MomentCache] = None,
           progress: Optional[Callable[[int], None]] = None) -> McReport:
    """Run K independent trials and collect the empirical error statistics.

    Trials that raise a numerical error are excluded from R_hat and counted;
    the run fails with McReportInvalid when more than
    ``settings.mc_failure_fraction`` of them fail. Results are reduced in
    trial order, so the report does not depend on ``threads``.
    """
    mode = EstimatorMode(mode)
    if K < 1:
        raise ValidationError("K must be at least 1", K=K)
    if mode is EstimatorMode.QUANTIZED and theta_true.theta_noise != 1.0:
        raise ValidationError("quantized runs fix theta_0 = 1", theta_0=theta_true.theta_noise)
    cfg = cfg or ScoringConfig()
    estimator = estimator or _default_estimator(mode, theta_true.theta_noise, cache)

    def trial(k: int) -> Optional[np.ndarray]:
        try:
            batch = draw_batch(scn, theta_true, N, seed, trial=k, mode=mode)
            est = np.asarray(estimator(scn, batch, cfg), dtype=float)
        except NumericalError as exc:
            logger.warning("mc_trial_failed", trial=k, mode=mode.value, error=str(exc))
            est = None
        if progress is not None:
            progress(k)
        return est

    workers = max(1, threads or settings.default_threads)
    if workers == 1:
        outcomes = [trial(k) for k in range(K)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(trial, range(K)))

    ok = [k for k, est in enumerate(outcomes) if est is not None]
    n_failed = K - len(ok)
    if n_failed > settings.mc_failure_fraction * K:
        raise McReportInvalid("too many Monte-Carlo trials failed", failed=n_failed, K=K,
                              limit=settings.mc_failure_fraction)
    estimates = np.array([outcomes[k] for k in ok], dtype=float).reshape(len(ok), theta_true.D)
    r_hat, sigma_hat = summarize_trials(theta_true, estimates)
    logger.info("mc_run_finished", mode=mode.value, K=K, failed=n_failed, N=N,
                sigma_hat=np.round(sigma_hat, 9).tolist())
    return McReport(K=K, mode=mode, theta_true=theta_true, r_hat=r_hat, sigma_hat=sigma_hat,
                    estimates=estimates, trial_ids=np.asarray(ok, dtype=np.int64), n_failed=n_failed)
