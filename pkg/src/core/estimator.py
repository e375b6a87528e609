"""
Fisher-scoring estimators of the source powers.

The quantized estimator maximizes the auxiliary (quadratic-statistics)
likelihood of hard-limited windows; it only sees the data through the
empirical mean of the reduced statistics. The ideal estimator is Gaussian
maximum likelihood on unquantized windows with the noise power known; it only
sees the data through the empirical second-moment matrix. Both apply plain
unit scoring steps followed by element-wise flooring at theta_floor.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import structlog
from scipy import linalg

from config import settings
from .auxstats import AuxMoments, aux_moments, empirical_mean_stats
from .errors import SingularFisherError, ValidationError, FactorizationError
from .infometrics import fisher_ideal
from .model import Scenario, ParamVector, build_model, db_to_linear
from .moment_cache import MomentCache

logger = structlog.get_logger(__name__)

# Relative eigenvalue threshold below which a Fisher matrix counts as singular.
_SINGULAR_RTOL = 1e-10


@dataclass
class ScoringConfig:
    """Iteration count, start point and back-projection floor of scoring."""

    iterations: int = 5
    theta_floor: float = field(default_factory=lambda: db_to_linear(settings.default_floor_db))
    theta_init: Optional[Sequence[float]] = None
    log_convergence: bool = False
    freeze_cov: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValidationError("scoring needs at least one iteration", iterations=self.iterations)
        if not self.theta_floor > 0.0:
            raise ValidationError("theta_floor must be positive", theta_floor=self.theta_floor)
        if self.theta_init is not None:
            init = np.asarray(self.theta_init, dtype=float)
            if np.any(init < self.theta_floor):
                raise ValidationError("theta_init must not lie below theta_floor",
                                      theta_init=init.tolist(), theta_floor=self.theta_floor)

    def start(self, D: int) -> np.ndarray:
        if self.theta_init is None:
            return np.full(D, self.theta_floor)
        init = np.asarray(self.theta_init, dtype=float)
        if init.shape != (D,):
            raise ValidationError("theta_init does not match the source count", D=D, got=init.shape)
        return init.copy()


@dataclass(frozen=True, eq=False)
class EstimationResult:
    """Scoring trajectory theta^(0) ... theta^(I) and the data summary used."""

    trajectory: np.ndarray
    theta_noise: float
    summary: np.ndarray

    @property
    def final(self) -> ParamVector:
        return ParamVector(tuple(self.trajectory[-1]), self.theta_noise)

    def iterates(self) -> List[ParamVector]:
        return [ParamVector(tuple(row), self.theta_noise) for row in self.trajectory]


def _solve_fisher(fisher: np.ndarray, rhs: np.ndarray, theta_hat: np.ndarray) -> np.ndarray:
    eig = np.linalg.eigvalsh(fisher)
    if eig[0] <= _SINGULAR_RTOL * max(eig[-1], np.finfo(float).tiny):
        raise SingularFisherError("Fisher matrix is singular at the current iterate",
                                  theta_hat=np.round(theta_hat, 12).tolist(), eigenvalues=eig.tolist())
    return linalg.solve(fisher, rhs, assume_a="pos")


def scoring_step_quant(scn: Scenario, theta_hat: ParamVector, mu_emp: np.ndarray,
                       aux: Optional[AuxMoments] = None, cache: Optional[MomentCache] = None,
                       threads: Optional[int] = None) -> np.ndarray:
    """Scoring update (J^T R^-1 J)^-1 J^T R^-1 (mu_emp - mu(theta_hat))."""
    mu_emp = np.asarray(mu_emp, dtype=float)
    if mu_emp.shape != (scn.n_pairs,):
        raise ValidationError("mean statistics have the wrong length", expected=scn.n_pairs, got=mu_emp.shape)
    if np.any(np.abs(mu_emp) > 1.0):
        raise ValidationError("mean statistics must lie in [-1, 1]")
    aux = aux if aux is not None else aux_moments(scn, theta_hat, cache=cache, threads=threads)
    whitened = aux.whitened_jac()
    fisher = 0.5 * (aux.jac.T @ whitened + (aux.jac.T @ whitened).T)
    score = whitened.T @ (mu_emp - aux.mu)
    return _solve_fisher(fisher, score, theta_hat.src)


def estimate_quant(scn: Scenario, data: np.ndarray, cfg: Optional[ScoringConfig] = None,
                   cache: Optional[MomentCache] = None, threads: Optional[int] = None) -> EstimationResult:
    """Estimate the source powers from hard-limited windows.

    Args:
        data: N x M matrix of +-1 windows, or the precomputed length-C
            vector of empirical mean statistics.
    """
    cfg = cfg or ScoringConfig()
    data = np.asarray(data)
    if data.ndim == 1:
        mu_emp = data.astype(float)
    else:
        if data.shape[1] != scn.M:
            raise ValidationError("window length does not match the scenario", M=scn.M, got=data.shape[1])
        mu_emp = empirical_mean_stats(data)

    theta = cfg.start(scn.D)
    trajectory = [theta.copy()]
    frozen_cov = None
    for i in range(1, cfg.iterations + 1):
        current = ParamVector(tuple(theta), 1.0)
        aux = aux_moments(scn, current, cache=cache, threads=threads, cov=frozen_cov)
        if cfg.freeze_cov and frozen_cov is None:
            frozen_cov = aux.cov
        step = scoring_step_quant(scn, current, mu_emp, aux=aux)
        theta = np.maximum(cfg.theta_floor, theta + step)
        trajectory.append(theta.copy())
        if cfg.log_convergence:
            logger.info("scoring_iteration", mode="quantized", iteration=i,
                        theta=np.round(theta, 9).tolist(), step_norm=float(np.linalg.norm(step)))
    return EstimationResult(trajectory=np.array(trajectory), theta_noise=1.0, summary=mu_emp)


def scoring_step_ideal(scn: Scenario, theta_hat: ParamVector, second_moment: np.ndarray) -> np.ndarray:
    """Gaussian scoring update F^-1 s for one window with theta_0 known.

    The score per window is s_a = 0.5 [tr(R^-1 dR_a R^-1 S) - tr(R^-1 dR_a)].
    """
    model = build_model(scn, theta_hat)
    try:
        factor = linalg.cho_factor(model.ry, lower=True)
    except linalg.LinAlgError as exc:
        raise FactorizationError("R_y is not positive definite", theta_hat=theta_hat.theta_src) from exc
    r_inv_s = linalg.cho_solve(factor, second_moment)
    score = np.empty(scn.D)
    for a in range(scn.D):
        w = linalg.cho_solve(factor, model.dry(a, scn))
        score[a] = 0.5 * (np.sum(w * r_inv_s.T) - np.trace(w))
    return _solve_fisher(fisher_ideal(scn, theta_hat), score, theta_hat.src)


def estimate_ideal(scn: Scenario, data: Optional[np.ndarray] = None, cfg: Optional[ScoringConfig] = None,
                   theta_noise: float = 1.0, second_moment: Optional[np.ndarray] = None) -> EstimationResult:
    """Estimate the source powers from unquantized windows (noise power known).

    Args:
        data: N x M matrix of real windows.
        second_moment: precomputed M x M empirical second-moment matrix,
            used instead of ``data``.
    """
    cfg = cfg or ScoringConfig()
    if second_moment is None:
        if data is None:
            raise ValidationError("estimate_ideal needs windows or a second-moment matrix")
        data = np.asarray(data, dtype=float)
        if data.ndim != 2 or data.shape[1] != scn.M:
            raise ValidationError("window length does not match the scenario", M=scn.M, shape=data.shape)
        second_moment = second_moment_matrix(data)
    else:
        second_moment = np.asarray(second_moment, dtype=float)
        if second_moment.shape != (scn.M, scn.M):
            raise ValidationError("second-moment matrix must be M x M", M=scn.M, shape=second_moment.shape)

    theta = cfg.start(scn.D)
    trajectory = [theta.copy()]
    for i in range(1, cfg.iterations + 1):
        step = scoring_step_ideal(scn, ParamVector(tuple(theta), theta_noise), second_moment)
        theta = np.maximum(cfg.theta_floor, theta + step)
        trajectory.append(theta.copy())
        if cfg.log_convergence:
            logger.info("scoring_iteration", mode="ideal", iteration=i,
                        theta=np.round(theta, 9).tolist(), step_norm=float(np.linalg.norm(step)))
    return EstimationResult(trajectory=np.array(trajectory), theta_noise=theta_noise, summary=second_moment)


def second_moment_matrix(Y: np.ndarray) -> np.ndarray:
    """Empirical second-moment matrix Y^T Y / N of N windows."""
    Y = np.asarray(Y, dtype=float)
    if Y.shape[0] < 1:
        raise ValidationError("need at least one window")
    return (Y.T @ Y) / Y.shape[0]
