"""
Fisher information of hard-limited and ideal (unquantized) windows, the
per-parameter information loss and analytic uncertainty predictions.
"""
import itertools
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import structlog
from scipy import linalg

from .auxstats import AuxMoments, aux_moments
from .errors import SingularFisherError, ValidationError, FactorizationError
from .model import Scenario, ParamVector, build_model, build_sigma_y
from .moment_cache import MomentCache
from .orthant import CorrSubset, orthant3, orthant4

logger = structlog.get_logger(__name__)


@dataclass(frozen=True, eq=False)
class FisherReport:
    """Both Fisher matrices, the information loss and predicted uncertainties."""

    f_quant: np.ndarray
    f_ideal: np.ndarray
    loss: np.ndarray
    crb_sigma_quant: np.ndarray
    crb_sigma_ideal: np.ndarray
    n_windows: int

    @property
    def loss_db(self) -> np.ndarray:
        return 10.0 * np.log10(self.loss)


def _symmetric(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def fisher_quantized(scn: Scenario, theta: ParamVector, aux: Optional[AuxMoments] = None,
                     cache: Optional[MomentCache] = None, threads: Optional[int] = None) -> np.ndarray:
    """Conservative Fisher matrix J^T R^-1 J of the hard-limited windows."""
    aux = aux if aux is not None else aux_moments(scn, theta, cache=cache, threads=threads)
    return _symmetric(aux.jac.T @ aux.whitened_jac())


def fisher_ideal(scn: Scenario, theta: ParamVector, joint_noise: bool = False) -> np.ndarray:
    """Gaussian Fisher matrix of one unquantized window.

    Entries are 0.5 tr(R^-1 dR_a R^-1 dR_b) over the source powers; with
    ``joint_noise`` the noise power theta_0 is appended as a last parameter.
    """
    model = build_model(scn, theta)
    try:
        factor = linalg.cho_factor(model.ry, lower=True)
    except linalg.LinAlgError as exc:
        raise FactorizationError("R_y is not positive definite") from exc
    derivs = [model.dry(d, scn) for d in range(scn.D)]
    if joint_noise:
        derivs.append(model.sigma_noise)
    whitened = [linalg.cho_solve(factor, dR) for dR in derivs]
    n = len(whitened)
    F = np.empty((n, n))
    for a in range(n):
        for b in range(a, n):
            F[a, b] = F[b, a] = 0.5 * np.sum(whitened[a] * whitened[b].T)
    return F


def inverse_diagonal(fisher: np.ndarray) -> np.ndarray:
    """Diagonal of the inverse Fisher matrix via a symmetric solve."""
    try:
        factor = linalg.cho_factor(fisher, lower=True)
    except linalg.LinAlgError as exc:
        raise SingularFisherError("Fisher matrix is singular or indefinite",
                                  eigenvalues=np.round(np.linalg.eigvalsh(fisher), 12).tolist()) from exc
    return np.diag(linalg.cho_solve(factor, np.eye(fisher.shape[0])))


def info_loss(scn: Scenario, theta: ParamVector, aux: Optional[AuxMoments] = None,
              cache: Optional[MomentCache] = None, threads: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Per-parameter information loss chi_d, linear and in dB."""
    chi = inverse_diagonal(fisher_ideal(scn, theta)) / inverse_diagonal(
        fisher_quantized(scn, theta, aux=aux, cache=cache, threads=threads))
    return chi, 10.0 * np.log10(chi)


def predict_sigma(fisher: np.ndarray, theta: ParamVector, N: int) -> np.ndarray:
    """Relative uncertainty (1/theta_d) sqrt([F^-1]_dd / N) for N windows."""
    if N < 1:
        raise ValidationError("N must be at least 1", N=N)
    return np.sqrt(inverse_diagonal(fisher) / N) / theta.src


def fisher_report(scn: Scenario, theta: ParamVector, N: int, cache: Optional[MomentCache] = None,
                  threads: Optional[int] = None) -> FisherReport:
    aux = aux_moments(scn, theta, cache=cache, threads=threads)
    f_quant = fisher_quantized(scn, theta, aux=aux)
    f_ideal = fisher_ideal(scn, theta)
    loss = inverse_diagonal(f_ideal) / inverse_diagonal(f_quant)
    return FisherReport(
        f_quant=f_quant, f_ideal=f_ideal, loss=loss,
        crb_sigma_quant=predict_sigma(f_quant, theta, N),
        crb_sigma_ideal=predict_sigma(f_ideal, theta, N),
        n_windows=N,
    )


def outcome_probabilities(sigma_y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """All 2^M sign patterns of a small window and their probabilities.

    Supported for M in {2, 3, 4}; uses the bivariate closed form, the
    trivariate closed form and the quadrivariate orthant kernel.
    """
    M = sigma_y.shape[0]
    if M not in (2, 3, 4):
        raise ValidationError("exact enumeration supports M = 2, 3 or 4 only", M=M)
    patterns = np.array(list(itertools.product((1, -1), repeat=M)), dtype=float)
    probs = np.empty(patterns.shape[0])
    for n, s in enumerate(patterns):
        C = sigma_y * np.outer(s, s)
        if M == 2:
            probs[n] = 0.25 + np.arcsin(C[0, 1]) / (2.0 * np.pi)
        elif M == 3:
            probs[n] = orthant3(C[0, 1], C[0, 2], C[1, 2])
        else:
            probs[n] = orthant4(CorrSubset.from_matrix(C))
    return patterns, probs


def fisher_exact(scn: Scenario, theta: ParamVector, step: float = 1e-6) -> np.ndarray:
    """Exact Fisher matrix of the binary likelihood for windows with M <= 4.

    Derivatives of the outcome probabilities are central differences with a
    relative step ``step`` in each source power.
    """
    if scn.M > 4:
        raise ValidationError("exact enumeration supports M <= 4 only", M=scn.M)
    _, probs = outcome_probabilities(build_sigma_y(scn, theta))
    grads = np.empty((scn.D, probs.size))
    for d in range(scn.D):
        h = step * theta.theta_src[d]
        up = list(theta.theta_src)
        down = list(theta.theta_src)
        up[d] += h
        down[d] -= h
        _, p_up = outcome_probabilities(build_sigma_y(scn, ParamVector(up, theta.theta_noise)))
        _, p_down = outcome_probabilities(build_sigma_y(scn, ParamVector(down, theta.theta_noise)))
        grads[d] = (p_up - p_down) / (2.0 * h)
    return _symmetric((grads / probs) @ grads.T)
