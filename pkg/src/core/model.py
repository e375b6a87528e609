"""
Scenario description and the deterministic covariance model of the sampled
analog signal: source/noise correlation matrices, mixing matrices, the
covariance R_y(theta), the correlation Sigma_y(theta) and its derivatives.

All frequencies are stored relative to the noise band Omega_0, and Omega_0 is
set to pi internally, so Omega_d / pi equals the relative bandwidth.
"""
import hashlib
import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
import structlog
from scipy import linalg

from .errors import ValidationError, FactorizationError

logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class Scenario:
    """Static description of sources, noise band, sampler rate and window."""

    omega: Tuple[float, ...]
    bandwidth: Tuple[float, ...]
    M: int
    sampler_ratio: float = 1.0
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(float(w) for w in self.omega))
        object.__setattr__(self, "bandwidth", tuple(float(b) for b in self.bandwidth))
        if len(self.omega) == 0:
            raise ValidationError("scenario needs at least one source", field="omega_bar")
        if len(self.omega) != len(self.bandwidth):
            raise ValidationError(
                "omega_bar and bandwidth_bar must list the same number of sources",
                omega_bar=len(self.omega), bandwidth_bar=len(self.bandwidth),
            )
        if int(self.M) != self.M or self.M < 2:
            raise ValidationError("window length M must be an integer >= 2", field="M", M=self.M)
        object.__setattr__(self, "M", int(self.M))
        for d, b in enumerate(self.bandwidth):
            if not (0.0 < b <= 1.0):
                raise ValidationError("relative bandwidth must lie in (0, 1]", field="bandwidth_bar",
                                      source=d + 1, value=b)
        for d, w in enumerate(self.omega):
            if not (0.0 <= w <= 1.0):
                raise ValidationError("relative center frequency must lie in [0, 1]", field="omega_bar",
                                      source=d + 1, value=w)
        if self.sampler_ratio != 1.0:
            raise ValidationError(
                "sampler_ratio must be 1: oversampling (sampler rate above the noise band) is out of scope",
                field="sampler_ratio", value=self.sampler_ratio,
            )

    @property
    def D(self) -> int:
        return len(self.omega)

    @property
    def n_pairs(self) -> int:
        """Number of reduced statistics, M(M-1)/2."""
        return self.M * (self.M - 1) // 2

    @property
    def n_quadruples(self) -> int:
        """Number of distinct 4-index sets, binomial(M, 4)."""
        return math.comb(self.M, 4)

    def with_window(self, M: int) -> "Scenario":
        return Scenario(self.omega, self.bandwidth, M, self.sampler_ratio, self.name)

    def fingerprint(self) -> str:
        """Stable hash of every field that affects the model matrices."""
        payload = repr((self.omega, self.bandwidth, self.M, self.sampler_ratio)).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


@dataclass(frozen=True)
class ParamVector:
    """Spectral power levels [theta_1 ... theta_D, theta_0] in linear units."""

    theta_src: Tuple[float, ...]
    theta_noise: float = 1.0

    def __post_init__(self):
        src = tuple(float(t) for t in np.atleast_1d(self.theta_src))
        object.__setattr__(self, "theta_src", src)
        object.__setattr__(self, "theta_noise", float(self.theta_noise))
        if any(not np.isfinite(t) or t <= 0.0 for t in src + (self.theta_noise,)):
            raise ValidationError("all power levels must be finite and strictly positive",
                                  theta_src=src, theta_noise=self.theta_noise)

    @classmethod
    def from_db(cls, src_db: Sequence[float], noise_db: float = 0.0) -> "ParamVector":
        return cls(tuple(db_to_linear(v) for v in src_db), db_to_linear(noise_db))

    @property
    def D(self) -> int:
        return len(self.theta_src)

    @property
    def src(self) -> np.ndarray:
        return np.asarray(self.theta_src, dtype=float)

    def to_db(self) -> Tuple[float, ...]:
        return tuple(linear_to_db(t) for t in self.theta_src)

    def scaled(self, c: float) -> "ParamVector":
        return ParamVector(tuple(c * t for t in self.theta_src), c * self.theta_noise)

    def fingerprint(self) -> str:
        payload = np.asarray(self.theta_src + (self.theta_noise,), dtype=float).tobytes()
        return hashlib.sha256(payload).hexdigest()[:16]


def db_to_linear(value_db: float) -> float:
    """Power-style conversion 10^(dB/10)."""
    return float(10.0 ** (value_db / 10.0))


def linear_to_db(value: float) -> float:
    return float(10.0 * np.log10(value))


@dataclass(frozen=True, eq=False)
class ModelMatrices:
    """All model matrices of one scenario evaluated at one parameter vector."""

    sigma_src: np.ndarray
    mixing: np.ndarray
    sigma_noise: np.ndarray
    ry: np.ndarray
    sigma_y: np.ndarray
    dsigma_y: np.ndarray
    weighted: np.ndarray = field(repr=False)
    normalizer: float = 1.0

    def dry(self, d: int, scn: Scenario) -> np.ndarray:
        """Derivative of R_y with respect to theta_d."""
        return scn.bandwidth[d] * self.weighted[d]


def _check_source(scn: Scenario, d: int) -> None:
    if not (0 <= d < scn.D):
        raise ValidationError("source index out of range", index=d, D=scn.D)


def _lags(M: int) -> np.ndarray:
    idx = np.arange(M)
    return np.subtract.outer(idx, idx)


def _check_theta(scn: Scenario, theta: ParamVector) -> None:
    if theta.D != scn.D:
        raise ValidationError("parameter vector does not match the source count", D=scn.D, got=theta.D)


def build_source_corr(scn: Scenario, d: int) -> np.ndarray:
    """Sinc correlation matrix of source d, [Sigma_d]_ij = sinc(bw_d |i-j|)."""
    _check_source(scn, d)
    ratio = scn.bandwidth[d] / scn.sampler_ratio
    # np.sinc is the normalized sinc with sinc(0) = 1
    return np.sinc(ratio * np.abs(_lags(scn.M)))


def build_mixing(scn: Scenario, d: int) -> np.ndarray:
    """Mixing matrix of source d, [W_d]_ij = cos(w_d pi (i-j))."""
    _check_source(scn, d)
    return np.cos((scn.omega[d] / scn.sampler_ratio) * np.pi * _lags(scn.M))


def build_noise_corr(scn: Scenario) -> np.ndarray:
    """Noise correlation Sigma_0; the identity when sampling at the noise band."""
    return np.sinc(np.abs(_lags(scn.M)) / scn.sampler_ratio)


def _weighted_sources(scn: Scenario) -> np.ndarray:
    return np.stack([build_source_corr(scn, d) * build_mixing(scn, d) for d in range(scn.D)])


def build_ry(scn: Scenario, theta: ParamVector) -> np.ndarray:
    """Covariance R_y = sum_d theta_d bw_d Sigma_d o W_d + theta_0 Sigma_0."""
    _check_theta(scn, theta)
    weights = theta.src * np.asarray(scn.bandwidth)
    ry = np.tensordot(weights, _weighted_sources(scn), axes=1) + theta.theta_noise * build_noise_corr(scn)
    return 0.5 * (ry + ry.T)


def _normalizer(scn: Scenario, theta: ParamVector) -> float:
    return float(np.dot(theta.src, scn.bandwidth) + theta.theta_noise)


def build_sigma_y(scn: Scenario, theta: ParamVector) -> np.ndarray:
    """Unit-diagonal correlation matrix Sigma_y(theta)."""
    sigma_y = build_ry(scn, theta) / _normalizer(scn, theta)
    np.fill_diagonal(sigma_y, 1.0)
    return sigma_y


def dsigma_y_dtheta(scn: Scenario, theta: ParamVector, d: int) -> np.ndarray:
    """Derivative of Sigma_y with respect to theta_d (theta_0 held fixed)."""
    _check_source(scn, d)
    _check_theta(scn, theta)
    sigma_y = build_sigma_y(scn, theta)
    weighted = build_source_corr(scn, d) * build_mixing(scn, d)
    return scn.bandwidth[d] * (weighted - sigma_y) / _normalizer(scn, theta)


def build_model(scn: Scenario, theta: ParamVector) -> ModelMatrices:
    """Evaluate every model matrix at once, sharing the intermediate products."""
    _check_theta(scn, theta)
    sigma_src = np.stack([build_source_corr(scn, d) for d in range(scn.D)])
    mixing = np.stack([build_mixing(scn, d) for d in range(scn.D)])
    weighted = sigma_src * mixing
    sigma_noise = build_noise_corr(scn)
    bw = np.asarray(scn.bandwidth)
    ry = np.tensordot(theta.src * bw, weighted, axes=1) + theta.theta_noise * sigma_noise
    ry = 0.5 * (ry + ry.T)
    norm = _normalizer(scn, theta)
    sigma_y = ry / norm
    np.fill_diagonal(sigma_y, 1.0)
    dsigma = bw[:, None, None] * (weighted - sigma_y[None, :, :]) / norm
    return ModelMatrices(
        sigma_src=sigma_src, mixing=mixing, sigma_noise=sigma_noise, ry=ry,
        sigma_y=sigma_y, dsigma_y=dsigma, weighted=weighted, normalizer=norm,
    )


def cholesky_with_ridge(matrix: np.ndarray, ridge_scale: float, what: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor, retrying once with a relative ridge."""
    try:
        return linalg.cholesky(matrix, lower=True)
    except linalg.LinAlgError:
        n = matrix.shape[0]
        ridge = ridge_scale * np.trace(matrix) / n
        logger.warning("ridge_retry", what=what, ridge=ridge, size=n)
        try:
            return linalg.cholesky(matrix + ridge * np.eye(n), lower=True)
        except linalg.LinAlgError as exc:
            raise FactorizationError(f"{what} is not positive definite", size=n, ridge=ridge) from exc
