"""
Sign moments of zero-mean Gaussian vectors.

Pairs use the arcsine law, triples the classical closed form, and four
coordinates a Plackett-style reduction: the orthant probability is integrated
along the path t * rho from the independence point (P = 1/16), where each
partial derivative with respect to rho_ij is the bivariate density at the
origin times the closed-form orthant probability of the remaining pair
conditioned on y_i = y_j = 0. The path integral is a single smooth 1-D
integral, evaluated with adaptive Gauss-Kronrod quadrature vectorized over a
batch of correlation sets.
"""
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
import structlog
from scipy import integrate

from config import settings
from .errors import ValidationError, QuadratureError

logger = structlog.get_logger(__name__)

ArrayLike = Union[float, np.ndarray]

# Order of the six pairwise correlations of a CorrSubset.
PAIRS: Tuple[Tuple[int, int], ...] = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
_COL = {pair: c for c, pair in enumerate(PAIRS)}
_COL.update({(j, i): c for (i, j), c in list(_COL.items())})

# Sign patterns with the first sign fixed to +1; P(s) = P(-s) covers the rest.
_HALF_PATTERNS = np.array([[1, a, b, c] for a in (1, -1) for b in (1, -1) for c in (1, -1)], dtype=float)
_HALF_PARITY = _HALF_PATTERNS.prod(axis=1)
_PAIR_I = np.array([i for i, _ in PAIRS])
_PAIR_J = np.array([j for _, j in PAIRS])

_GK21_NODES = 21


def _corr_matrix(rho: np.ndarray) -> np.ndarray:
    C = np.eye(4)
    for c, (i, j) in enumerate(PAIRS):
        C[i, j] = C[j, i] = rho[c]
    return C


@dataclass(frozen=True)
class CorrSubset:
    """Pairwise correlations (r12, r13, r14, r23, r24, r34) of four coordinates."""

    rho: Tuple[float, float, float, float, float, float]

    def __post_init__(self):
        rho = tuple(float(r) for r in self.rho)
        if len(rho) != 6:
            raise ValidationError("a correlation subset needs exactly 6 entries", got=len(rho))
        if any(not np.isfinite(r) or abs(r) >= 1.0 for r in rho):
            raise ValidationError("correlations must lie strictly inside (-1, 1)", rho=rho)
        object.__setattr__(self, "rho", rho)
        smallest = float(np.linalg.eigvalsh(_corr_matrix(np.asarray(rho))).min())
        if smallest < -settings.psd_tolerance:
            raise ValidationError("correlation matrix is not positive semidefinite",
                                  rho=rho, min_eigenvalue=smallest)

    @classmethod
    def from_matrix(cls, C: np.ndarray) -> "CorrSubset":
        return cls(tuple(C[i, j] for i, j in PAIRS))

    def matrix(self) -> np.ndarray:
        return _corr_matrix(np.asarray(self.rho))

    def permuted(self, perm: Tuple[int, int, int, int]) -> "CorrSubset":
        """Relabel coordinates so that new coordinate k is old coordinate perm[k]."""
        C = self.matrix()
        return CorrSubset.from_matrix(C[np.ix_(perm, perm)])

    def flipped(self, signs: Tuple[int, int, int, int]) -> "CorrSubset":
        """Correlations of (s_1 y_1, ..., s_4 y_4)."""
        s = np.asarray(signs, dtype=float)
        return CorrSubset(tuple(np.asarray(self.rho) * s[_PAIR_I] * s[_PAIR_J]))


def _check_unit(rho: np.ndarray, what: str) -> None:
    if np.any(~np.isfinite(rho)) or np.any(np.abs(rho) > 1.0):
        raise ValidationError(f"{what} must lie in [-1, 1]")


def arcsine_pair(rho: ArrayLike) -> ArrayLike:
    """E[sgn(a) sgn(b)] = (2/pi) arcsin(rho); accepts scalars or arrays."""
    arr = np.asarray(rho, dtype=float)
    _check_unit(arr, "correlation")
    out = (2.0 / np.pi) * np.arcsin(arr)
    return float(out) if out.ndim == 0 else out


def orthant3(rho12: float, rho13: float, rho23: float) -> float:
    """P(y1 > 0, y2 > 0, y3 > 0) for unit-variance zero-mean Gaussians."""
    rho = np.array([rho12, rho13, rho23], dtype=float)
    _check_unit(rho, "correlation")
    C = np.array([[1.0, rho12, rho13], [rho12, 1.0, rho23], [rho13, rho23, 1.0]])
    smallest = float(np.linalg.eigvalsh(C).min())
    if smallest < -settings.psd_tolerance:
        raise ValidationError("invalid 3x3 correlation matrix", rho=tuple(rho), min_eigenvalue=smallest)
    return float(0.125 + np.arcsin(rho).sum() / (4.0 * np.pi))


def _path_integrand(rho: np.ndarray, clamp: float):
    """d/dt of the orthant probability at correlations t * rho, for a batch."""
    limit = 1.0 - clamp

    def integrand(t: float) -> np.ndarray:
        r = t * rho
        total = np.zeros(rho.shape[0])
        for c, (i, j) in enumerate(PAIRS):
            k, l = (m for m in range(4) if m not in (i, j))
            rij = np.clip(r[:, c], -limit, limit)
            rki, rkj = r[:, _COL[(k, i)]], r[:, _COL[(k, j)]]
            rli, rlj = r[:, _COL[(l, i)]], r[:, _COL[(l, j)]]
            rkl = r[:, _COL[(k, l)]]
            den = 1.0 - rij * rij
            ckk = 1.0 - (rki * rki - 2.0 * rij * rki * rkj + rkj * rkj) / den
            cll = 1.0 - (rli * rli - 2.0 * rij * rli * rlj + rlj * rlj) / den
            ckl = rkl - (rki * rli - rij * (rki * rlj + rkj * rli) + rkj * rlj) / den
            scale = np.sqrt(np.maximum(ckk * cll, np.finfo(float).tiny))
            rc = np.clip(ckl / scale, -1.0, 1.0)
            cond = 0.25 + np.arcsin(rc) / (2.0 * np.pi)
            total += rho[:, c] * cond / (2.0 * np.pi * np.sqrt(den))
        return total

    return integrand


def _integrate_batch(rho: np.ndarray, tol: float, max_evals: int):
    path = _path_integrand(rho, settings.correlation_clamp)

    # t = 1 - u^2 flattens the inverse square-root growth near t = 1.
    def integrand(u: float) -> np.ndarray:
        return 2.0 * u * path(1.0 - u * u)

    limit = max(1, max_evals // _GK21_NODES)
    value, _err, info = integrate.quad_vec(
        integrand, 0.0, 1.0, epsabs=tol, epsrel=0.0, norm="max", limit=limit, full_output=True,
    )
    ok = bool(info.success) and info.neval <= max_evals
    return np.atleast_1d(value), ok, int(info.neval)


def orthant4_batch(rho: np.ndarray, tol: Optional[float] = None,
                   max_evals: Optional[int] = None) -> np.ndarray:
    """Quadrivariate orthant probabilities for a (B, 6) array of correlations.

    Raises:
        QuadratureError: if an integral does not converge within ``max_evals``
            integrand evaluations; the offending correlation set is attached.
    """
    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    if rho.shape[1] != 6:
        raise ValidationError("expected six correlations per row", shape=rho.shape)
    tol = settings.quad_abs_tol if tol is None else tol
    max_evals = settings.quad_max_evals if max_evals is None else max_evals
    if rho.shape[0] == 0:
        return np.zeros(0)

    value, ok, neval = _integrate_batch(rho, tol, max_evals)
    if ok:
        return 1.0 / 16.0 + value

    # Locate the offending set by integrating the rows one at a time.
    logger.debug("orthant_batch_retry", batch=rho.shape[0], neval=neval)
    out = np.empty(rho.shape[0])
    for b in range(rho.shape[0]):
        single, ok_single, neval_single = _integrate_batch(rho[b:b + 1], tol, max_evals)
        if not ok_single:
            raise QuadratureError("orthant quadrature did not converge", rho=rho[b],
                                  neval=neval_single, max_evals=max_evals)
        out[b] = 1.0 / 16.0 + single[0]
    return out


def orthant4(c: CorrSubset, tol: Optional[float] = None, max_evals: Optional[int] = None) -> float:
    """P(y1 > 0, ..., y4 > 0) for the Gaussian with correlations ``c``."""
    return float(orthant4_batch(np.asarray([c.rho]), tol=tol, max_evals=max_evals)[0])


def sign_moment4_batch(rho: np.ndarray, tol: Optional[float] = None,
                       max_evals: Optional[int] = None) -> np.ndarray:
    """E[sgn(y1) sgn(y2) sgn(y3) sgn(y4)] for a (B, 6) array of correlations."""
    rho = np.atleast_2d(np.asarray(rho, dtype=float))
    if np.any(np.abs(rho) >= 1.0 - settings.correlation_clamp):
        raise ValidationError("fourth sign moment needs four distinct coordinates; "
                              "reduce repeated coordinates with z^2 = 1")
    flips = _HALF_PATTERNS[:, _PAIR_I] * _HALF_PATTERNS[:, _PAIR_J]      # (8, 6)
    expanded = (rho[:, None, :] * flips[None, :, :]).reshape(-1, 6)
    probs = orthant4_batch(expanded, tol=tol, max_evals=max_evals).reshape(rho.shape[0], 8)
    return 2.0 * probs @ _HALF_PARITY


def sign_moment4(c: CorrSubset, tol: Optional[float] = None, max_evals: Optional[int] = None) -> float:
    return float(sign_moment4_batch(np.asarray([c.rho]), tol=tol, max_evals=max_evals)[0])


def mc_sign_moment_oracle(c: CorrSubset, n_samples: int, seed: int,
                          chunk: int = 1_000_000) -> Tuple[float, float]:
    """Plain Monte-Carlo estimate and standard error of the fourth sign moment."""
    if n_samples < 10_000:
        raise ValidationError("the oracle needs at least 1e4 samples", n_samples=n_samples)
    w, V = np.linalg.eigh(c.matrix())
    factor = V * np.sqrt(np.clip(w, 0.0, None))
    rng = np.random.default_rng(seed)
    total = 0.0
    remaining = n_samples
    while remaining > 0:
        m = min(chunk, remaining)
        y = rng.standard_normal((m, 4)) @ factor.T
        total += float(np.where(y >= 0.0, 1.0, -1.0).prod(axis=1).sum())
        remaining -= m
    estimate = total / n_samples
    # Products are +-1, so the sample variance follows from the mean.
    variance = max(1.0 - estimate * estimate, 0.0) * n_samples / (n_samples - 1)
    return estimate, float(np.sqrt(variance / n_samples))
