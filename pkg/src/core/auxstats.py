"""
Reduced sufficient statistics of hard-limited windows and their moments.

The statistics are the pairwise products z_i z_j over the strict upper
triangle of z z^T in row-major order. Their mean follows from the arcsine
law, the mean Jacobian from the derivative of Sigma_y, and their covariance
from second moments (arcsine law) and fourth sign moments (orthant kernel).
"""
import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Tuple

import numpy as np
import structlog
from scipy import linalg

from config import settings
from .errors import ValidationError, QuadratureError
from .model import Scenario, ParamVector, build_model, build_sigma_y, cholesky_with_ridge
from .moment_cache import FourthMomentTable, MomentCache, colex_rank, get_moment_cache
from .orthant import PAIRS, sign_moment4_batch

logger = structlog.get_logger(__name__)


@dataclass(frozen=True, eq=False)
class PairIndex:
    """Canonical order of the M(M-1)/2 index pairs (i, j), i < j."""

    M: int
    rows: np.ndarray = field(init=False, repr=False)
    cols: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.M < 2:
            raise ValidationError("pair index needs M >= 2", M=self.M)
        rows, cols = np.triu_indices(self.M, k=1)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)

    @property
    def size(self) -> int:
        return self.rows.size

    def position(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        if not (0 <= i < j < self.M):
            raise ValidationError("not a strict upper-triangle pair", i=i, j=j, M=self.M)
        return i * self.M - i * (i + 1) // 2 + (j - i - 1)

    def pair(self, position: int) -> Tuple[int, int]:
        if not (0 <= position < self.size):
            raise ValidationError("pair position out of range", position=position, size=self.size)
        return int(self.rows[position]), int(self.cols[position])

    def extract(self, matrix: np.ndarray) -> np.ndarray:
        """Upper-triangle entries of one matrix (or of a stack, last two axes)."""
        return matrix[..., self.rows, self.cols]


def _check_binary(z: np.ndarray) -> None:
    if not np.all((z == 1) | (z == -1)):
        raise ValidationError("hard-limited data must contain only -1 and +1")


def reduce_stats(z: np.ndarray) -> np.ndarray:
    """Pairwise products z_i z_j of one window in canonical pair order."""
    z = np.asarray(z)
    if z.ndim != 1:
        raise ValidationError("reduce_stats expects a single window", shape=z.shape)
    _check_binary(z)
    pairs = PairIndex(z.size)
    return (z[pairs.rows] * z[pairs.cols]).astype(np.int8)


def empirical_mean_stats(Z: np.ndarray) -> np.ndarray:
    """Mean of the reduced statistics over N windows (rows of Z).

    The sums are accumulated as exact integers through Z^T Z, so the result
    equals the mean of the per-window statistics up to the final division.
    """
    Z = np.asarray(Z)
    if Z.ndim != 2 or Z.shape[0] < 1:
        raise ValidationError("expected an N x M matrix with N >= 1", shape=Z.shape)
    _check_binary(Z)
    Zi = Z.astype(np.int64)
    gram = Zi.T @ Zi
    return PairIndex(Z.shape[1]).extract(gram) / Z.shape[0]


def _clamp_correlations(sigma_y: np.ndarray) -> Tuple[np.ndarray, int]:
    limit = 1.0 - settings.correlation_clamp
    off = ~np.eye(sigma_y.shape[0], dtype=bool)
    hits = int(np.count_nonzero(np.abs(sigma_y[off]) >= limit))
    if hits:
        logger.warning("correlation_clamp_active", count=hits,
                       max_abs=float(np.abs(sigma_y[off]).max()))
    clipped = np.clip(sigma_y, -limit, limit)
    np.fill_diagonal(clipped, 1.0)
    return clipped, hits


def sign_correlation(sigma_y: np.ndarray) -> np.ndarray:
    """R_z = (2/pi) arcsin(Sigma_y) with the clamp applied off the diagonal."""
    clipped, _ = _clamp_correlations(sigma_y)
    rz = (2.0 / np.pi) * np.arcsin(clipped)
    np.fill_diagonal(rz, 1.0)
    return rz


def mean_stats(scn: Scenario, theta: ParamVector) -> np.ndarray:
    """Mean of the reduced statistics, (2/pi) arcsin([Sigma_y]_ij)."""
    return PairIndex(scn.M).extract(sign_correlation(build_sigma_y(scn, theta)))


def _jacobian(pairs: PairIndex, sigma_y: np.ndarray, dsigma: np.ndarray) -> Tuple[np.ndarray, int]:
    clipped, hits = _clamp_correlations(sigma_y)
    s = pairs.extract(clipped)
    ds = pairs.extract(dsigma)                       # (D, C)
    return ((2.0 / np.pi) * ds / np.sqrt(1.0 - s * s)).T, hits


def jac_mean_stats(scn: Scenario, theta: ParamVector) -> np.ndarray:
    """C x D Jacobian of the mean statistics with respect to the source powers."""
    model = build_model(scn, theta)
    jac, _ = _jacobian(PairIndex(scn.M), model.sigma_y, model.dsigma_y)
    return jac


def all_quadruples(M: int) -> np.ndarray:
    """Every 4-index set a < b < c < d in lexicographic order, shape (Q, 4)."""
    count = 4 * (M * (M - 1) * (M - 2) * (M - 3) // 24)
    flat = np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(M), 4)),
                       dtype=np.int64, count=count)
    return flat.reshape(-1, 4)


def compute_fourth_moments(scn: Scenario, theta: ParamVector, sigma_y: Optional[np.ndarray] = None,
                           threads: Optional[int] = None) -> FourthMomentTable:
    """Evaluate the fourth sign moment of every 4-index set once."""
    if sigma_y is None:
        sigma_y = build_sigma_y(scn, theta)
    quads = all_quadruples(scn.M)
    moments = np.empty(quads.shape[0])
    if quads.shape[0]:
        rho = np.stack([sigma_y[quads[:, i], quads[:, j]] for i, j in PAIRS], axis=1)
        batch = max(1, settings.orthant_batch_size)
        spans = [(s, min(s + batch, quads.shape[0])) for s in range(0, quads.shape[0], batch)]

        def work(span: Tuple[int, int]) -> None:
            lo, hi = span
            try:
                moments[lo:hi] = sign_moment4_batch(rho[lo:hi])
            except QuadratureError as exc:
                offending = None
                if exc.rho is not None:
                    flipped = np.abs(np.asarray(exc.rho))
                    match = np.where(np.all(np.isclose(np.abs(rho[lo:hi]), flipped), axis=1))[0]
                    if match.size:
                        offending = quads[lo + match[0]]
                raise QuadratureError(exc.message, rho=exc.rho, indices=offending) from exc

        workers = max(1, threads or settings.default_threads)
        if workers == 1 or len(spans) == 1:
            for span in spans:
                work(span)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(work, spans))

    # Store by colex rank so lookups need no search.
    table_moments = np.empty_like(moments)
    table_moments[colex_rank(quads, scn.M)] = moments
    return FourthMomentTable(M=scn.M, scenario_fp=scn.fingerprint(), theta_fp=theta.fingerprint(),
                             moments=table_moments, n_evaluations=quads.shape[0])


def _load_stored_table(cache: MomentCache, scn: Scenario, theta: ParamVector) -> Optional[FourthMomentTable]:
    """Table file at the default path, if it belongs to (scn, theta)."""
    path = cache.default_path(scn.fingerprint(), theta.fingerprint())
    if not path.exists():
        return None
    try:
        table = cache.load(path, register=False)
    except ValidationError as exc:
        logger.warning("moment_table_skipped", path=str(path), reason=str(exc))
        return None
    expected = (scn.fingerprint(), theta.fingerprint())
    if table.key != expected or table.M != scn.M:
        logger.warning("moment_table_skipped", path=str(path), reason="fingerprint or M mismatch",
                       M=table.M, expected_M=scn.M)
        return None
    cache.put(table)
    return table


def fourth_moment_table(scn: Scenario, theta: ParamVector, sigma_y: Optional[np.ndarray] = None,
                        cache: Optional[MomentCache] = None, threads: Optional[int] = None) -> FourthMomentTable:
    """Fetch the table from the cache or compute and cache it."""
    cache = cache if cache is not None else get_moment_cache()
    table = cache.get(scn.fingerprint(), theta.fingerprint())
    if table is None:
        stored = _load_stored_table(cache, scn, theta)
        if stored is not None:
            return stored
        started = time.perf_counter()
        table = compute_fourth_moments(scn, theta, sigma_y=sigma_y, threads=threads)
        cache.put(table)
        logger.info("fourth_moments_computed", M=scn.M, quadruples=table.n_evaluations,
                    elapsed=round(time.perf_counter() - started, 3))
    return table


def _assemble_cov(pairs: PairIndex, rz: np.ndarray, mu: np.ndarray, table: FourthMomentTable) -> np.ndarray:
    C = pairs.size
    rows, cols = pairs.rows, pairs.cols
    cov = np.empty((C, C))
    for p in range(C):
        i, j = rows[p], cols[p]
        k, l = rows[p:], cols[p:]
        second = np.empty(C - p)
        same = (k == i) & (l == j)
        # One shared index: z_s^2 = 1 leaves the pair of the other two.
        u = np.select([k == i, k == j, l == i, l == j], [j, i, j, i], default=-1)
        v = np.select([k == i, k == j, l == i, l == j], [l, l, k, k], default=-1)
        shared = (u >= 0) & ~same
        distinct = (u < 0) & ~same
        second[same] = 1.0
        second[shared] = rz[u[shared], v[shared]]
        if np.any(distinct):
            quad = np.sort(np.stack([np.full(k.shape, i), np.full(k.shape, j), k, l], axis=1)[distinct], axis=1)
            second[distinct] = table.lookup(quad)
        block = second - mu[p] * mu[p:]
        cov[p, p:] = block
        cov[p:, p] = block
    return cov


def cov_stats(scn: Scenario, theta: ParamVector, cache: Optional[MomentCache] = None,
              threads: Optional[int] = None) -> np.ndarray:
    """C x C covariance of the reduced statistics."""
    sigma_y = build_sigma_y(scn, theta)
    pairs = PairIndex(scn.M)
    rz = sign_correlation(sigma_y)
    table = fourth_moment_table(scn, theta, sigma_y=sigma_y, cache=cache, threads=threads)
    return _assemble_cov(pairs, rz, pairs.extract(rz), table)


@dataclass(frozen=True, eq=False)
class AuxMoments:
    """Mean, Jacobian and covariance of the reduced statistics at one theta."""

    mu: np.ndarray
    jac: np.ndarray
    cov: np.ndarray
    theta: ParamVector
    n_clamped: int = 0

    @cached_property
    def cov_factor(self):
        """Cholesky factor of the covariance, with one ridge retry."""
        return cholesky_with_ridge(self.cov, settings.ridge_scale, what="statistics covariance"), True

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve cov @ x = rhs without forming the inverse."""
        return linalg.cho_solve(self.cov_factor, rhs)

    def whitened_jac(self) -> np.ndarray:
        return self.solve(self.jac)


def aux_moments(scn: Scenario, theta: ParamVector, cache: Optional[MomentCache] = None,
                threads: Optional[int] = None, cov: Optional[np.ndarray] = None) -> AuxMoments:
    """Assemble AuxMoments; pass ``cov`` to reuse a covariance from elsewhere."""
    if theta.theta_noise != 1.0:
        raise ValidationError("quantized-domain computations fix theta_0 = 1", theta_0=theta.theta_noise)
    model = build_model(scn, theta)
    pairs = PairIndex(scn.M)
    rz = sign_correlation(model.sigma_y)
    mu = pairs.extract(rz)
    jac, hits = _jacobian(pairs, model.sigma_y, model.dsigma_y)
    if cov is None:
        table = fourth_moment_table(scn, theta, sigma_y=model.sigma_y, cache=cache, threads=threads)
        cov = _assemble_cov(pairs, rz, mu, table)
    return AuxMoments(mu=mu, jac=jac, cov=cov, theta=theta, n_clamped=hits)


def estimate_assembly_seconds(scn: Scenario, threads: Optional[int] = None) -> float:
    """Rough wall time of one fourth-moment table: 8 orthant integrals per 4-index set."""
    workers = max(1, threads or settings.default_threads)
    return scn.n_quadruples * 8 * settings.orthant_seconds_per_eval / workers
