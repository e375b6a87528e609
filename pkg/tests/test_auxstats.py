"""
Tests for the reduced statistics and their moments.
"""
import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add src directory to Python path
src_dir = Path(__file__).parent.parent / "src"
sys.path.insert(0, str(src_dir))

from config import settings
from core.auxstats import (
    AuxMoments,
    PairIndex,
    all_quadruples,
    aux_moments,
    compute_fourth_moments,
    cov_stats,
    empirical_mean_stats,
    estimate_assembly_seconds,
    jac_mean_stats,
    mean_stats,
    reduce_stats,
    sign_correlation,
)
from core.errors import FactorizationError, QuadratureError, ValidationError
from core.model import Scenario, ParamVector
from core.moment_cache import MomentCache
from core.simkit import hard_limit, sample_windows

NARROW = Scenario((0.25, 0.75), (1 / 64, 1 / 64), 64)


@pytest.fixture
def cache(tmp_path):
    return MomentCache(max_entries=4, cache_dir=tmp_path)


def test_pair_index_order():
    pairs = PairIndex(4)
    assert [pairs.pair(p) for p in range(pairs.size)] == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    for p in range(pairs.size):
        assert pairs.position(*pairs.pair(p)) == p
    assert pairs.position(3, 1) == pairs.position(1, 3)
    with pytest.raises(ValidationError):
        pairs.position(2, 2)


def test_reduce_stats_examples():
    assert np.array_equal(reduce_stats(np.ones(4, dtype=int)), np.ones(6))
    assert reduce_stats(np.array([1, -1, 1])).tolist() == [-1, 1, -1]
    z = np.array([1, -1, -1, 1, 1])
    assert np.array_equal(reduce_stats(z), reduce_stats(-z))
    with pytest.raises(ValidationError):
        reduce_stats(np.array([1, 0, -1]))


def test_empirical_mean_matches_per_window_mean():
    rng = np.random.default_rng(0)
    Z = np.where(rng.random((500, 7)) < 0.4, -1, 1).astype(np.int8)
    direct = np.mean([reduce_stats(z) for z in Z], axis=0)
    assert np.allclose(empirical_mean_stats(Z), direct, rtol=0, atol=1e-15)


def test_mean_stats_noise_only_and_arcsine():
    assert np.allclose(mean_stats(NARROW.with_window(6), ParamVector((1e-15, 1e-15))), 0.0, atol=1e-14)
    sigma = np.array([[1.0, 0.5], [0.5, 1.0]])
    assert sign_correlation(sigma)[0, 1] == pytest.approx(1.0 / 3.0, abs=1e-15)


def test_mean_stats_bounded_and_jac_finite():
    theta = ParamVector.from_db((-15.0, 0.0))
    mu = mean_stats(NARROW, theta)
    assert mu.shape == (2016,)
    assert np.all(np.abs(mu) < 1.0)
    jac = jac_mean_stats(NARROW, theta)
    assert jac.shape == (2016, 2)
    assert np.all(np.isfinite(jac))


def test_jac_matches_finite_differences():
    rng = np.random.default_rng(21)
    for M in (8, 16):
        for _ in range(10):
            D = int(rng.integers(1, 4))
            scn = Scenario(tuple(rng.uniform(0, 1, D)), tuple(rng.uniform(0.02, 0.9, D)), M)
            theta = ParamVector.from_db(tuple(rng.uniform(-12.0, 8.0, D)))
            jac = jac_mean_stats(scn, theta)
            for d in range(D):
                h = 1e-6 * theta.theta_src[d]
                up, down = list(theta.theta_src), list(theta.theta_src)
                up[d] += h
                down[d] -= h
                numeric = (mean_stats(scn, ParamVector(up)) - mean_stats(scn, ParamVector(down))) / (2 * h)
                assert np.abs(numeric - jac[:, d]).max() <= 1e-5 * np.abs(jac[:, d]).max()


def test_jac_vanishes_for_white_source():
    """A full-band source is indistinguishable from noise after normalization."""
    scn = Scenario((0.3,), (1.0,), 6)
    assert np.allclose(jac_mean_stats(scn, ParamVector((2.0,))), 0.0, atol=1e-15)


def test_all_quadruples_count():
    quads = all_quadruples(7)
    assert quads.shape == (35, 4)
    assert np.all(np.diff(quads, axis=1) > 0)
    assert all_quadruples(3).shape == (0, 4)


def test_cov_noise_only_is_identity(cache):
    cov = cov_stats(NARROW.with_window(5), ParamVector((1e-15, 1e-15)), cache=cache)
    assert np.allclose(cov, np.eye(10), atol=1e-8)


def test_cov_structure(cache):
    scn = NARROW.with_window(6)
    theta = ParamVector.from_db((-3.0, 6.0))
    aux = aux_moments(scn, theta, cache=cache)
    assert np.array_equal(aux.cov, aux.cov.T)
    assert np.allclose(np.diag(aux.cov), 1.0 - aux.mu ** 2, atol=1e-9)
    assert np.linalg.eigvalsh(aux.cov).min() >= -1e-8
    x = aux.solve(aux.jac)
    assert np.allclose(aux.cov @ x, aux.jac, atol=1e-9)


def test_statistics_covariance_ridge_retry():
    theta = ParamVector((1.0,))
    singular = AuxMoments(mu=np.zeros(2), jac=np.ones((2, 1)), cov=np.array([[1.0, 1.0], [1.0, 1.0]]), theta=theta)
    x = singular.solve(np.array([1.0, 1.0]))
    assert np.all(np.isfinite(x))

    broken = AuxMoments(mu=np.zeros(2), jac=np.ones((2, 1)), cov=-np.eye(2), theta=theta)
    with pytest.raises(FactorizationError):
        broken.whitened_jac()


def test_fourth_moment_evaluation_count(cache):
    scn = NARROW.with_window(9)
    theta = ParamVector.from_db((0.0, 3.0))
    table = compute_fourth_moments(scn, theta)
    assert table.n_evaluations == math.comb(9, 4)
    assert table.moments.shape == (126,)


def test_moment_table_reused_across_calls(cache):
    scn = NARROW.with_window(7)
    theta = ParamVector.from_db((-6.0, 0.0))
    first = cov_stats(scn, theta, cache=cache)
    assert cache.stats()["misses"] == 1
    second = cov_stats(scn, theta, cache=cache)
    assert cache.stats()["hits"] == 1
    assert np.array_equal(first, second)


def test_threads_do_not_change_table(cache, monkeypatch):
    monkeypatch.setattr(settings, "orthant_batch_size", 16)
    scn = NARROW.with_window(8)
    theta = ParamVector.from_db((-3.0, 3.0))
    serial = compute_fourth_moments(scn, theta, threads=1)
    parallel = compute_fourth_moments(scn, theta, threads=4)
    assert np.array_equal(serial.moments, parallel.moments)


def test_source_relabeling_equivariance(cache):
    scn = Scenario((0.2, 0.6), (0.1, 0.3), 6)
    swapped = Scenario((0.6, 0.2), (0.3, 0.1), 6)
    a = aux_moments(scn, ParamVector((0.5, 2.0)), cache=cache)
    b = aux_moments(swapped, ParamVector((2.0, 0.5)), cache=cache)
    assert np.allclose(a.mu, b.mu, atol=1e-14)
    assert np.allclose(a.jac, b.jac[:, ::-1], atol=1e-14)
    assert np.allclose(a.cov, b.cov, atol=1e-9)


def test_aux_moments_requires_unit_noise(cache):
    with pytest.raises(ValidationError):
        aux_moments(NARROW.with_window(4), ParamVector((1.0, 1.0), 2.0), cache=cache)


def test_quadrature_failure_names_indices(cache, monkeypatch):
    monkeypatch.setattr(settings, "quad_max_evals", 21)
    monkeypatch.setattr(settings, "quad_abs_tol", 0.0)
    scn = NARROW.with_window(5)
    with pytest.raises(QuadratureError) as exc:
        compute_fourth_moments(scn, ParamVector.from_db((3.0, 6.0)))
    assert exc.value.indices is not None
    assert len(exc.value.indices) == 4


def test_assembly_estimate_scales_with_quadruples():
    small = estimate_assembly_seconds(NARROW.with_window(16), threads=1)
    large = estimate_assembly_seconds(NARROW, threads=1)
    assert large / small == pytest.approx(635376 / 1820)
    assert estimate_assembly_seconds(NARROW, threads=8) == pytest.approx(large / 8)


def test_moments_match_simulation(cache):
    """Mean and covariance agree with simulated hard-limited windows within 5 standard errors."""
    scn = NARROW.with_window(6)
    theta = ParamVector.from_db((-3.0, 6.0))
    aux = aux_moments(scn, theta, cache=cache)

    N = 200_000
    Z = hard_limit(sample_windows(scn, theta, N, seed=7))
    pairs = PairIndex(6)
    phi = (Z[:, pairs.rows].astype(np.int8) * Z[:, pairs.cols]).astype(float)
    mean = phi.mean(axis=0)
    mean_se = phi.std(axis=0) / np.sqrt(N)
    assert np.all(np.abs(mean - aux.mu) <= 5 * mean_se)

    centered = phi - mean
    for a in range(pairs.size):
        prod = centered[:, a:a + 1] * centered
        se = prod.std(axis=0) / np.sqrt(N) + 1e-12
        assert np.all(np.abs(prod.mean(axis=0) - aux.cov[a]) <= 5 * se)


@pytest.mark.slow
def test_cov_matches_simulation_full_scale(cache):
    scn = NARROW.with_window(6)
    theta = ParamVector.from_db((-15.0, 12.0))
    aux = aux_moments(scn, theta, cache=cache)
    N = 1_000_000
    Z = hard_limit(sample_windows(scn, theta, N, seed=8))
    pairs = PairIndex(6)
    phi = (Z[:, pairs.rows] * Z[:, pairs.cols]).astype(float)
    centered = phi - phi.mean(axis=0)
    for a in range(pairs.size):
        prod = centered[:, a:a + 1] * centered
        se = prod.std(axis=0) / np.sqrt(N) + 1e-12
        assert np.all(np.abs(prod.mean(axis=0) - aux.cov[a]) <= 4 * se)
