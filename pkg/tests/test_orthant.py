"""
Tests for the orthant probabilities and sign moments.
"""
import itertools
import sys
from pathlib import Path

import numpy as np
import pytest

# Add src directory to Python path
src_dir = Path(__file__).parent.parent / "src"
sys.path.insert(0, str(src_dir))

from core.errors import ValidationError, QuadratureError
from core.orthant import (
    CorrSubset,
    arcsine_pair,
    mc_sign_moment_oracle,
    orthant3,
    orthant4,
    orthant4_batch,
    sign_moment4,
    sign_moment4_batch,
)

EQUI_HALF = CorrSubset((0.5,) * 6)


def _random_subset(rng) -> CorrSubset:
    A = rng.standard_normal((4, 6))
    C = A @ A.T
    d = np.sqrt(np.diag(C))
    return CorrSubset.from_matrix(C / np.outer(d, d))


def test_arcsine_pair_examples():
    assert arcsine_pair(0.0) == 0.0
    assert arcsine_pair(1.0) == pytest.approx(1.0)
    assert arcsine_pair(0.5) == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert np.allclose(arcsine_pair(np.array([-0.5, 0.5])), [-1.0 / 3.0, 1.0 / 3.0])
    with pytest.raises(ValidationError):
        arcsine_pair(1.5)


def test_orthant3_examples():
    assert orthant3(0.0, 0.0, 0.0) == pytest.approx(0.125, abs=1e-15)
    assert orthant3(0.5, 0.5, 0.5) == pytest.approx(0.25, abs=1e-15)
    assert orthant3(1.0 - 1e-12, 1.0 - 1e-12, 1.0 - 1e-12) == pytest.approx(0.5, abs=1e-5)


def test_corr_subset_validation():
    with pytest.raises(ValidationError):
        CorrSubset((0.1,) * 5)
    with pytest.raises(ValidationError):
        CorrSubset((1.0, 0.0, 0.0, 0.0, 0.0, 0.0))
    # Pairwise valid but jointly not positive semidefinite.
    with pytest.raises(ValidationError):
        CorrSubset((0.9, 0.9, 0.9, -0.9, -0.9, -0.9))


def test_orthant4_independence_and_equicorrelation():
    assert orthant4(CorrSubset((0.0,) * 6)) == pytest.approx(1.0 / 16.0, abs=1e-10)
    assert orthant4(EQUI_HALF) == pytest.approx(0.2, abs=1e-8)


def test_orthant4_block_factorization():
    for r in (-0.7, 0.3, 0.9):
        value = orthant4(CorrSubset((r, 0.0, 0.0, 0.0, 0.0, 0.0)))
        assert value == pytest.approx((0.25 + np.arcsin(r) / (2 * np.pi)) * 0.25, abs=1e-9)


def test_orthant4_independent_fourth_coordinate():
    rng = np.random.default_rng(5)
    for _ in range(5):
        c3 = _random_subset(rng)
        r12, r13, _, r23, _, _ = c3.rho
        value = orthant4(CorrSubset((r12, r13, 0.0, r23, 0.0, 0.0)))
        assert value == pytest.approx(orthant3(r12, r13, r23) / 2.0, abs=1e-8)


def test_orthant4_permutation_invariance():
    rng = np.random.default_rng(7)
    c = _random_subset(rng)
    base = orthant4(c)
    for perm in itertools.permutations(range(4)):
        assert orthant4(c.permuted(perm)) == pytest.approx(base, abs=1e-9)


def test_orthant4_sign_patterns_sum_to_one():
    rng = np.random.default_rng(9)
    for _ in range(3):
        c = _random_subset(rng)
        total = sum(orthant4(c.flipped(s)) for s in itertools.product((1, -1), repeat=4))
        assert total == pytest.approx(1.0, abs=1e-7)


def test_orthant4_batch_matches_scalar_calls():
    rng = np.random.default_rng(13)
    subsets = [_random_subset(rng) for _ in range(6)]
    batch = orthant4_batch(np.array([c.rho for c in subsets]))
    assert np.allclose(batch, [orthant4(c) for c in subsets], atol=1e-10)
    assert orthant4_batch(np.zeros((0, 6))).shape == (0,)


def test_orthant4_reports_budget_exhaustion():
    with pytest.raises(QuadratureError) as exc:
        orthant4(CorrSubset((0.95, 0.3, 0.2, 0.3, 0.25, 0.1)), tol=0.0, max_evals=21)
    assert exc.value.rho is not None


def test_sign_moment4_properties():
    assert sign_moment4(CorrSubset((0.0,) * 6)) == pytest.approx(0.0, abs=1e-10)

    rng = np.random.default_rng(17)
    c = _random_subset(rng)
    base = sign_moment4(c)
    for perm in ((1, 0, 2, 3), (3, 2, 1, 0), (2, 3, 0, 1)):
        assert sign_moment4(c.permuted(perm)) == pytest.approx(base, abs=1e-8)
    assert sign_moment4(c.flipped((1, 1, -1, 1))) == pytest.approx(-base, abs=1e-8)
    assert sign_moment4(c.flipped((-1, -1, 1, 1))) == pytest.approx(base, abs=1e-8)


def test_sign_moment4_rejects_repeated_coordinates():
    with pytest.raises(ValidationError, match="distinct"):
        sign_moment4_batch(np.array([[1.0, 0.2, 0.2, 0.2, 0.2, 0.1]]))


def test_sign_moment4_equicorrelated_value():
    """The moment is the parity-weighted sum over all sixteen orthants."""
    value = sign_moment4(EQUI_HALF)
    probs = []
    for s in itertools.product((1, -1), repeat=4):
        probs.append(np.prod(s) * orthant4(EQUI_HALF.flipped(s)))
    assert value == pytest.approx(sum(probs), abs=1e-8)


def test_oracle_independent_case():
    estimate, se = mc_sign_moment_oracle(CorrSubset((0.0,) * 6), n_samples=200_000, seed=1)
    assert abs(estimate) <= 4 * se


def test_oracle_pair_reduction_case():
    near = 1.0 - 1e-12
    c = CorrSubset((0.3, 0.2, 0.2, 0.1, 0.1, near))
    estimate, se = mc_sign_moment_oracle(c, n_samples=200_000, seed=2)
    assert abs(estimate - arcsine_pair(0.3)) <= 4 * se


def test_oracle_is_deterministic():
    c = CorrSubset((0.2, 0.1, 0.0, 0.3, 0.1, 0.2))
    assert mc_sign_moment_oracle(c, 50_000, seed=3) == mc_sign_moment_oracle(c, 50_000, seed=3)
    with pytest.raises(ValidationError):
        mc_sign_moment_oracle(c, 100, seed=3)


def test_sign_moment4_near_duplicate_matches_reduction():
    """A nearly repeated coordinate reproduces the pair reduction z_j^2 = 1."""
    near = 1.0 - 1e-11
    # Coordinates 3 and 4 are (almost) the same variable.
    c = CorrSubset((0.4, 0.25, 0.25, 0.1, 0.1, near))
    value = sign_moment4(c, tol=1e-11, max_evals=200_000)
    assert value == pytest.approx(arcsine_pair(0.4), abs=1e-5)


def test_sign_moment4_near_duplicate_with_default_budget():
    rng = np.random.default_rng(99)
    near = 1.0 - 1e-9
    for _ in range(5):
        A = rng.standard_normal((3, 5))
        C = A @ A.T
        d = np.sqrt(np.diag(C))
        C = C / np.outer(d, d)
        # Coordinate 3 copies coordinate 2.
        c = CorrSubset((C[0, 1], C[0, 2], C[0, 2], C[1, 2], C[1, 2], near))
        assert sign_moment4(c) == pytest.approx(arcsine_pair(C[0, 1]), abs=1e-5)


@pytest.mark.slow
def test_sign_moment4_agrees_with_oracle():
    rng = np.random.default_rng(2024)
    for k in range(50):
        c = _random_subset(rng)
        estimate, se = mc_sign_moment_oracle(c, n_samples=10_000_000, seed=k)
        assert abs(sign_moment4(c) - estimate) <= 4 * se


@pytest.mark.slow
def test_sign_moment4_equicorrelated_against_oracle():
    estimate, se = mc_sign_moment_oracle(EQUI_HALF, n_samples=10_000_000, seed=99)
    assert abs(sign_moment4(EQUI_HALF) - estimate) <= 4 * se
