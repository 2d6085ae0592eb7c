import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import e, eig_oracle, random_unit, slogdet_oracle
from rubriclearn.coding_rate import (
    CodingRateParams,
    candidate_gains,
    check_unit_columns,
    coding_rate,
    coding_rate_dual,
    marginal_gain,
    normalize_columns,
)
from rubriclearn.errors import InputError, NumericalError

EPS1 = CodingRateParams(epsilon=1.0)


@pytest.mark.parametrize("eps", [0.1, 0.5, 1.0, 4.0])
def test_empty_matrix_is_zero(eps):
    assert coding_rate(np.zeros((3, 0)), CodingRateParams(eps)) == 0.0


def test_singleton_matches_closed_form():
    for eps in (0.25, 0.5, 1.0, 2.0):
        expected = 0.5 * math.log(1 + 1 / eps ** 2)
        assert coding_rate(e(0, 3)[:, None], CodingRateParams(eps)) == pytest.approx(expected, abs=1e-12)


def test_orthogonal_and_duplicate_pairs():
    assert coding_rate(np.eye(2), EPS1) == pytest.approx(math.log(1.5), abs=1e-12)
    dup = np.column_stack([e(0, 2), e(0, 2)])
    assert coding_rate(dup, EPS1) == pytest.approx(0.5 * math.log(2), abs=1e-12)


def test_marginal_gain_examples():
    base = e(0, 2)[:, None]
    assert marginal_gain(base, e(0, 2), EPS1) == pytest.approx(0.0, abs=1e-12)
    assert marginal_gain(base, e(1, 2), EPS1) == pytest.approx(math.log(1.5) - 0.5 * math.log(2), abs=1e-12)
    assert marginal_gain(np.zeros((2, 0)), e(1, 2), EPS1) == pytest.approx(0.5 * math.log(2), abs=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_matches_eigenvalue_oracle(seed):
    rng = np.random.default_rng(seed)
    d, n = int(rng.integers(1, 65)), int(rng.integers(1, 33))
    E = random_unit(rng, d, n)
    eps = float(rng.uniform(0.1, 2.0))
    p = CodingRateParams(eps)
    assert coding_rate(E, p) == pytest.approx(eig_oracle(E, eps), abs=1e-9)
    assert coding_rate(E, p) == pytest.approx(slogdet_oracle(E, eps), abs=1e-9)
    small, large = coding_rate_dual(E, p)
    assert small == pytest.approx(large, abs=1e-9)


def test_result_is_finite_and_nonnegative():
    rng = np.random.default_rng(1)
    for _ in range(30):
        E = random_unit(rng, int(rng.integers(1, 10)), int(rng.integers(1, 10)))
        c = coding_rate(E)
        assert np.isfinite(c) and c >= 0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 16), n=st.integers(1, 16))
def test_column_permutation_invariance(seed, d, n):
    rng = np.random.default_rng(seed)
    E = random_unit(rng, d, n)
    perm = rng.permutation(n)
    assert coding_rate(E[:, perm]) == pytest.approx(coding_rate(E), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(1, 16), n=st.integers(1, 16))
def test_rotation_invariance(seed, d, n):
    rng = np.random.default_rng(seed)
    E = random_unit(rng, d, n)
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    assert coding_rate(Q @ E) == pytest.approx(coding_rate(E), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), d=st.integers(2, 12), eps=st.floats(0.1, 3.0))
def test_orthogonal_pair_dominates_correlated_pairs(seed, d, eps):
    rng = np.random.default_rng(seed)
    u = random_unit(rng, d, 1)[:, 0]
    w = rng.standard_normal(d)
    w -= (w @ u) * u
    w /= np.linalg.norm(w)
    theta = rng.uniform(0.01, math.pi / 2 - 0.01)
    v = math.cos(theta) * u + math.sin(theta) * w
    p = CodingRateParams(eps)
    orth = coding_rate(np.column_stack([u, w]), p)
    corr = coding_rate(np.column_stack([u, v]), p)
    assert orth > corr
    assert orth == pytest.approx(eig_oracle(np.column_stack([u, w]), eps), abs=1e-12)
    assert corr == pytest.approx(eig_oracle(np.column_stack([u, v]), eps), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(d=st.integers(1, 10), data=st.data(), eps=st.sampled_from([0.1, 0.5, 1.0, 3.0]))
def test_duplicate_of_orthonormal_column_never_increases_rate(d, data, eps):
    n = data.draw(st.integers(1, d))
    j = data.draw(st.integers(0, n - 1))
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    E = Q[:, :n]
    assert marginal_gain(E, E[:, j], CodingRateParams(eps)) <= 1e-12


def test_duplicate_can_increase_rate_for_non_orthonormal_base():
    # {e1, e2, e2}: adding another e1 balances the spectrum and raises C.
    E = np.column_stack([e(0, 2), e(1, 2), e(1, 2)])
    gain = marginal_gain(E, e(0, 2), EPS1)
    oracle = eig_oracle(np.column_stack([E, e(0, 2)]), 1.0) - eig_oracle(E, 1.0)
    assert gain == pytest.approx(oracle, abs=1e-12)
    assert gain > 1e-3


@pytest.mark.parametrize("seed", range(25))
def test_incremental_gains_match_naive(seed):
    rng = np.random.default_rng(100 + seed)
    d, n, m = int(rng.integers(1, 65)), int(rng.integers(0, 33)), int(rng.integers(1, 8))
    eps = float(rng.choice([0.25, 0.5, 1.0, 2.0]))
    p = CodingRateParams(eps)
    E = random_unit(rng, d, n)
    V = random_unit(rng, d, m)
    V[:, 0] = E[:, 0] if n else V[:, 0]  # include an exact duplicate
    fast = candidate_gains(E, V, p)
    base = eig_oracle(E, eps)
    naive = [eig_oracle(np.column_stack([E, V[:, j]]), eps) - base for j in range(m)]
    np.testing.assert_allclose(fast, naive, atol=1e-9, rtol=0)


def test_both_gram_branches_are_exercised():
    rng = np.random.default_rng(3)
    p = CodingRateParams(0.5)
    for d, n in ((40, 5), (4, 30)):
        E = random_unit(rng, d, n)
        V = random_unit(rng, d, 6)
        naive = [coding_rate(np.column_stack([E, V[:, j]]), p) - coding_rate(E, p) for j in range(6)]
        np.testing.assert_allclose(candidate_gains(E, V, p), naive, atol=1e-9, rtol=0)


def test_gain_can_be_negative():
    # 1/|R| normalisation: adding a third copy of a direction lowers C.
    E = np.column_stack([e(0, 2), e(1, 2)])
    assert marginal_gain(E, e(0, 2), EPS1) < 0


def test_input_errors():
    with pytest.raises(InputError):
        coding_rate(np.array([[np.nan]]))
    with pytest.raises(InputError):
        coding_rate(np.ones(3))
    with pytest.raises(InputError):
        marginal_gain(np.eye(3), np.ones(2) / math.sqrt(2))
    with pytest.raises(InputError):
        marginal_gain(np.eye(2), np.array([np.inf, 0.0]))
    with pytest.raises(InputError):
        CodingRateParams(epsilon=0)
    with pytest.raises(InputError):
        CodingRateParams(jitter=1e-3)


def test_factorization_failure_after_jitter(monkeypatch):
    def fail(M):
        raise np.linalg.LinAlgError("not positive definite")

    monkeypatch.setattr(np.linalg, "cholesky", fail)
    with pytest.raises(NumericalError):
        coding_rate(np.eye(2))


def test_normalization_helpers():
    E = normalize_columns(np.array([[3.0, 0.0], [4.0, 2.0]]))
    check_unit_columns(E)
    np.testing.assert_allclose(E[:, 0], [0.6, 0.8])
    with pytest.raises(InputError):
        check_unit_columns(np.array([[2.0], [0.0]]))
    with pytest.raises(InputError):
        normalize_columns(np.zeros((2, 1)))
