import math

import numpy as np
import pytest

from birs.dcf import (
    CenteredPair,
    bootstrap_critical_value,
    bootstrap_replicate,
    bootstrap_replicates,
    center_columns,
    column_statistics,
    column_sums,
    critical_value_from_replicates,
    dcf_statistic,
    dcf_test,
    normalized_sum,
    quantile_rank,
    tiled_maxabs_product,
)
from birs.rng import make_rng


def test_normalized_sum_examples():
    assert np.array_equal(normalized_sum(np.zeros((4, 3))), np.zeros(3))
    assert np.allclose(normalized_sum([[1, 0], [1, 0]]), [math.sqrt(2), 0.0], rtol=0, atol=1e-15)
    assert np.array_equal(normalized_sum([[5.0]]), [5.0])


def test_column_sums_is_column_local():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(37, 20))
    full = column_sums(M)
    for j in range(20):
        assert column_sums(M[:, [j]])[0] == full[j]


def test_statistic_examples():
    X = np.random.default_rng(1).normal(size=(6, 4))
    assert dcf_statistic(X, X.copy()) == 0.0
    assert dcf_statistic([[1, 0], [1, 0]], np.zeros((2, 2))) == pytest.approx(math.sqrt(2), abs=1e-15)
    assert dcf_statistic(np.zeros((4, 1)), [[1.0]]) == 2.0


def test_statistic_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension"):
        dcf_statistic(np.zeros((3, 2)), np.zeros((3, 3)))


def test_column_statistics_max_is_statistic():
    rng = np.random.default_rng(2)
    X, Y = rng.normal(size=(10, 7)), rng.normal(size=(8, 7))
    assert column_statistics(X, Y).max() == dcf_statistic(X, Y)


def test_center_columns_examples():
    C = center_columns([[2.0, 1.0], [2.0, 3.0]])
    assert np.array_equal(C[:, 0], [0.0, 0.0])
    assert np.array_equal(C[:, 1], [-1.0, 1.0])
    M = np.random.default_rng(3).normal(size=(9, 5))
    once = center_columns(M)
    assert np.allclose(center_columns(once), once, rtol=0, atol=1e-12)
    with pytest.raises(ValueError):
        center_columns([[1.0, 2.0]])


def test_bootstrap_replicate_degenerate():
    rng = np.random.default_rng(4)
    cp = CenteredPair.from_samples(rng.normal(size=(3, 4)), rng.normal(size=(2, 4)))
    assert bootstrap_replicate(cp, np.zeros(5)) == 0.0
    const = CenteredPair.from_samples(np.full((3, 4), 2.5), np.full((2, 4), -1.0))
    assert bootstrap_replicate(const, rng.normal(size=5)) == 0.0
    with pytest.raises(ValueError):
        bootstrap_replicate(cp, np.zeros(4))


def test_bootstrap_replicate_hand_expansion():
    # X = (1, 3), Y = (0, 5): centered (-1, 1) and (-2.5, 2.5); n = m = 2
    # e = (1, -1 | 1, -1) gives |(-1 - 1)/sqrt2 - (-2.5 - 2.5)/sqrt2| = 3/sqrt2
    cp = CenteredPair.from_samples([[1.0], [3.0]], [[0.0], [5.0]])
    got = bootstrap_replicate(cp, [1, -1, 1, -1])
    assert got == pytest.approx(3 / math.sqrt(2), rel=1e-15)


def test_tiled_product_matches_plain_product():
    rng = np.random.default_rng(5)
    E, W = rng.normal(size=(7, 30)), rng.normal(size=(30, 300))
    assert np.allclose(tiled_maxabs_product(E, W), np.abs(E @ W).max(axis=1), rtol=1e-13)


def test_quantile_rank():
    assert quantile_rank(5, 0.05) == 5
    assert quantile_rank(5, 0.5) == 3
    assert quantile_rank(1000, 0.05) == 950
    assert quantile_rank(100, 0.1) == 90  # float 0.1 must not push the rank to 91
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            quantile_rank(10, bad)


def test_critical_value_from_injected_replicates():
    assert critical_value_from_replicates([5, 1, 4, 2, 3], 0.05) == 5
    assert critical_value_from_replicates([5, 1, 4, 2, 3], 0.5) == 3


def test_constant_equal_matrices():
    X = np.full((5, 3), 7.0)
    for alpha in (0.01, 0.05, 0.5):
        assert bootstrap_critical_value(X, X.copy(), alpha, 50, make_rng(1)) == 0.0
    out = dcf_test(X, X.copy(), n_boot=50, rng=1)
    assert out.statistic == 0.0 and out.critical == 0.0 and not out.reject


def test_large_shift_rejects():
    rng = np.random.default_rng(6)
    out = dcf_test(rng.normal(3, 1, size=(200, 1)), rng.normal(0, 1, size=(200, 1)), n_boot=500, rng=9)
    assert out.reject


def test_null_rejection_rate():
    rejections = 0
    for k in range(200):
        g = make_rng(100 + k)
        X = g.substream(0).standard_normal((100, 50))
        Y = g.substream(1).standard_normal((100, 50))
        rejections += dcf_test(X, Y, alpha=0.05, n_boot=500, rng=g.substream(2)).reject
    assert 0.02 <= rejections / 200 <= 0.09


def test_replicates_thread_invariant():
    rng = np.random.default_rng(7)
    cp = CenteredPair.from_samples(rng.normal(size=(20, 150)), rng.normal(size=(15, 150)))
    a = bootstrap_replicates(cp, 300, make_rng(3), threads=1)
    b = bootstrap_replicates(cp, 300, make_rng(3), threads=4)
    assert np.array_equal(a, b)
    # a prefix of replicates does not depend on how many are drawn
    assert np.array_equal(bootstrap_replicates(cp, 100, make_rng(3)), a[:100])
