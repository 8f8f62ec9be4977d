import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from janossy_cert.multiset import (
    Multiset,
    canonicalize,
    domain_separation,
    matched_max_error,
    max_pairwise,
    min_separation,
    multisets_close,
    optimal_matching,
    wasserstein,
    wasserstein_bruteforce,
)

coords = st.floats(-10, 10, allow_nan=False, allow_subnormal=False)


def point_sets(n_max=6, d=2):
    return st.integers(1, n_max).flatmap(lambda n: arrays(float, (n, d), elements=coords))


def test_canonical_is_order_free():
    A = Multiset([[1.0, 2.0], [0.0, 5.0], [1.0, 1.0]])
    B = Multiset([[1.0, 1.0], [1.0, 2.0], [0.0, 5.0]])
    assert A == B and hash(A) == hash(B)
    np.testing.assert_array_equal(canonicalize(A).points, [[0, 5], [1, 1], [1, 2]])


def test_multiplicity_matters():
    assert Multiset([[1.0], [1.0], [2.0]]) != Multiset([[1.0], [2.0], [2.0]])


def test_points_read_only():
    A = Multiset([[0.0, 1.0]])
    with pytest.raises(ValueError):
        A.points[0, 0] = 3.0


def test_empty_and_shape_errors():
    assert Multiset.empty(3).n == 0
    with pytest.raises(ValueError):
        Multiset([[np.nan, 0.0]])


@pytest.mark.parametrize("A, B, expected", [
    ([[0.0], [1.0]], [[0.0], [2.0]], 1.0),
    ([[0.0, 0.0], [2.0, 0.0]], [[0.0, 1.0], [2.0, 1.0]], 2.0),
    ([[0.0]], [[5.0]], 5.0),
])
def test_wasserstein_fixtures(A, B, expected):
    assert wasserstein(A, B) == expected == wasserstein_bruteforce(A, B)


def test_wasserstein_known_value():
    A = Multiset([[0.0, 0.0], [1.0, 0.0]])
    B = Multiset([[1.0, 0.5], [0.0, 0.25]])
    assert wasserstein(A, B) == 0.75
    assert sorted(optimal_matching(A, B).tolist()) == [0, 1]


def test_wasserstein_size_mismatch():
    with pytest.raises(ValueError):
        wasserstein(Multiset([[0.0]]), Multiset([[0.0], [1.0]]))


def test_bruteforce_limit():
    X = np.zeros((9, 1))
    with pytest.raises(ValueError):
        wasserstein_bruteforce(X, X)


@settings(max_examples=60, deadline=None)
@given(point_sets(), st.data())
def test_wasserstein_metric_axioms(X, data):
    n = len(X)
    Y = data.draw(arrays(float, (n, 2), elements=coords))
    Z = data.draw(arrays(float, (n, 2), elements=coords))
    assert wasserstein(X, X) == 0.0
    assert wasserstein(X, Y) == wasserstein(Y, X)
    assert wasserstein(X, Z) <= wasserstein(X, Y) + wasserstein(Y, Z) + 1e-9
    perm = data.draw(st.permutations(range(n)))
    assert wasserstein(X[list(perm)], Y) == wasserstein(X, Y)


@settings(max_examples=40, deadline=None)
@given(point_sets(n_max=5))
def test_matched_error_zero_under_permutation(X):
    Y = X[::-1]
    assert matched_max_error(X, Y) == 0.0
    assert multisets_close(X, Y, 0.0)


def test_separation_values():
    A = Multiset([[0.0, 0.0], [0.3, 0.1], [1.0, 2.0]])
    assert min_separation(A) == 0.3
    assert max_pairwise(A) == 2.0
    assert min_separation(Multiset([[0.0, 0.0], [0.0, 0.0], [1.0, 1.0]])) == 0.0
    with pytest.raises(ValueError):
        min_separation(Multiset([[4.0, 4.0]]))


def test_domain_separation_report():
    D = [Multiset([[0.0], [1.0]]), Multiset([[0.0], [0.25], [2.0]])]
    rep = domain_separation(D)
    assert rep.R_D == 0.25
    np.testing.assert_array_equal(rep.normalized, [1.0, 0.125])
    assert rep.min_normalized == 0.125
    with pytest.raises(ValueError):
        domain_separation([])


def test_bruteforce_agrees_small():
    rng = np.random.default_rng(3)
    for n in range(1, 6):
        A, B = rng.normal(size=(n, 2)), rng.normal(size=(n, 2))
        best = min(sum(np.abs(A[i] - B[p[i]]).max() for i in range(n))
                   for p in itertools.permutations(range(n)))
        assert abs(wasserstein_bruteforce(A, B) - best) < 1e-12
