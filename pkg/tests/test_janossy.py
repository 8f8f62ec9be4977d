import math

import numpy as np
import pytest

from janossy_cert.cpwl import AffineMap, ReluNet, to_exact
from janossy_cert.janossy import (
    PoolingSpec,
    invariance_check,
    janossy_pool,
    janossy_pool_ascending,
    janossy_pool_sn,
    symmetrize,
)
from janossy_cert.synthetic import four_square_partition, random_relu

from conftest import brute_pool


def linear(coeffs):
    return ReluNet([AffineMap(np.atleast_2d(coeffs), [0.0])])


def test_deep_sets_case():
    # k = 1 with f(x) = x: plain sum
    spec = PoolingSpec(linear([1.0]), 1, 4)
    assert janossy_pool(spec, [1.0, 2.0, 3.0, 4.5])[0] == 10.5


def test_pairwise_sum_closed_form():
    # f(a, b) = a + 2b; every element sits in each slot (n-1) times
    X = np.array([0.5, 1.0, 2.0])
    spec = PoolingSpec(linear([1.0, 2.0]), 2, 3)
    assert janossy_pool(spec, X)[0] == pytest.approx(3 * 2 * X.sum())
    assert janossy_pool_sn(spec, X)[0] == pytest.approx(3 * 2 * X.sum())


def test_k_equals_n_normalisation():
    f = linear([1.0, -1.0])
    spec = PoolingSpec(f, 2, 2)
    # the formula keeps the n! weight: F = f(a, b) + f(b, a) = 0 here, and 2 f for symmetric f
    assert janossy_pool(spec, [1.0, 3.0])[0] == 0.0
    g = linear([1.0, 1.0])
    assert janossy_pool(PoolingSpec(g, 2, 2), [1.0, 3.0])[0] == 8.0


def test_spec_validation():
    with pytest.raises(ValueError):
        PoolingSpec(linear([1.0, 1.0]), 3, 2)
    with pytest.raises(ValueError):
        janossy_pool(PoolingSpec(linear([1.0]), 1, 3), [1.0, 2.0])


def test_sn_limit():
    spec = PoolingSpec(linear([1.0]), 1, 9)
    with pytest.raises(ValueError):
        janossy_pool_sn(spec, np.zeros(9))


@pytest.mark.parametrize("k,n", [(1, 3), (2, 4), (3, 5), (2, 6)])
def test_pooling_forms_agree(rng, k, n):
    f = random_relu(rng, k)
    spec = PoolingSpec(f, k, n)
    X = rng.uniform(0, 1, n)
    a = janossy_pool(spec, X)
    np.testing.assert_allclose(janossy_pool_sn(spec, X), a, atol=1e-12)
    np.testing.assert_allclose(brute_pool(f, k, X), a, atol=1e-12)
    fhat = symmetrize(f, k)
    np.testing.assert_allclose(janossy_pool_ascending(fhat, k, np.sort(X)[::-1]), a, atol=1e-12)


def test_multidim_pooling(rng):
    f = random_relu(rng, 2 * 3)
    spec = PoolingSpec(f, 2, 4, d=3)
    X = rng.uniform(0, 1, (4, 3))
    np.testing.assert_allclose(janossy_pool(spec, X), brute_pool(f, 2, X, d=3), atol=1e-12)


def test_symmetrized_is_symmetric(rng):
    f = random_relu(rng, 3)
    fhat = symmetrize(f, 3)
    x = rng.uniform(0, 1, 3)
    v = fhat.evaluate(x)
    assert np.array_equal(fhat.evaluate(x[[2, 0, 1]]), v)
    assert np.array_equal(fhat.evaluate_many(np.stack([x, x[::-1]])), np.stack([v, v]))
    assert math.isclose(v[0], sum(f.evaluate(x[list(p)])[0] for p in
                                  [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]))


def test_symmetrized_partition_region():
    fhat = symmetrize(four_square_partition(), 2)
    assert fhat.region_id([0.25, 0.75]) == (1, 2)
    A, _ = fhat.local_affine([0.1, 0.2])
    np.testing.assert_allclose(A.apply([0.15, 0.3]), fhat.evaluate([0.15, 0.3]))


def test_exact_pooling_is_exact():
    P = four_square_partition()
    spec = PoolingSpec(P, 2, 3)
    X = to_exact(np.array([0.125, 0.25, 0.375]))
    out = janossy_pool(spec, X)
    assert out.dtype == object
    assert out[0] == sum(P.evaluate(X[[i, j]])[0] for i in range(3) for j in range(3) if i != j)


def test_invariance_check(rng):
    f = random_relu(rng, 2)
    rep = invariance_check(PoolingSpec(f, 2, 5), rng.uniform(0, 1, 5), trials=200, rng=rng)
    assert rep.ok(1e-9)
