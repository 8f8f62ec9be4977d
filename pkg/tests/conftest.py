import itertools
import sys
import math

import numpy as np
import pytest

from janossy_cert.synthetic import make_rng


@pytest.fixture
def rng():
    return make_rng(42)


def brute_pool(f, k, X, d=1):
    """Pooling by walking every permutation of the rows; independent of the library's pooling code."""
    X = np.asarray(X, dtype=float).reshape(-1, d)
    n = len(X)
    vals = [f.evaluate(X[list(p[:k])].ravel()) for p in itertools.permutations(range(n))]
    return np.array([math.fsum(col) for col in zip(*vals)]) / math.factorial(n - k)


def brute_tuple_coeffs(n, k):
    """Count, slot by slot, which index lands where across all ascending k-tuples."""
    M = np.zeros((k, n), dtype=np.int64)
    for tup in itertools.combinations(range(n), k):
        for j, i in enumerate(tup):
            M[j, i] += 1
    return M


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        terminalreporter.write_line(results[num])
