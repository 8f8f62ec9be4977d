import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from janossy_cert.grid_codec import (
    GridCodec,
    bilip_estimate,
    build_codec,
    check_separation,
    decode,
    dimension_profile,
    encode,
    f_coords,
    f_features,
    f_ind,
)
from janossy_cert.multiset import Multiset, matched_max_error
from janossy_cert.synthetic import make_rng, random_separated_multiset, separated_pair_sampler


def unit_codec(d=2, R=0.5, hi=1.0):
    return build_codec(R, box=(np.zeros(d), np.full(d, hi)))


def test_codec_size():
    c = unit_codec()
    assert c.s == 0.25 and c.margin == 0.0625
    assert len(c.active) == 36 and c.m == 108


def test_margin_validation():
    with pytest.raises(ValueError):
        GridCodec(0.5, 0.125, [0.0], ((0,),))
    with pytest.raises(ValueError):
        GridCodec(0.5, 0.0, [0.0], ((0,),))
    with pytest.raises(ValueError):
        build_codec(0.0, box=([0.0], [1.0]))


def test_feature_values():
    c = unit_codec(d=1)
    Q = (1,)  # [0.25, 0.5], centre 0.375
    assert f_ind(c, Q, [0.3]) == 1.0
    assert f_ind(c, Q, [0.5 + 0.03125]) == 0.5
    assert f_ind(c, Q, [0.6]) == 0.0
    np.testing.assert_allclose(f_coords(c, Q, [0.3]), [-0.075])
    # in the margin the coordinate is capped by (s/2) * indicator
    np.testing.assert_allclose(f_coords(c, Q, [0.5 + 0.03125]), [0.0625])
    np.testing.assert_allclose(f_features(c, Q, [0.7]), [0.0, 0.0])


def test_boundary_point_dedup():
    # x on the shared face of two cubes has indicator 1 in both; decode must keep one copy
    c = unit_codec(d=2)
    A = Multiset([[0.5, 0.3], [0.0, 1.0]])
    E = encode(c, A)
    full = np.flatnonzero(np.abs(c.blocks(E)[:, 0] - 1) < 1e-12)
    assert len(full) > 2
    B = decode(c, E, n=2)
    assert B == A.canonical()


def test_encode_order_invariant(rng):
    c = unit_codec(d=2, hi=2.0)
    A = random_separated_multiset(rng, 6, 2, 0.5, 0.0, 2.0, strict=True)
    E1 = encode(c, A)
    E2 = encode(c, A.points[::-1])
    assert np.array_equal(E1, E2)


def test_encode_outside_raises():
    c = unit_codec(d=1)
    with pytest.raises(ValueError):
        encode(c, [[5.0]])
    with pytest.raises(ValueError):
        encode(c, [[0.1, 0.2]])


def test_decode_zero_and_errors():
    c = unit_codec(d=1)
    assert decode(c, np.zeros(c.m)).n == 0
    with pytest.raises(ValueError):
        decode(c, np.zeros(c.m), n=3)
    with pytest.raises(ValueError):
        decode(c, np.zeros(c.m + 1))
    E = np.zeros(c.m)
    E[0] = 0.5
    with pytest.raises(ValueError):
        decode(c, E)


def test_separation_gate():
    c = unit_codec(d=1)
    assert check_separation(c, [[0.0], [0.375]])
    assert not check_separation(c, [[0.0], [0.3]])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 12))
def test_round_trip_property(seed, d, n):
    rng = make_rng(seed)
    hi = 3.0
    A = random_separated_multiset(rng, n, d, 0.5, 0.0, hi)
    c = build_codec(0.5, box=(np.zeros(d), np.full(d, hi)))
    B = decode(c, encode(c, A))
    assert B.n == A.n
    assert matched_max_error(A, B) <= 1e-9


def test_bilip_positive():
    rng = make_rng(7)
    c = unit_codec(d=2, hi=2.0)
    est = bilip_estimate(c, separated_pair_sampler(rng, 5, 2, 0.5, 0.0, 2.0), 200)
    assert est.c_low > 0 and np.isfinite(est.C_high) and est.pairs > 0


def test_dimension_profile():
    prof = dimension_profile([0.5, 0.25], ([0.0, 0.0], [1.0, 1.0]))
    assert [p[1] for p in prof] == [36, 100]
    assert prof[0][2] == 108
