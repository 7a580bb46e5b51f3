import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from neutral_entropy import (
    Affine,
    ArgumentError,
    BallSpec,
    ConfigurationError,
    DomainError,
    MapSequence,
    Scale,
    Shift,
    SymbolicShift,
    Torus,
    UnitInterval,
    autonomous,
    ball_contains,
    bowen_dist,
    compose,
    parse_map,
    parse_space,
    periodic,
)
from neutral_entropy.dynamics import check_scale, cylinder_length, radius_for

import oracles

IDENTITY = autonomous(UnitInterval(), Affine((1,), (0.0,)))
DOUBLING = autonomous(UnitInterval(), Affine((2,), (0.0,)))
X2X3 = periodic(UnitInterval(), [Affine((2,), (0.0,)), Affine((3,), (0.0,))])
GOLDEN = autonomous(SymbolicShift(2, 20, ((1, 1),)), Shift())

unit = st.floats(0.0, 1.0, exclude_max=True)


def test_compose_identity():
    assert compose(IDENTITY, 4, 5, 0.3) == pytest.approx(0.3)


def test_compose_doubling():
    assert compose(DOUBLING, 1, 3, 0.1) == pytest.approx(0.8)


def test_compose_periodic_pair():
    assert compose(X2X3, 1, 2, 0.1) == pytest.approx(0.6)


def test_compose_zero_steps_is_identity():
    assert compose(DOUBLING, 1, 0, 0.37) == pytest.approx(0.37)


def test_bowen_identity_equals_metric():
    assert bowen_dist(IDENTITY, 1, 7, 0.1, 0.35) == pytest.approx(0.25)


def test_bowen_doubling_two_steps():
    assert bowen_dist(DOUBLING, 1, 2, 0.0, 0.2) == pytest.approx(0.4)


def test_bowen_golden_words():
    u = np.zeros(20, dtype=int)
    v = u.copy()
    v[3] = 1
    assert bowen_dist(GOLDEN, 1, 2, u, v) == pytest.approx(math.exp(-2))


def test_ball_contains_center():
    ball = BallSpec(np.array(0.4), 1, 6, 0.1)
    assert ball_contains(DOUBLING, ball, 0.4)


def test_ball_identity_radius():
    ball = BallSpec(np.array(0.0), 1, 10, 0.1)
    assert not ball_contains(IDENTITY, ball, 0.5)


def test_ball_doubling_oracle():
    # iterate gaps 0.01, 0.02, 0.04, 0.08 against radius e^{-0.2}
    ball = BallSpec(np.array(0.0), 1, 4, 0.05)
    gap = oracles.bowen([lambda x: 2 * x], 4, 0.0, 0.01)
    assert bool(ball_contains(DOUBLING, ball, 0.01)) == (gap < math.exp(-0.2))


def test_membership_is_strict():
    ball = BallSpec(np.array(0.0), 1, 1, 0.5, neutralized=False)
    assert not ball_contains(IDENTITY, ball, 0.5 - 0.0)
    assert ball_contains(IDENTITY, ball, 0.4999)


def test_radius_modes():
    assert radius_for(10, 0.2) == math.exp(-2.0)
    assert radius_for(10, 0.2, neutralized=False) == 0.2
    assert BallSpec(np.array(0.0), 1, 10, 0.2).radius == math.exp(-10 * 0.2)


def test_ballspec_rejects_bad_parameters():
    with pytest.raises(ArgumentError):
        BallSpec(np.array(0.0), 0, 1, 0.1)
    with pytest.raises(ArgumentError):
        BallSpec(np.array(0.0), 1, 1, 0.0)


def test_space_validation():
    with pytest.raises(DomainError):
        UnitInterval().validate(np.array([1.0]))
    with pytest.raises(DomainError):
        Torus(2).validate(np.array([[0.1, 1.2]]))
    with pytest.raises(DomainError):
        SymbolicShift(2, 4, ((1, 1),)).validate(np.array([[0, 1, 1, 0]]))


def test_symbolic_scale_guard():
    space = SymbolicShift(2, 10)
    with pytest.raises(ConfigurationError):
        check_scale(space, 8, math.exp(-4))
    check_scale(space, 4, math.exp(-4))


@pytest.mark.parametrize("n,eps,length", [(4, 0.5, 6), (3, math.log(2), 5), (10, 0.25, 12),
                                          (5, 0.2, 6)])
def test_cylinder_length_mismatch_algebra(n, eps, length):
    # first mismatch t must satisfy t > n - 1 + n eps
    system = autonomous(SymbolicShift(2, 40), Shift())
    assert cylinder_length(system, 1, n, math.exp(-n * eps)) == length


def test_cylinder_length_against_brute_force():
    system = autonomous(SymbolicShift(2, 14), Shift())
    n, eps = 3, 0.4
    r = math.exp(-n * eps)
    ell = cylinder_length(system, 1, n, r)
    center = np.zeros(14, dtype=int)
    for t in range(14):
        v = center.copy()
        v[t] = 1
        inside = oracles.word_bowen(n, center, v) < r
        assert inside == (t >= ell)


def test_rule_determinism():
    seq = MapSequence(UnitInterval(), (Affine((2,), (0.0,)), Affine((3,), (0.0,))),
                      "switched", seed=11)
    assert [seq.map_at(j) for j in range(1, 30)] == [seq.map_at(j) for j in range(1, 30)]
    assert MapSequence.from_dict(seq.to_dict()) == seq


def test_descriptor_round_trip():
    for text in ("interval", "torus:2", "shift:k=2,L=12,forbid=11"):
        assert parse_space(text).descriptor() == text
    for m in (Affine((2,), (0.25,)), Scale(0.5)):
        assert parse_map(m.descriptor()) == m


@given(unit, unit, unit)
def test_bowen_is_a_metric(x, y, z):
    d = lambda a, b: float(bowen_dist(X2X3, 1, 5, a, b))
    assert d(x, x) == 0
    assert d(x, y) == pytest.approx(d(y, x))
    assert d(x, z) <= d(x, y) + d(y, z) + 1e-12
    assert d(x, y) <= 0.5


@given(unit, unit, st.integers(1, 8))
def test_bowen_matches_scalar_oracle(x, y, n):
    maps = [lambda t: 2 * t, lambda t: 3 * t]
    assert float(bowen_dist(X2X3, 1, n, x, y)) == pytest.approx(oracles.bowen(maps, n, x, y),
                                                                abs=1e-12)


@given(st.lists(st.integers(0, 1), min_size=16, max_size=16),
       st.lists(st.integers(0, 1), min_size=16, max_size=16), st.integers(1, 5))
def test_symbolic_bowen_matches_oracle(u, v, n):
    system = autonomous(SymbolicShift(2, 16), Shift())
    got = float(bowen_dist(system, 1, n, np.array(u), np.array(v)))
    assert got == pytest.approx(oracles.word_bowen(n, u, v))


@given(unit, st.integers(1, 12))
def test_bowen_nondecreasing_in_order(x, n):
    y = (x + 0.013) % 1.0
    assert bowen_dist(DOUBLING, 1, n, x, y) <= bowen_dist(DOUBLING, 1, n + 1, x, y)


@given(unit)
def test_maps_stay_in_space(x):
    for m in (Affine((3,), (0.7,)), Scale(0.5), parse_map("logistic:r=3.7"), parse_map("tent")):
        y = float(m(np.array(x)))
        assert 0.0 <= y < 1.0
