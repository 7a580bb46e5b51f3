import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from neutral_entropy import (
    Affine,
    BallSpec,
    FiniteInstance,
    InstanceError,
    Shift,
    SizeError,
    SymbolicShift,
    Torus,
    UnitInterval,
    autonomous,
    candidate_balls,
    exact_min_cover,
    greedy_cover,
    vitali_select,
)
from neutral_entropy.covering import (
    EXACT_LIMIT,
    build_net,
    cover_is_valid,
    sweep_cover,
    vitali_containment,
    vitali_families_disjoint,
)

import oracles

IDENTITY = autonomous(UnitInterval(), Affine((1,), (0.0,)))
DOUBLING = autonomous(UnitInterval(), Affine((2,), (0.0,)))
FULL2 = autonomous(SymbolicShift(2, 16), Shift())


def _fixed_instance(ground, centers, r, system=IDENTITY):
    balls = [BallSpec(np.array(c), 1, 1, r, neutralized=False) for c in centers]
    return FiniteInstance.build(system, np.array(ground), balls)


def test_build_net_interval():
    net = build_net(UnitInterval(), 0.5)
    np.testing.assert_allclose(np.sort(net), [0.0, 0.5])


def test_build_net_torus():
    assert build_net(Torus(2), 0.5).shape == (4, 2)


def test_build_net_full_shift():
    net = build_net(SymbolicShift(2, 10), math.exp(-3))
    assert net.shape[0] == 8
    assert len({tuple(w[:3]) for w in net}) == 8


def test_candidates_single_stratum():
    balls = candidate_balls(DOUBLING, np.array([0.2, 0.6]), 3, 3, 0.5)
    assert {b.order for b in balls} == {3}


def test_candidate_net_cardinality():
    # spacing r/3 on the whole circle gives ceil(3 e^{m}) centers at eps = 1
    dense = np.arange(4000) / 4000
    balls = candidate_balls(IDENTITY, dense, 2, 3, 1.0)
    sizes = {m: sum(b.order == m for b in balls) for m in (2, 3)}
    assert sizes == {2: math.ceil(3 * math.e ** 2), 3: math.ceil(3 * math.e ** 3)}


def test_candidate_cylinders_full_shift():
    words = np.array(oracles.words(2, 6))
    pts = np.zeros((64, 16), dtype=int)
    pts[:, :6] = words
    balls = candidate_balls(FULL2, pts, 4, 4, 0.5)
    # word length 4 + floor(4 * 0.5) = 6
    assert len(balls) == 64


def test_instance_rejects_uncovered_point():
    with pytest.raises(InstanceError):
        _fixed_instance([0.1, 0.6], [0.1], 0.2)


def test_greedy_single_ball():
    inst = _fixed_instance([0.1, 0.2], [0.15], 0.2)
    fam = greedy_cover(inst, 0.7)
    assert len(fam) == 1 and fam.cost == pytest.approx(math.exp(-0.7))


def test_greedy_two_disjoint_halves():
    inst = _fixed_instance([0.1, 0.15, 0.6, 0.65], [0.12, 0.62], 0.1)
    assert greedy_cover(inst, 0.3).cost == pytest.approx(2 * math.exp(-0.3))


def test_greedy_matches_exact_on_eight_words():
    pts = np.zeros((8, 16), dtype=int)
    pts[:, :3] = oracles.words(2, 3)
    inst = FiniteInstance.build(FULL2, pts, candidate_balls(FULL2, pts, 2, 3, 0.5))
    for alpha in (0.0, 0.5, 1.0):
        assert greedy_cover(inst, alpha).cost == pytest.approx(exact_min_cover(inst, alpha).cost)


def test_exact_single_point():
    balls = [BallSpec(np.array(c), 1, m, 0.3) for c, m in ((0.3, 2), (0.31, 3), (0.29, 4),
                                                            (0.8, 4))]
    inst = FiniteInstance.build(DOUBLING, np.array([0.3]), balls)
    fam = exact_min_cover(inst, 0.5)
    assert len(fam) == 1 and fam.cost == pytest.approx(math.exp(-0.5 * 4))


def test_exact_full_shift_count():
    # word length 3 + floor(3 ln 2) = 5 gives 2^5 cylinders
    pts = np.zeros((32, 16), dtype=int)
    pts[:, :5] = oracles.words(2, 5)
    inst = FiniteInstance.build(FULL2, pts, candidate_balls(FULL2, pts, 3, 3, math.log(2)))
    assert exact_min_cover(inst, 0.0).cost == 32


def test_exact_size_guard():
    rng = np.random.default_rng(0)
    ground = np.sort(rng.random(400))
    # overlapping equal arcs: none contains another, so none is dominated
    centers = np.linspace(0, 1, EXACT_LIMIT + 5, endpoint=False)
    with pytest.raises(SizeError):
        exact_min_cover(_fixed_instance(ground, centers, 0.2), 0.0)


def test_exact_drops_dominated_candidates():
    ground = np.array([0.3])
    centers = 0.3 + np.linspace(-0.05, 0.05, 60)
    balls = [BallSpec(np.array(c), 1, 1 + k % 5, 0.3) for k, c in enumerate(centers)]
    fam = exact_min_cover(FiniteInstance.build(DOUBLING, ground, balls), 0.5)
    assert len(fam) == 1 and fam.balls[0].order == 5


@pytest.mark.parametrize("seed", range(6))
def test_exact_against_subset_enumeration(seed):
    rng = np.random.default_rng(seed)
    ground = np.sort(rng.random(8))
    centers = np.concatenate([ground, rng.random(2)])
    orders = rng.integers(1, 4, 10)
    balls = [BallSpec(np.array(c), 1, int(m), 0.25) for c, m in zip(centers, orders)]
    inst = FiniteInstance.build(DOUBLING, ground, balls)
    sets = [set(np.nonzero(row)[0]) for row in inst.membership]
    costs = [math.exp(-0.4 * b.order) for b in inst.balls]
    best = oracles.brute_min_cover(sets, costs, set(range(len(ground))))
    assert exact_min_cover(inst, 0.4).cost == pytest.approx(best)
    assert greedy_cover(inst, 0.4).cost >= best - 1e-12


def test_vitali_single_ball():
    assert vitali_select(IDENTITY, [BallSpec(np.array(0.5), 1, 1, 0.1, neutralized=False)]) == [0]


def test_vitali_disjoint_pair():
    balls = [BallSpec(np.array(c), 1, 1, 0.1, neutralized=False) for c in (0.0, 0.4)]
    assert vitali_select(IDENTITY, balls) == [0, 1]


def test_vitali_chain():
    balls = [BallSpec(np.array(0.05 * k), 1, 1, 0.1, neutralized=False) for k in range(5)]
    sel = vitali_select(IDENTITY, balls)
    probes = np.linspace(-0.1, 0.3, 401) % 1.0
    assert vitali_containment(IDENTITY, balls, sel, probes)
    assert vitali_families_disjoint(IDENTITY, balls, sel)


@given(st.lists(st.floats(0, 1, exclude_max=True), min_size=1, max_size=12),
       st.floats(0.01, 0.2))
def test_vitali_postconditions(centers, r):
    balls = [BallSpec(np.array(c), 1, 2, r, neutralized=False) for c in centers]
    sel = vitali_select(DOUBLING, balls)
    probes = np.linspace(0, 1, 512, endpoint=False)
    assert vitali_families_disjoint(DOUBLING, balls, sel)
    assert vitali_containment(DOUBLING, balls, sel, probes)


@given(st.integers(0, 2 ** 16))
def test_greedy_is_valid_and_above_exact(seed):
    rng = np.random.default_rng(seed)
    ground = np.sort(rng.random(6))
    centers = np.concatenate([ground, rng.random(4)])
    balls = [BallSpec(np.array(c), 1, int(rng.integers(1, 3)), 0.4) for c in centers]
    inst = FiniteInstance.build(DOUBLING, ground, balls)
    g = greedy_cover(inst, 0.5)
    assert cover_is_valid(inst, g)
    assert g.cost >= exact_min_cover(inst, 0.5).cost - 1e-12


def test_instance_text_round_trip():
    inst = _fixed_instance([0.1, 0.3, 0.35], [0.1, 0.32], 0.1)
    back = FiniteInstance.from_text(inst.to_text())
    np.testing.assert_array_equal(back.membership, inst.membership)
    np.testing.assert_array_equal(back.ground, inst.ground)


def test_sweep_identity_static_count():
    # arcs of half-width r cover [0,1) with floor(1/(2r)) + 1 of them up to the net refinement
    s = sweep_cover(IDENTITY, (0.0, 1.0), 10, 0.2)
    r = math.exp(-2.0)
    assert math.ceil(1 / (2 * r)) <= s.count <= math.floor(1 / (2 * r)) + 1
