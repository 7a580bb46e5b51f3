import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from neutral_entropy import (
    Affine,
    BallSpec,
    FiniteInstance,
    LinearProgram,
    UnitInterval,
    autonomous,
    fractional_cover,
    frostman_measure,
    solve,
)
from neutral_entropy.measures import mass_of_ball

IDENTITY = autonomous(UnitInterval(), Affine((1,), (0.0,)))


def vertex_optimum(c, A, b):
    """Minimum of c.x over the vertices of {A x >= b, x >= 0} by enumeration."""
    m, n = A.shape
    G = np.vstack([A, np.eye(n)])
    h = np.concatenate([b, np.zeros(n)])
    best = math.inf
    combos = np.array(list(itertools.combinations(range(m + n), n)))
    for chunk in np.array_split(combos, max(1, len(combos) // 20000)):
        M = G[chunk]
        ok = np.abs(np.linalg.det(M)) > 1e-10
        x = np.linalg.solve(M[ok], h[chunk][ok][..., None])[..., 0]
        feas = np.all(x @ G.T >= h - 1e-9, axis=1)
        if feas.any():
            best = min(best, float((x[feas] @ c).min()))
    return best


def pairwise_instance():
    ground = np.array([0.0, 1 / 3, 2 / 3])
    balls = [BallSpec(np.array(c), 1, 1, 0.2, neutralized=False) for c in (1 / 6, 1 / 2, 5 / 6)]
    return FiniteInstance.build(IDENTITY, ground, balls)


def test_one_variable():
    sol = solve(LinearProgram(np.array([1.0]), np.array([[1.0]]), np.array([1.0])))
    assert sol.status == "optimal" and sol.x[0] == pytest.approx(1.0)


def test_duplicated_constraints():
    c = np.array([1.0, 2.0])
    A = np.array([[1.0, 1.0], [1.0, 3.0]])
    b = np.array([2.0, 3.0])
    once = solve(LinearProgram(c, A, b))
    twice = solve(LinearProgram(c, np.vstack([A, A]), np.concatenate([b, b])))
    assert twice.status == "optimal"
    assert twice.objective == pytest.approx(once.objective, abs=1e-12)


def test_infeasible_and_unbounded():
    assert solve(LinearProgram(np.array([1.0]), np.array([[-1.0]]), np.array([1.0]))).status \
        == "infeasible"
    assert solve(LinearProgram(np.array([-1.0]), np.array([[1.0]]), np.array([1.0]))).status \
        == "unbounded"


@pytest.mark.parametrize("seed", range(3))
def test_random_programs_against_vertices(seed):
    rng = np.random.default_rng(seed)
    c = rng.uniform(0.1, 2.0, 10)
    A = rng.uniform(-0.5, 1.0, (10, 10))
    b = rng.uniform(0.0, 1.0, 10)
    sol = solve(LinearProgram(c, A, b))
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(vertex_optimum(c, A, b), abs=1e-9)
    assert sol.gap <= 1e-9


@given(st.integers(0, 2 ** 20))
def test_small_programs_certified(seed):
    rng = np.random.default_rng(seed)
    c = rng.uniform(0.1, 2.0, 4)
    A = rng.uniform(-0.3, 1.0, (4, 4))
    b = rng.uniform(-0.2, 1.0, 4)
    sol = solve(LinearProgram(c, A, b))
    assert sol.status in ("optimal", "infeasible")
    if sol.status == "optimal":
        assert sol.objective == pytest.approx(vertex_optimum(c, A, b), abs=1e-9)
        assert np.all(A @ sol.x >= b - 1e-9)
        assert np.all(A.T @ sol.y <= c + 1e-9)


def test_lp_text_round_trip():
    lp = LinearProgram(np.array([1.0, 0.5]), np.array([[1.0, 2.0]]), np.array([1.0]))
    back = LinearProgram.from_text(lp.to_text())
    np.testing.assert_array_equal(back.A, lp.A)
    assert solve(back).objective == solve(lp).objective


def test_fractional_pairwise_instance():
    inst = pairwise_instance()
    w = fractional_cover(inst.membership, inst.costs(0.4))
    assert w.value == pytest.approx(1.5 * math.exp(-0.4))
    np.testing.assert_allclose(w.weights, [0.5] * 3, atol=1e-12)


def test_frostman_single_ball():
    ball = BallSpec(np.array(0.5), 1, 2, 0.5, neutralized=False)
    inst = FiniteInstance.build(IDENTITY, np.array([0.4, 0.5, 0.6]), [ball])
    mu, cert = frostman_measure(inst, 0.3)
    assert cert.passed
    assert mass_of_ball(mu, IDENTITY, ball) == pytest.approx(1.0)
    assert cert.c == pytest.approx(math.exp(-0.6))


def test_frostman_two_disjoint_balls():
    balls = [BallSpec(np.array(c), 1, 1, 0.1, neutralized=False) for c in (0.2, 0.7)]
    inst = FiniteInstance.build(IDENTITY, np.array([0.2, 0.7]), balls)
    mu, cert = frostman_measure(inst, 0.0)
    np.testing.assert_allclose(mu.masses, [0.5, 0.5])
    assert cert.passed


def test_frostman_pairwise():
    inst = pairwise_instance()
    mu, cert = frostman_measure(inst, 0.0)
    np.testing.assert_allclose(mu.masses, [1 / 3] * 3, atol=1e-12)
    assert cert.c == pytest.approx(1.5)
    for b in inst.balls:
        assert mass_of_ball(mu, IDENTITY, b) == pytest.approx(2 / 3)
    assert cert.passed and cert.gap <= 1e-9
