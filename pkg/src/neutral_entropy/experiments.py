"""Randomized verification suites shared by the command line and the tests."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covering import (
    FiniteInstance,
    admissible_words,
    candidate_balls,
    exact_min_cover,
    vitali_containment,
    vitali_families_disjoint,
    vitali_select,
)
from .dynamics import (
    Affine,
    BallSpec,
    MapSequence,
    Shift,
    SymbolicShift,
    Torus,
    UnitInterval,
    autonomous,
)
from .estimators import (
    ExponentReport,
    TargetSet,
    bk_entropy,
    bk_window,
    katok_entropy,
    nb_report,
    outer_W,
)
from .lp import frostman_measure
from .measures import FiniteMeasure, supported_on

WORD_BUDGET = 20_000
SANDWICH_EPS = (0.5, 0.75, 1.0)
SANDWICH_THETA = (0.6, 0.8, 1.0)
SANDWICH_ALPHA = (0.0, 0.3, 0.6)


# --------------------------------------------------------------------------
# symbolic instances


def clustered_words(space: SymbolicShift, rng: np.random.Generator, count: int = 30,
                    clusters: int = 3, head: int = 6) -> np.ndarray:
    """Admissible words grouped around a few random prefixes."""
    heads = admissible_words(space, head)
    heads = heads[rng.choice(heads.shape[0], size=clusters, replace=False)]
    out = np.zeros((count, space.horizon), dtype=np.int64)
    for i in range(count):
        out[i, :head] = heads[rng.integers(clusters)]
        for t in range(head, space.horizon):
            syms = [a for a in range(space.k)
                    if space.admissible(np.r_[out[i, :t], a])]
            out[i, t] = syms[rng.integers(len(syms))]
    return np.unique(out, axis=0)


def symbolic_instance(system: MapSequence, ground: np.ndarray, n: int, n_max: int,
                      eps: float) -> FiniteInstance:
    return FiniteInstance.build(system, ground, candidate_balls(system, ground, n, n_max, eps))


@dataclass(frozen=True)
class SandwichPoint:
    instance: int
    eps: float
    theta: float
    alpha: float
    n: int
    lower: float   # M(n, alpha + theta, eps / 2)
    middle: float  # W(n, alpha, eps)
    upper: float   # M(n, alpha, eps)

    @property
    def holds(self) -> bool:
        return self.lower <= self.middle and self.middle <= self.upper

    def to_dict(self) -> dict:
        return {"instance": self.instance, "eps": self.eps, "theta": self.theta,
                "alpha": self.alpha, "n": self.n, "M_lower": self.lower, "W": self.middle,
                "M_upper": self.upper, "margin_lower": self.middle - self.lower,
                "margin_upper": self.upper - self.middle, "holds": self.holds}


def sandwich_condition(n: int, eps: float, theta: float) -> bool:
    return math.exp(n * eps / 2) > 5 and n * n * math.exp(-n * theta) < 1


def sandwich_suite(seed: int, instances: int = 20, n: int = 8, n_max: int = 10,
                   k: int = 2, horizon: int = 24) -> list[SandwichPoint]:
    """Chain M(eps/2, alpha+theta) <= W(eps, alpha) <= M(eps, alpha) on clustered
    symbolic ground sets over the standard 3x3x3 grid."""
    system = autonomous(SymbolicShift(k, horizon), Shift())
    rng = np.random.default_rng(seed)
    out = []
    for idx in range(instances):
        ground = clustered_words(system.space, rng)
        for eps in SANDWICH_EPS:
            fine = symbolic_instance(system, ground, n, n_max, eps)
            coarse = symbolic_instance(system, ground, n, n_max, eps / 2)
            for alpha in SANDWICH_ALPHA:
                w = outer_W(fine, alpha).value
                upper = exact_min_cover(fine, alpha).cost
                for theta in SANDWICH_THETA:
                    if not sandwich_condition(n, eps, theta):
                        continue
                    lower = exact_min_cover(coarse, alpha + theta).cost
                    out.append(SandwichPoint(idx, eps, theta, alpha, n, lower, w, upper))
    return out


# --------------------------------------------------------------------------
# Frostman


def interval_instance(system: MapSequence, rng: np.random.Generator, points: int,
                      n: int, n_max: int, eps: float) -> FiniteInstance:
    ground = np.sort(rng.random(points))
    return FiniteInstance.build(system, ground, candidate_balls(system, ground, n, n_max, eps))


def frostman_suite(seed: int, instances: int = 10) -> list[dict]:
    """Frostman certificates on symbolic and interval instances."""
    rng = np.random.default_rng(seed)
    shift = autonomous(SymbolicShift(2, 24), Shift())
    doubling = autonomous(UnitInterval(), Affine((2,), (0.0,)))
    identity = autonomous(UnitInterval(), Affine((1,), (0.0,)))
    rows = []
    for idx in range(instances):
        alpha = float(rng.choice([0.0, 0.3, 0.6]))
        cases = [("shift", symbolic_instance(shift, clustered_words(shift.space, rng), 4, 6, 0.5)),
                 ("doubling", interval_instance(doubling, rng, 12, 3, 4, 0.5)),
                 ("identity", interval_instance(identity, rng, 15, 2, 3, 0.6))]
        for name, inst in cases:
            mu, cert = frostman_measure(inst, alpha)
            rows.append({"instance": idx, "system": name, "alpha": alpha,
                         "balls": len(inst.balls), "points": int(inst.ground.shape[0]),
                         "W": cert.c, "gap": cert.gap, "max_excess": cert.max_excess,
                         "mass": math.fsum(mu.masses), "passed": cert.passed})
    return rows


# --------------------------------------------------------------------------
# measure families


def measure_family(system: MapSequence, target: TargetSet, seed: int,
                   count: int = 2000) -> list[tuple[str, FiniteMeasure]]:
    """At least five probability measures supported on Z."""
    space = system.space
    rng = np.random.default_rng(seed)
    out = []
    if isinstance(space, SymbolicShift):
        # atoms live on cylinders of the longest length within the word budget
        length = 1
        while length < space.horizon and target.words(space, length + 1).shape[0] <= WORD_BUDGET:
            length += 1
        words = target.words(space, length)
        full = np.zeros((words.shape[0], space.horizon), dtype=np.int64)
        full[:, :length] = words
        full = full[space.admissible(full)]
        out.append(("cylinder-uniform", FiniteMeasure.uniform(space, full)))
        pick = rng.choice(full.shape[0], size=max(1, full.shape[0] // 2), replace=False)
        out.append(("sampled", FiniteMeasure.uniform(space, full[np.sort(pick)])))
        sym = full[:, :length]
        bias = np.prod(np.where(sym == 0, 0.7, 0.3), axis=1)
        out.append(("bernoulli-0.7", FiniteMeasure.from_weights(space, full, bias)))
        out.append(("point", FiniteMeasure.uniform(space, full[:1])))
        half = full[: max(1, full.shape[0] // 2)]
        out.append(("half-uniform", FiniteMeasure.uniform(space, half)))
        return out
    a, b = target.interval()
    width = b - a
    out.append(("grid", FiniteMeasure.uniform(space, a + width * np.arange(count) / count)))
    out.append(("uniform", FiniteMeasure.uniform(space, np.unique(a + width * rng.random(count)))))
    skew = np.unique(a + width * rng.random(count) ** 3)
    out.append(("skewed", FiniteMeasure.uniform(space, skew)))
    grid = a + width * np.arange(count) / count
    out.append(("weighted-grid", FiniteMeasure.from_weights(
        space, grid, 1.0 + 0.8 * np.sin(2 * np.pi * np.arange(count) / count))))
    out.append(("point", FiniteMeasure.uniform(space, np.array([a + width / 3]))))
    return out


# --------------------------------------------------------------------------
# inequality checks between estimators


@dataclass(frozen=True)
class Comparison:
    system: str
    measure: str
    eps: float
    left: float
    right: float
    slack: float

    @property
    def holds(self) -> bool:
        return self.left <= self.right + self.slack

    def to_dict(self) -> dict:
        return {"system": self.system, "measure": self.measure, "eps": self.eps,
                "left": self.left, "right": self.right, "slack": self.slack,
                "margin": self.right + self.slack - self.left, "holds": self.holds}


def bk_katok_check(name: str, system: MapSequence, label: str, mu: FiniteMeasure, eps: float,
                 n_schedule, deltas=(0.1,)) -> Comparison:
    """Brin-Katok at eps/2 against Katok at eps, slack reported with the run."""
    n2 = max(n_schedule)
    bk = bk_entropy(mu, system, eps / 2, bk_window(n2))
    kat = katok_entropy(system, mu, eps, deltas, n_schedule, n2).value
    return Comparison(name, label, eps, bk.value, kat.alpha, kat.slack + bk.window_term)


def katok_nb_check(name: str, system: MapSequence, target: TargetSet, label: str,
                    mu: FiniteMeasure, eps: float, n_schedule, nb=None,
                    deltas=(0.1,)) -> Comparison:
    """Katok exponent of a measure on Z against the NB exponent of Z."""
    if not supported_on(mu, target.contains):
        raise ValueError(f"measure {label} is not supported on Z")
    if nb is None:
        nb = nb_report(system, target, eps, n_schedule, max(n_schedule))
    kat = katok_entropy(system, mu, eps, deltas, n_schedule, max(n_schedule)).value
    return Comparison(name, label, eps, kat.alpha, nb.alpha, kat.slack + nb.slack)


# --------------------------------------------------------------------------
# Vitali


def _random_family(kind: str, rng: np.random.Generator):
    size = int(rng.integers(1, 13))
    order = int(rng.integers(1, 4))
    if kind == "interval":
        system = autonomous(UnitInterval(), Affine((int(rng.integers(1, 4)),), (0.0,)))
        centers = rng.random(size)
        r = float(rng.uniform(0.01, 0.15))
        probes = rng.random(400)
    elif kind == "torus":
        system = autonomous(Torus(2), Affine((int(rng.integers(1, 3)),) * 2, (0.0, 0.0)))
        centers = rng.random((size, 2))
        r = float(rng.uniform(0.02, 0.2))
        probes = rng.random((400, 2))
    else:
        space = SymbolicShift(2, 12)
        system = autonomous(space, Shift())
        centers = rng.integers(0, 2, (size, 12))
        r = float(math.exp(-rng.uniform(0.5, 4.0)))
        probes = rng.integers(0, 2, (400, 12))
    balls = [BallSpec(c, 1, order, r, neutralized=False) for c in centers]
    # probes near the centers exercise the containment claim
    return system, balls, probes


def vitali_suite(kind: str, trials: int, seed: int) -> dict:
    rng = np.random.default_rng([seed, ["interval", "torus", "shift"].index(kind)])
    disjoint = contained = 0
    for _ in range(trials):
        system, balls, probes = _random_family(kind, rng)
        sel = vitali_select(system, balls)
        disjoint += vitali_families_disjoint(system, balls, sel)
        contained += vitali_containment(system, balls, sel, probes)
    return {"kind": kind, "trials": trials, "disjoint": disjoint, "contained": contained,
            "holds": disjoint == trials and contained == trials}


# --------------------------------------------------------------------------
# structural properties


def _row(prop: str, case: str, holds: bool, **detail) -> dict:
    return {"property": prop, "case": case, "holds": bool(holds), **detail}


def _padded(space: SymbolicShift, target: TargetSet, length: int) -> TargetSet:
    words = target.words(space, length)
    pts = np.zeros((words.shape[0], space.horizon), dtype=np.int64)
    pts[:, :length] = words
    return TargetSet("points", points=pts[space.admissible(pts)])


def _union(a: TargetSet, b: TargetSet) -> TargetSet:
    return TargetSet("points", points=np.unique(np.concatenate([a.points, b.points]), axis=0))


def _table(rep: ExponentReport) -> dict[int, int]:
    return {m: c for m, c in rep.details["table"]}


def _within(lo: ExponentReport, hi: ExponentReport) -> bool:
    """lo.alpha <= hi.alpha up to the two reported slacks."""
    return lo.alpha <= hi.alpha + lo.slack + hi.slack


def monotone_n_suite() -> list[dict]:
    """M(n, alpha) never decreases as n grows with N_max fixed."""
    from .estimators import outer_table
    from . import zoo
    rows = []
    cases = [("full2", TargetSet(), range(3, 9), 0.5, 10),
             ("golden", TargetSet("cylinder", prefix=(0,)), range(3, 9), 0.5, 10),
             ("doubling", TargetSet("interval", 0.0, 1 / 64), range(8, 13), 0.2, 13),
             ("identity", TargetSet(), range(8, 13), 0.2, 13)]
    for name, target, ns, eps, n_max in cases:
        table = outer_table(zoo.get(name).system, target, list(ns), [0.0, 0.5, 1.0, 1.5],
                            eps, n_max)
        bad = table.monotone_violations()
        rows.append(_row("monotone-n", f"{name}/{target.descriptor()}", not bad,
                         violations=len(bad)))
    return rows


def monotone_z_suite() -> list[dict]:
    """Z1 inside Z2 gives C_Z1(m) <= C_Z2(m) at every order and a smaller exponent."""
    from . import zoo
    rows = []
    chains = [("full2", 0.5, [4, 6, 8], [TargetSet("cylinder", prefix=(0, 1)),
                                         TargetSet("cylinder", prefix=(0,)), TargetSet()]),
              ("golden", 0.5, [4, 6, 8], [TargetSet("cylinder", prefix=(1, 0)), TargetSet()]),
              ("doubling", 0.2, list(range(8, 17)),
               [TargetSet("interval", 0.0, 1 / 128), TargetSet("interval", 0.0, 1 / 64)]),
              ("identity", 0.2, list(range(8, 17)),
               [TargetSet("interval", 0.25, 0.5), TargetSet()])]
    for name, eps, sched, chain in chains:
        system = zoo.get(name).system
        reps = [nb_report(system, t, eps, sched, max(sched)) for t in chain]
        for (t1, r1), (t2, r2) in zip(zip(chain, reps), zip(chain[1:], reps[1:])):
            c1, c2 = _table(r1), _table(r2)
            counts_ok = all(c1[m] <= c2[m] for m in c1)
            rows.append(_row("monotone-Z", f"{name}/{t1.descriptor()}<{t2.descriptor()}",
                             counts_ok and _within(r1, r2), inner=r1.alpha, outer=r2.alpha,
                             slack=r1.slack + r2.slack, counts_ok=counts_ok))
    return rows


def finite_union_suite() -> list[dict]:
    """Exponent of Z1 u Z2 equals the larger of the two within the brackets; per
    order the union count lies between the larger count and the sum."""
    from . import zoo
    rows = []
    for name, p1, p2 in [("full2", (0, 0), (1,)), ("golden", (0,), (1, 0)),
                         ("full3", (2,), (0, 1))]:
        e = zoo.get(name)
        sched = [2, 4, 6] if name == "full3" else [4, 6, 8]
        length = max(m + math.floor(m * 0.5) for m in sched)
        z1 = _padded(e.space, TargetSet("cylinder", prefix=p1), length)
        z2 = _padded(e.space, TargetSet("cylinder", prefix=p2), length)
        rows.append(_union_row(name, e.system, z1, z2, _union(z1, z2), 0.5, sched))
    e = zoo.get("doubling")
    z1, z2 = TargetSet("interval", 0.0, 1 / 128), TargetSet("interval", 1 / 128, 1 / 64)
    rows.append(_union_row("doubling", e.system, z1, z2, TargetSet("interval", 0.0, 1 / 64),
                           0.2, list(range(8, 17))))
    return rows


def _union_row(name, system, z1, z2, both, eps, sched) -> dict:
    r1, r2, ru = (nb_report(system, t, eps, sched, max(sched)) for t in (z1, z2, both))
    c1, c2, cu = (_table(r) for r in (r1, r2, ru))
    counts_ok = all(max(c1[m], c2[m]) <= cu[m] <= c1[m] + c2[m] for m in cu)
    top = max(r1, r2, key=lambda r: r.alpha)
    holds = counts_ok and _within(top, ru) and _within(ru, top)
    return _row("finite-union", f"{name}/{z1.descriptor()}+{z2.descriptor()}", holds,
                union=ru.alpha, parts=[r1.alpha, r2.alpha], slack=ru.slack + top.slack,
                counts_ok=counts_ok)


def thinned(inst: FiniteInstance, rng: np.random.Generator, size: int = 20) -> FiniteInstance:
    """Random candidate subfamily that still covers the ground set, small enough
    for the exact solver."""
    order = rng.permutation(len(inst.balls))
    covered = np.zeros(inst.membership.shape[1], dtype=bool)
    keep = []
    for j in order:
        if (inst.membership[j] & ~covered).any():
            keep.append(j)
            covered |= inst.membership[j]
    keep += [j for j in order if j not in keep][: max(0, size - len(keep))]
    keep = sorted(keep)
    return FiniteInstance(inst.system, inst.ground, tuple(inst.balls[j] for j in keep),
                          inst.membership[keep], None)


def w_le_m_suite(seed: int, instances: int = 20) -> list[dict]:
    """LP value never exceeds the combinatorial optimum."""
    rng = np.random.default_rng(seed)
    system = autonomous(SymbolicShift(2, 24), Shift())
    doubling = autonomous(UnitInterval(), Affine((2,), (0.0,)))
    rows = []
    for idx in range(instances):
        for name, inst in [("shift", symbolic_instance(system, clustered_words(system.space, rng),
                                                        6, 8, 0.5)),
                           ("doubling", thinned(interval_instance(doubling, rng, 10, 3, 4, 0.5),
                                                rng))]:
            for alpha in (0.0, 0.4, 0.8):
                w = outer_W(inst, alpha).value
                m = exact_min_cover(inst, alpha).cost
                rows.append(_row("W<=M", f"{name}#{idx}/alpha={alpha}", w <= m * (1 + 1e-12),
                                 W=w, M=m))
    return rows


def fixed_le_neutral_suite() -> list[dict]:
    """Fixed-radius counts never exceed neutralized counts once e^{-m eps} <= eps,
    and the fixed-radius exponent is the smaller one."""
    from . import zoo
    rows = []
    for name, eps, sched in [("full2", 0.5, [4, 6, 8]), ("golden", 0.5, [4, 6, 8]),
                             ("identity", 0.2, list(range(8, 17))),
                             ("doubling", 0.2, list(range(8, 17)))]:
        e = zoo.get(name)
        target = e.probe(eps)
        neut = nb_report(e.system, target, eps, sched, max(sched))
        fixed = nb_report(e.system, target, eps, sched, max(sched), neutralized=False)
        f, g = _table(fixed), _table(neut)
        counts_ok = all(f[m] <= g[m] for m in sched if math.exp(-m * eps) <= eps)
        rows.append(_row("fixed<=neutralized", f"{name}/{target.descriptor()}",
                         counts_ok and _within(fixed, neut), fixed=fixed.alpha,
                         neutralized=neut.alpha, counts_ok=counts_ok))
    return rows


def structural_suite(seed: int) -> list[dict]:
    return (monotone_n_suite() + monotone_z_suite() + finite_union_suite()
            + w_le_m_suite(seed) + fixed_le_neutral_suite())
