"""Caratheodory-type entropy estimators on finite restrictions.

Every outer quantity here is computed over a restricted family (orders in
``[n, N_max]``, net or cylinder centers) and is therefore an upper bound for
the unrestricted infimum.  Exponents are extracted from the growth of
uniform-order cover counts across the order schedule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .covering import (
    FiniteInstance,
    admissible_words,
    candidate_balls,
    exact_min_cover,
    greedy_cover,
    sweep_cover,
)
from .dynamics import (
    BallSpec,
    MapSequence,
    SymbolicShift,
    UnitInterval,
    arc_extents,
    ball_contains,
    bowen_dist,
    check_scale,
    cylinder_length,
    fragmented,
    radius_for,
)
from .errors import ArgumentError, BracketError, ConfigurationError, InstanceError
from .lp import WeightedValue, fractional_cover
from .measures import FiniteMeasure

HI = 1e6
LO = 1e-6
WIDTH = 1e-3
INF = math.inf  # distinguished marker for zero-mass logarithms
GROUND_LIMIT = 2_000_000
MODEL_VAR = 0.01


# --------------------------------------------------------------------------
# target sets


@dataclass(frozen=True)
class TargetSet:
    """The set Z: ``full``, ``interval`` [a, b), ``cylinder`` (symbolic
    prefix) or ``points`` (an explicit finite set)."""

    kind: str = "full"
    a: float = 0.0
    b: float = 1.0
    prefix: tuple[int, ...] = ()
    points: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("full", "interval", "cylinder", "points"):
            raise ArgumentError(f"unknown target kind {self.kind!r}")
        if self.kind == "interval" and not 0 <= self.a < self.b <= 1:
            raise ArgumentError("interval target needs 0 <= a < b <= 1")
        if self.kind == "points" and self.points is None:
            raise ArgumentError("points target needs points")

    @classmethod
    def parse(cls, text: str) -> "TargetSet":
        head, _, body = text.strip().partition(":")
        if head == "full" and not body:
            return cls()
        if head == "interval":
            a, b = (float(v) for v in body.split(","))
            return cls("interval", a, b)
        if head == "cylinder":
            return cls("cylinder", prefix=tuple(int(ch) for ch in body))
        raise ArgumentError(f"cannot parse target {text!r}")

    def descriptor(self) -> str:
        if self.kind == "interval":
            return f"interval:{self.a!r},{self.b!r}"
        if self.kind == "cylinder":
            return "cylinder:" + "".join(map(str, self.prefix))
        if self.kind == "points":
            return f"points:{len(self.points)}"
        return "full"

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x)
        if self.kind == "full":
            return np.ones(x.shape[:1] if x.ndim else (), dtype=bool)
        if self.kind == "interval":
            return (x >= self.a) & (x < self.b)
        if self.kind == "cylinder":
            p = np.asarray(self.prefix)
            return np.all(x[..., : len(p)] == p, axis=-1)
        pts = np.asarray(self.points)
        if pts.ndim == 1:
            return np.isin(x, pts)
        return np.array([np.any(np.all(pts == row, axis=-1)) for row in np.atleast_2d(x)])

    def interval(self) -> tuple[float, float]:
        if self.kind == "full":
            return 0.0, 1.0
        if self.kind == "interval":
            return self.a, self.b
        raise ArgumentError(f"target {self.descriptor()} is not an interval")

    def words(self, space: SymbolicShift, length: int) -> np.ndarray:
        """Distinct length-``length`` prefixes of points of Z."""
        if self.kind == "points":
            return np.unique(np.asarray(self.points)[:, :length], axis=0)
        if self.kind == "full":
            return admissible_words(space, length)
        if self.kind == "cylinder":
            p = np.asarray(self.prefix, dtype=np.int64)
            if length <= len(p):
                return p[None, :length]
            w = admissible_words(space, length)
            return w[np.all(w[:, : len(p)] == p, axis=1)]
        raise ArgumentError("interval targets need a continuous space")


# --------------------------------------------------------------------------
# uniform-order cover counts


@dataclass(frozen=True)
class CountRow:
    order: int
    count: int
    method: str        # cylinder | sweep | greedy | exact
    fragmented: bool = False
    saturated: bool = False

    @property
    def informative(self) -> bool:
        return not (self.fragmented or self.saturated)


def _word_count(space: SymbolicShift, target: TargetSet, length: int) -> int:
    if target.kind == "full" and length > 14:
        # count without enumerating: admissible-word recursion on suffix states
        return int(_suffix_count(space, length))
    return int(target.words(space, length).shape[0])


def _suffix_count(space: SymbolicShift, length: int) -> int:
    """Admissible word count by dynamic programming over the last q-1 symbols."""
    q = max((len(w) for w in space.forbidden), default=1)
    states: dict[tuple, int] = {(): 1}
    for _ in range(length):
        nxt: dict[tuple, int] = {}
        for s, cnt in states.items():
            for a in range(space.k):
                w = s + (a,)
                if any(w[-len(f):] == f for f in space.forbidden if len(w) >= len(f)):
                    continue
                key = w[-(q - 1):] if q > 1 else ()
                nxt[key] = nxt.get(key, 0) + cnt
        states = nxt
    return sum(states.values())


def cover_count(system: MapSequence, target: TargetSet, order: int, eps: float,
                neutralized: bool = True, start: int = 1, mode: str = "exact",
                seed: int = 0) -> CountRow:
    """Fewest balls of a single order covering Z, within the restricted family."""
    space = system.space
    r = radius_for(order, eps, neutralized)
    check_scale(space, order, r)
    if isinstance(space, SymbolicShift) and target.kind != "interval":
        ell = cylinder_length(system, start, order, r)
        return CountRow(order, _word_count(space, target, ell), "cylinder",
                        saturated=ell == 0)
    if isinstance(space, UnitInterval) and target.kind in ("full", "interval"):
        s = sweep_cover(system, target.interval(), order, eps, neutralized, start, seed=seed)
        return CountRow(order, s.count, "sweep", s.fragmented, s.saturated)
    if target.kind == "points":
        inst = FiniteInstance.build(
            system, target.points,
            candidate_balls(system, target.points, order, order, eps, neutralized, start))
        fam = exact_min_cover(inst, 0.0) if mode == "exact" else greedy_cover(inst, 0.0)
        return CountRow(order, len(fam), mode, saturated=r >= space.diameter)
    raise ConfigurationError(f"no cover counter for {target.descriptor()} on {space.descriptor()}")


# --------------------------------------------------------------------------
# outer M


@dataclass(frozen=True)
class OuterValue:
    n: int
    alpha: float
    value: float
    family: str   # greedy | exact | lp | sweep | cylinder
    size: int


def cylinder_min_cover(system: MapSequence, target: TargetSet, n: int, n_max: int, eps: float,
                       alpha: float, neutralized: bool = True,
                       start: int = 1) -> tuple[float, list[tuple[int, tuple[int, ...]]]]:
    """Exact cheapest cover of Z by cylinders of orders in ``[n, n_max]``.

    Cylinders nest, so the optimum is a bottom-up minimum over the prefix
    tree: each node either takes its own cylinder or the optimal covers of
    its children.
    """
    space = system.space
    lengths: dict[int, int] = {}
    for m in range(n, n_max + 1):
        ell = cylinder_length(system, start, m, radius_for(m, eps, neutralized))
        cost = math.exp(-alpha * m)
        if ell not in lengths or cost < math.exp(-alpha * lengths[ell]):
            lengths[ell] = m
    levels = sorted(lengths)
    finest = target.words(space, levels[-1])
    if finest.shape[0] > GROUND_LIMIT:
        raise ConfigurationError(f"{finest.shape[0]} words exceed the enumeration limit")
    ids, values, take = [], [], []
    prev_parent = None
    for ell in reversed(levels):
        uniq, inv = np.unique(finest[:, :ell], axis=0, return_inverse=True)
        inv = inv.ravel()
        own = np.full(uniq.shape[0], math.exp(-alpha * lengths[ell]))
        if prev_parent is None:
            split = np.full(uniq.shape[0], math.inf)
        else:
            child_inv, child_val = prev_parent
            parent_of_child = np.zeros(child_val.shape[0], dtype=np.int64)
            parent_of_child[child_inv] = inv
            split = np.bincount(parent_of_child, weights=child_val, minlength=uniq.shape[0])
        t = own <= split
        val = np.where(t, own, split)
        ids.append((ell, uniq, inv))
        values.append(val)
        take.append(t)
        prev_parent = (inv, val)
    total = math.fsum(values[-1])
    # top-down reconstruction
    chosen = []
    active = np.ones(ids[-1][1].shape[0], dtype=bool)
    for k in range(len(levels) - 1, -1, -1):
        ell, uniq, inv = ids[k]
        pick = active & take[k]
        chosen += [(lengths[ell], tuple(row.tolist())) for row in uniq[pick]]
        if k:
            child_inv = ids[k - 1][2]
            nchild = ids[k - 1][1].shape[0]
            parent = np.zeros(nchild, dtype=np.int64)
            parent[child_inv] = inv
            active = (active & ~take[k])[parent]
    return total, sorted(chosen)


def outer_M(system: MapSequence, target: TargetSet, n: int, alpha: float, eps: float,
            n_max: int, mode: str = "greedy", neutralized: bool = True,
            start: int = 1) -> OuterValue:
    """Best found cost of a cover of Z by balls of orders in ``[n, n_max]``.

    Symbolic targets are solved exactly over all cylinders.  Interval targets
    on the unit interval use single-order sweep covers, minimizing over the
    order.  Finite point targets build an explicit instance and run the
    greedy or exact solver.
    """
    if n > n_max:
        raise ArgumentError("need n <= N_max")
    space = system.space
    if isinstance(space, SymbolicShift) and target.kind != "interval":
        value, fam = cylinder_min_cover(system, target, n, n_max, eps, alpha, neutralized, start)
        return OuterValue(n, alpha, value, "cylinder", len(fam))
    if target.kind == "points":
        inst = FiniteInstance.build(
            system, target.points,
            candidate_balls(system, target.points, n, n_max, eps, neutralized, start))
        fam = exact_min_cover(inst, alpha) if mode == "exact" else greedy_cover(inst, alpha)
        return OuterValue(n, alpha, fam.cost, mode, len(fam))
    rows = [cover_count(system, target, m, eps, neutralized, start) for m in range(n, n_max + 1)]
    costs = [r.count * math.exp(-alpha * r.order) for r in rows]
    k = int(np.argmin(costs))
    return OuterValue(n, alpha, costs[k], "sweep", rows[k].count)


@dataclass(frozen=True)
class OuterValueTable:
    eps: float
    n_max: int
    mode: str
    rows: tuple[OuterValue, ...]

    def monotone_violations(self) -> list[tuple[float, int]]:
        """(alpha, n) pairs where the value drops as n grows (beyond rounding)."""
        bad = []
        by_alpha: dict[float, list[OuterValue]] = {}
        for r in self.rows:
            by_alpha.setdefault(r.alpha, []).append(r)
        for a, rs in by_alpha.items():
            rs.sort(key=lambda r: r.n)
            bad += [(a, r2.n) for r1, r2 in zip(rs, rs[1:]) if r2.value < r1.value * (1 - 1e-12)]
        return bad


def outer_table(system: MapSequence, target: TargetSet, ns: Sequence[int],
                alphas: Sequence[float], eps: float, n_max: int, mode: str = "greedy",
                neutralized: bool = True) -> OuterValueTable:
    """M(n, alpha) over a grid; single-order counts are computed once."""
    space = system.space
    if isinstance(space, SymbolicShift) or target.kind == "points":
        rows = [outer_M(system, target, n, a, eps, n_max, mode, neutralized)
                for a in alphas for n in ns]
    else:
        counts = {m: cover_count(system, target, m, eps, neutralized).count
                  for m in range(min(ns), n_max + 1)}
        rows = []
        for a in alphas:
            for n in ns:
                costs = [(counts[m] * math.exp(-a * m), m) for m in range(n, n_max + 1)]
                v, m = min(costs)
                rows.append(OuterValue(n, a, v, "sweep", counts[m]))
    return OuterValueTable(eps, n_max, "neutralized" if neutralized else "fixed", tuple(rows))


# --------------------------------------------------------------------------
# critical exponents


@dataclass(frozen=True)
class ExponentReport:
    eps: float
    alpha: float
    width: float
    bracket: tuple[float, float]
    hi: float
    lo: float
    value_at_lo: float
    value_at_hi: float
    monotone: bool
    provenance: str
    evaluations: tuple[tuple[float, float], ...] = ()
    slack: float = 0.0
    details: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {"eps": self.eps, "alpha": self.alpha, "width": self.width,
                "bracket": list(self.bracket), "thresholds": [self.hi, self.lo],
                "value_at_bracket": [self.value_at_lo, self.value_at_hi],
                "monotone": self.monotone, "provenance": self.provenance,
                "slack": self.slack, **self.details}


def critical_exponent(value_fn: Callable[[float], float], bracket: tuple[float, float] = (0.0, 5.0),
                      eps: float = float("nan"), hi: float = HI, lo: float = LO,
                      width: float = WIDTH, provenance: str = "", widen: int = 3) -> ExponentReport:
    """Locate the jump of ``value_fn`` from above ``hi`` to below ``lo``.

    The bracket is widened up to ``widen`` times, then bisected on the
    crossing of the geometric mean of the thresholds until its width is at
    most ``width``.  Evaluated points are checked for monotonicity.
    """
    a, b = bracket
    if not a < b:
        raise ArgumentError("bracket must satisfy lo < hi")
    seen: dict[float, float] = {}

    def f(x):
        if x not in seen:
            seen[x] = float(value_fn(x))
        return seen[x]

    step = b - a
    for attempt in range(widen + 1):
        if f(a) > hi and f(b) < lo:
            break
        if attempt == widen:
            raise BracketError(f"no bracket: value({a:g})={f(a):.3g}, value({b:g})={f(b):.3g}")
        if not f(a) > hi:
            a -= step
        if not f(b) < lo:
            b += step
        step *= 2
    mid_target = math.sqrt(hi * lo)
    left, right = a, b
    while right - left > width:
        mid = 0.5 * (left + right)
        if f(mid) > mid_target:
            left = mid
        else:
            right = mid
    pts = sorted(seen.items())
    monotone = all(v2 <= v1 for (_, v1), (_, v2) in zip(pts, pts[1:]))
    return ExponentReport(eps, 0.5 * (left + right), right - left, (left, right), hi, lo,
                          f(left), f(right), monotone, provenance, tuple(pts))


def schedule_slope(orders: Sequence[int], counts: Sequence[float]) -> tuple[float, np.ndarray]:
    """Weighted least-squares slope of ln(count) against order, and its weights.

    Each order is weighted by ``1 / (MODEL_VAR + 1 / C^2)``: integer rounding
    puts variance of order ``1 / C^2`` on ln(count), and ``MODEL_VAR`` keeps
    large counts from dominating the fit.  The slope equals sum_k w_k ln C_k
    with sum_k w_k = 0 and sum_k w_k m_k = 1, so ``exp(span * (slope - alpha))``
    is the weighted geometric mean of ``(C_k exp(-alpha m_k))^(span w_k)``.
    """
    m = np.asarray(orders, dtype=float)
    if m.size < 2:
        raise ConfigurationError("need at least two informative orders")
    c = np.asarray(counts, dtype=float)
    v = 1.0 / (MODEL_VAR + 1.0 / c ** 2)
    x = m - (v @ m) / v.sum()
    w = v * x / (v @ (x * x))
    return float(w @ np.log(c)), w


def exponent_from_counts(rows: Sequence[CountRow], eps: float, provenance: str,
                         bracket: tuple[float, float] = (0.0, 5.0)) -> ExponentReport:
    """Critical exponent of the schedule-weighted cover cost.

    Orders flagged as saturated (radius at least the diameter) or fragmented
    (ball larger than its central arc) are excluded from the fit.
    """
    use = [r for r in rows if r.informative]
    if len(use) < 2:
        raise BracketError(f"only {len(use)} informative orders at eps={eps}")
    orders = [r.order for r in use]
    counts = [r.count for r in use]
    slope, w = schedule_slope(orders, counts)
    span = float(max(orders) - min(orders))

    def value(alpha: float) -> float:
        with np.errstate(over="ignore"):
            return float(np.exp(span * (slope - alpha)))

    rep = critical_exponent(value, bracket, eps, provenance=provenance)
    quant = float(np.abs(w) @ np.log1p(1.0 / np.asarray(counts, dtype=float)))
    details = {"slope": slope, "orders": orders, "counts": counts,
               "excluded": [r.order for r in rows if not r.informative],
               "table": [[r.order, r.count] for r in rows], "quantization": quant}
    return ExponentReport(rep.eps, rep.alpha, rep.width, rep.bracket, rep.hi, rep.lo,
                          rep.value_at_lo, rep.value_at_hi, rep.monotone, provenance,
                          rep.evaluations, rep.width + quant, details)


@dataclass(frozen=True)
class EntropyCurve:
    points: tuple[ExponentReport, ...]
    fit: tuple[float, float] | None = None  # slope, intercept: extrapolation, not a theorem

    def pairs(self) -> list[tuple[float, float]]:
        return [(p.eps, p.alpha) for p in self.points]

    def monotone_in_eps(self) -> bool:
        pts = sorted(self.points, key=lambda p: p.eps)
        return all(q.alpha >= p.alpha - p.width - q.width for p, q in zip(pts, pts[1:]))


def _curve(reports: list[ExponentReport]) -> EntropyCurve:
    reports.sort(key=lambda r: -r.eps)
    fit = None
    if len(reports) >= 2:
        e = np.array([r.eps for r in reports])
        a = np.array([r.alpha for r in reports])
        s, c = np.polyfit(e, a, 1)
        fit = (float(s), float(c))
    return EntropyCurve(tuple(reports), fit)


def _check_schedules(eps_schedule, n_schedule, n_max):
    if not eps_schedule or not n_schedule:
        raise ArgumentError("schedules must be nonempty")
    if max(n_schedule) > n_max:
        raise ArgumentError("n schedule exceeds N_max")


def nb_report(system: MapSequence, target: TargetSet, eps: float, n_schedule: Sequence[int],
              n_max: int, neutralized: bool = True, mode: str = "exact",
              seed: int = 0, bracket: tuple[float, float] = (0.0, 5.0)) -> ExponentReport:
    rows = [cover_count(system, target, m, eps, neutralized, mode=mode, seed=seed)
            for m in sorted(set(n_schedule))]
    return exponent_from_counts(rows, eps, f"NB/{rows[0].method}", bracket)


def entropy_NB(system: MapSequence, target: TargetSet, eps_schedule: Sequence[float],
               n_schedule: Sequence[int], n_max: int, neutralized: bool = True,
               mode: str = "exact") -> EntropyCurve:
    _check_schedules(eps_schedule, n_schedule, n_max)
    return _curve([nb_report(system, target, e, n_schedule, n_max, neutralized, mode)
                   for e in eps_schedule])


# --------------------------------------------------------------------------
# weighted covers


def outer_W(instance: FiniteInstance, alpha: float) -> WeightedValue:
    """Optimal fractional cover of the instance at exponent ``alpha``."""
    return fractional_cover(instance.membership, instance.costs(alpha))


def _uniform_instance(system: MapSequence, target: TargetSet, order: int, eps: float,
                      neutralized: bool, start: int) -> FiniteInstance:
    space = system.space
    if isinstance(space, SymbolicShift) and target.kind != "points":
        ell = cylinder_length(system, start, order, radius_for(order, eps, neutralized))
        words = target.words(space, ell)
        ground = np.zeros((words.shape[0], space.horizon), dtype=np.int64)
        ground[:, :ell] = words
        if space.forbidden:
            ground = ground[space.admissible(ground)]
    elif target.kind == "points":
        ground = target.points
    else:
        raise ConfigurationError("weighted covers need a symbolic or finite target")
    balls = candidate_balls(system, ground, order, order, eps, neutralized, start)
    return FiniteInstance.build(system, ground, balls)


def nwb_report(system: MapSequence, target: TargetSet, eps: float, n_schedule: Sequence[int],
               n_max: int, neutralized: bool = True, start: int = 1,
               bracket: tuple[float, float] = (0.0, 5.0)) -> ExponentReport:
    rows = []
    for m in sorted(set(n_schedule)):
        inst = _uniform_instance(system, target, m, eps, neutralized, start)
        w = outer_W(inst, 0.0)
        # counts are fractional here; the fit only needs positive values
        rows.append(CountRow(m, w.value, "lp",
                             saturated=radius_for(m, eps, neutralized) >= system.space.diameter))
    return exponent_from_counts(rows, eps, "NWB/lp", bracket)


def entropy_NWB(system: MapSequence, target: TargetSet, eps_schedule: Sequence[float],
                n_schedule: Sequence[int], n_max: int, neutralized: bool = True) -> EntropyCurve:
    _check_schedules(eps_schedule, n_schedule, n_max)
    return _curve([nwb_report(system, target, e, n_schedule, n_max, neutralized)
                   for e in eps_schedule])


# --------------------------------------------------------------------------
# ball masses and Brin-Katok local entropy


def ball_masses(mu: FiniteMeasure, system: MapSequence, order: int, eps: float, centers,
                neutralized: bool = True, start: int = 1, seed: int = 0) -> np.ndarray:
    """mu(B_order(c, r)) for many centers, strict membership.

    Symbolic balls are cylinders and are summed by prefix.  On the unit
    interval, when probing finds no ball pieces outside the central arcs,
    only atoms near each arc are tested exactly; otherwise every atom is.
    """
    space = system.space
    if mu.space != space:
        raise ArgumentError("measure and system live on different spaces")
    r = radius_for(order, eps, neutralized)
    check_scale(space, order, r)
    centers = space.validate(centers)
    if isinstance(space, SymbolicShift):
        ell = cylinder_length(system, start, order, r)
        keys, inv = np.unique(mu.points[:, :ell], axis=0, return_inverse=True)
        mass = np.bincount(inv.ravel(), weights=mu.masses, minlength=keys.shape[0])
        lookup = {row.tobytes(): v for row, v in zip(keys, mass)}
        pre = np.ascontiguousarray(centers[:, :ell])
        return np.array([lookup.get(row.tobytes(), 0.0) for row in pre])
    if isinstance(space, UnitInterval) and r < space.diameter:
        left, right = arc_extents(system, start, order, r, centers)
        if not fragmented(system, start, order, r, centers, left, right, seed=seed):
            return _arc_masses(mu, system, start, order, r, centers, left, right)
    out = np.empty(centers.shape[0])
    chunk = max(1, 2_000_000 // max(1, len(mu)))
    for s in range(0, centers.shape[0], chunk):
        c = centers[s: s + chunk]
        cc = c[:, None] if isinstance(space, UnitInterval) else c[:, None, :]
        pp = mu.points[None] if isinstance(space, UnitInterval) else mu.points[None, :, :]
        inside = bowen_dist(system, start, order, cc, pp) < r
        out[s: s + chunk] = inside @ mu.masses
    return out


def _arc_masses(mu, system, start, order, r, centers, left, right) -> np.ndarray:
    order_idx = np.argsort(mu.points, kind="stable")
    pts = mu.points[order_idx]
    w = mu.masses[order_idx]
    ext = np.concatenate([pts - 1.0, pts, pts + 1.0])
    wext = np.concatenate([w, w, w])
    src = np.concatenate([pts, pts, pts])
    lo = np.searchsorted(ext, centers - left * 1.001, side="left")
    hi = np.searchsorted(ext, centers + right * 1.001, side="right")
    lens = hi - lo
    owner = np.repeat(np.arange(centers.shape[0]), lens)
    idx = np.repeat(lo - np.cumsum(np.r_[0, lens[:-1]]), lens) + np.arange(lens.sum())
    inside = bowen_dist(system, start, order, centers[owner], src[idx]) < r
    return np.bincount(owner, weights=wext[idx] * inside, minlength=centers.shape[0])


def bk_window(n2: int) -> tuple[int, int]:
    return max(4, n2 // 2), n2


def bk_local(mu: FiniteMeasure, system: MapSequence, x, eps: float,
             window: tuple[int, int], neutralized: bool = True, start: int = 1) -> float:
    """min over n in the window of -ln mu(B_n(x, r_n)) / n; INF for zero mass."""
    n1, n2 = window
    if not 1 <= n1 < n2:
        raise ArgumentError("window needs 1 <= n1 < n2")
    x = system.space.validate(x)
    vals = []
    for n in range(n1, n2 + 1):
        m = float(ball_masses(mu, system, n, eps, x[None], neutralized, start)[0])
        vals.append(INF if m <= 0 else -math.log(m) / n)
    return min(vals)


@dataclass(frozen=True)
class BKReport:
    eps: float
    window: tuple[int, int]
    value: float
    per_order: tuple[float, ...]   # mass-weighted average of -ln mu(B_n)/n at each n
    window_term: float             # spread of per-order averages across the window
    stderr: float                  # mass-weighted standard error of the local values

    def to_dict(self) -> dict:
        return {"eps": self.eps, "window": list(self.window), "value": self.value,
                "per_order": list(self.per_order), "window_term": self.window_term,
                "stderr": self.stderr}


def bk_entropy(mu: FiniteMeasure, system: MapSequence, eps: float, window: tuple[int, int],
               neutralized: bool = True, start: int = 1) -> BKReport:
    """Mass-weighted average over atoms of the local entropy surrogate."""
    n1, n2 = window
    if not 1 <= n1 < n2:
        raise ArgumentError("window needs 1 <= n1 < n2")
    table = []
    for n in range(n1, n2 + 1):
        m = ball_masses(mu, system, n, eps, mu.points, neutralized, start)
        with np.errstate(divide="ignore"):
            table.append(np.where(m > 0, -np.log(np.maximum(m, 1e-300)) / n, INF))
    table = np.array(table)
    local = table.min(axis=0)
    value = float(local @ mu.masses) if np.isfinite(local).all() else INF
    avgs = tuple(float(row @ mu.masses) for row in table)
    spread = max(avgs) - min(avgs)
    var = float(((local - value) ** 2) @ mu.masses) if math.isfinite(value) else INF
    stderr = math.sqrt(var / len(mu)) if math.isfinite(var) else INF
    return BKReport(eps, (n1, n2), value, avgs, spread, stderr)


# --------------------------------------------------------------------------
# Katok


def _covered_enough(mass: float, delta: float) -> bool:
    return mass - (1.0 - delta) > 1e-12


def katok_Lambda(instance: FiniteInstance, masses, alpha: float, delta: float) -> float:
    """Least cost of a subfamily whose union carries mass > 1 - delta.

    ``masses`` are the measure's atom masses aligned with the instance's
    ground points.  Exact search for at most 24 candidates or disjoint
    single-order candidates; otherwise a lazy greedy on mass per cost.
    """
    if not 0 < delta < 1:
        raise ArgumentError("delta must lie in (0, 1)")
    w = np.asarray(masses, dtype=float)
    mem = instance.membership
    cost = instance.costs(alpha)
    best_possible = float(w[mem.any(axis=0)].sum())
    if not _covered_enough(best_possible, delta):
        raise InstanceError("no subfamily reaches the required mass")
    orders = instance.costs_orders
    if len(instance.balls) <= 24:
        return _katok_exact(mem, w, cost, delta)
    if (mem.sum(axis=0) <= 1).all() and (orders == orders[0]).all():
        got = np.sort(mem.astype(float) @ w)[::-1]
        k = int(np.argmax(np.array([_covered_enough(v, delta) for v in np.cumsum(got)]))) + 1
        return k * float(cost[0])
    return _katok_greedy(instance, mem, w, cost, delta)


def _katok_exact(mem, w, cost, delta) -> float:
    nb = mem.shape[0]
    order = sorted(range(nb), key=lambda j: cost[j])
    best = [math.inf]

    def dfs(k, covered, total):
        if total >= best[0]:
            return
        if _covered_enough(float(w[covered].sum()), delta):
            best[0] = total
            return
        if k == nb:
            return
        rest = covered.copy()
        for j in order[k:]:
            rest |= mem[j]
        if not _covered_enough(float(w[rest].sum()), delta):
            return
        j = order[k]
        dfs(k + 1, covered | mem[j], total + cost[j])
        dfs(k + 1, covered, total)

    dfs(0, np.zeros(mem.shape[1], dtype=bool), 0.0)
    return best[0]


def _katok_greedy(instance, mem, w, cost, delta) -> float:
    rank = np.empty(mem.shape[0], dtype=np.int64)
    keys = sorted(range(mem.shape[0]), key=lambda j: (instance.balls[j].order,
                                                      tuple(np.ravel(instance.balls[j].center))))
    rank[keys] = np.arange(mem.shape[0])
    covered = np.zeros(mem.shape[1], dtype=bool)
    total = 0.0
    while not _covered_enough(float(w[covered].sum()), delta):
        gain = mem[:, ~covered].astype(float) @ w[~covered]
        ratio = gain / cost
        best = ratio.max()
        tied = np.nonzero(ratio == best)[0]
        j = int(tied[np.argmin(rank[tied])])
        covered |= mem[j]
        total += cost[j]
    return total


def atoms_needed(masses: np.ndarray, delta: float) -> int:
    """Fewest atoms whose combined mass exceeds 1 - delta."""
    csum = np.cumsum(np.sort(masses)[::-1])
    return next(i + 1 for i, v in enumerate(csum) if _covered_enough(v, delta) or i == len(csum) - 1)


def katok_count(system: MapSequence, mu: FiniteMeasure, order: int, eps: float, delta: float,
                neutralized: bool = True, start: int = 1, refine: float = 3.0,
                seed: int = 0) -> CountRow:
    """Lambda at alpha = 0 for one order: fewest balls capturing mass > 1 - delta.

    Once the count reaches the number of atoms needed on their own, every ball
    resolves single atoms and the count cannot grow with the order; such rows
    are flagged saturated (a measure with one needed atom is left alone).
    """
    row = _katok_row(system, mu, order, eps, delta, neutralized, start, refine, seed)
    need = atoms_needed(mu.masses, delta)
    if need > 1 and row.count >= need and not row.saturated:
        row = CountRow(row.order, row.count, row.method, row.fragmented, True)
    return row


def _katok_row(system, mu, order, eps, delta, neutralized, start, refine, seed) -> CountRow:
    space = system.space
    r = radius_for(order, eps, neutralized)
    check_scale(space, order, r)
    if isinstance(space, SymbolicShift):
        ell = cylinder_length(system, start, order, r)
        _, inv = np.unique(mu.points[:, :ell], axis=0, return_inverse=True)
        got = np.sort(np.bincount(inv.ravel(), weights=mu.masses))[::-1]
        csum = np.cumsum(got)
        k = next(i + 1 for i, v in enumerate(csum) if _covered_enough(v, delta) or i == len(csum) - 1)
        return CountRow(order, k, "cylinder", saturated=ell == 0)
    if isinstance(space, UnitInterval):
        if r >= space.diameter:
            return CountRow(order, 1, "arc", saturated=True)
        s = r / (refine * system.lipschitz_product(start, order - 1))
        pts = np.sort(mu.points)
        w = mu.masses[np.argsort(mu.points, kind="stable")]
        grid = np.unique(np.floor(np.concatenate([pts - r, pts, pts + r]) / s))
        centers = np.unique(np.mod(np.concatenate([grid, grid + 1]) * s, 1.0))
        left, right = arc_extents(system, start, order, r, centers)
        frag = fragmented(system, start, order, r, centers[:: max(1, len(centers) // 64)],
                          left[:: max(1, len(centers) // 64)],
                          right[:: max(1, len(centers) // 64)], seed=seed)
        ext = np.concatenate([pts - 1.0, pts, pts + 1.0])
        wext = np.concatenate([w, w, w])
        lo = np.searchsorted(ext, centers - left, side="right")
        hi = np.searchsorted(ext, centers + right, side="left")
        # an arc may hold an atom through two lifts; fold the lifted copies
        k = _range_greedy_lifted(lo, hi, wext, len(pts), delta)
        return CountRow(order, k, "arc", fragmented=frag)
    inst = FiniteInstance.build(system, mu.points,
                                candidate_balls(system, mu.points, order, order, eps,
                                                neutralized, start))
    return CountRow(order, round(katok_Lambda(inst, mu.masses, 0.0, delta)), "greedy",
                    saturated=r >= space.diameter)


def _range_greedy_lifted(lo, hi, wext, n, delta) -> int:
    free = wext[n: 2 * n].copy()
    got, k = 0.0, 0
    while not _covered_enough(got, delta):
        f3 = np.concatenate([free, free, free])
        pref = np.concatenate([[0.0], np.cumsum(f3)])
        gain = pref[hi] - pref[lo]
        j = int(np.argmax(gain))
        if gain[j] <= 0:
            raise InstanceError("no subfamily reaches the required mass")
        got += float(gain[j])
        idx = np.arange(lo[j], hi[j]) % n
        free[idx] = 0.0
        k += 1
    return k


@dataclass(frozen=True)
class KatokReport:
    eps: float
    by_delta: tuple[tuple[float, ExponentReport], ...]

    @property
    def value(self) -> ExponentReport:
        """Report at the smallest delta."""
        return min(self.by_delta, key=lambda p: p[0])[1]

    def trend(self) -> list[tuple[float, float]]:
        return sorted((d, r.alpha) for d, r in self.by_delta)


def katok_entropy(system: MapSequence, mu: FiniteMeasure, eps: float, deltas: Sequence[float],
                  n_schedule: Sequence[int], n_max: int, neutralized: bool = True,
                  seed: int = 0, bracket: tuple[float, float] = (0.0, 5.0)) -> KatokReport:
    if not deltas or not n_schedule:
        raise ArgumentError("schedules must be nonempty")
    if max(n_schedule) > n_max:
        raise ArgumentError("n schedule exceeds N_max")
    out = []
    for d in sorted(deltas, reverse=True):
        rows = [katok_count(system, mu, m, eps, d, neutralized, seed=seed)
                for m in sorted(set(n_schedule))]
        out.append((d, exponent_from_counts(rows, eps, f"Katok/{rows[0].method}", bracket)))
    return KatokReport(eps, tuple(out))
