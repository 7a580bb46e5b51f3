"""Covers by (neutralized) Bowen balls: nets, finite instances and solvers."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import (
    BallSpec,
    MapSequence,
    SymbolicShift,
    Torus,
    UnitInterval,
    arc_extents,
    ball_contains,
    bowen_dist,
    check_scale,
    cylinder_length,
    fragmented,
    radius_for,
)
from .errors import ArgumentError, ConfigurationError, InstanceError, SizeError

EXACT_LIMIT = 24
MAX_CENTERS = 20_000_000
CHUNK = 1_000_000
# net refinement for 1-D sweeps: abutting net arcs advance 2h - s, so a
# finer net keeps counts within 1/(2*refine) of the free-center optimum
SWEEP_REFINE = 12.0


@dataclass(frozen=True)
class CoverFamily:
    """Balls with weights; cost is sum_i c_i * exp(-alpha * n_i)."""

    elements: tuple[tuple[BallSpec, float], ...]
    alpha: float

    @property
    def cost(self) -> float:
        return math.fsum(w * math.exp(-self.alpha * b.order) for b, w in self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def balls(self) -> list[BallSpec]:
        return [b for b, _ in self.elements]


# --------------------------------------------------------------------------
# nets


def admissible_words(space: SymbolicShift, length: int) -> np.ndarray:
    """All admissible words of the given length, in lexicographic order."""
    words = np.zeros((1, 0), dtype=np.int64)
    for _ in range(length):
        n = words.shape[0]
        ext = np.concatenate(
            [np.repeat(words, space.k, axis=0),
             np.tile(np.arange(space.k), n)[:, None]], axis=1)
        ok = np.ones(ext.shape[0], dtype=bool)
        for block in space.forbidden:
            b = len(block)
            if ext.shape[1] >= b:
                ok &= ~np.all(ext[:, -b:] == np.asarray(block), axis=1)
        words = ext[ok]
    return words


def pad_words(space: SymbolicShift, words: np.ndarray) -> np.ndarray:
    out = np.zeros((words.shape[0], space.horizon), dtype=np.int64)
    out[:, : words.shape[1]] = words
    return out


def _ceil_tol(v: float) -> int:
    return int(math.ceil(v - 1e-9))


def build_net(space, r: float) -> np.ndarray:
    """Points such that every point of the space lies within r of one of them."""
    if not r > 0:
        raise ArgumentError("net radius must be positive")
    if isinstance(space, SymbolicShift):
        if r < math.exp(-space.horizon):
            raise ConfigurationError(f"net radius {r:.3g} below exp(-L)")
        length = max(0, _ceil_tol(-math.log(r)))
        words = admissible_words(space, length)
        padded = pad_words(space, words)
        # padding with 0 may create forbidden blocks in general shifts
        return padded[space.admissible(padded)] if space.forbidden else padded
    k = max(1, _ceil_tol(1.0 / r))
    grid = np.arange(k) / k
    if isinstance(space, UnitInterval):
        return grid
    mesh = np.meshgrid(*([grid] * space.dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def net_spacing(system: MapSequence, order: int, eps: float, neutralized: bool = True,
                start: int = 1, refine: float = 3.0) -> float:
    r = radius_for(order, eps, neutralized)
    return r / (refine * system.lipschitz_product(start, order - 1))


def candidate_balls(system: MapSequence, z_sample, n: int, n_max: int, eps: float,
                    neutralized: bool = True, start: int = 1,
                    refine: float = 3.0) -> list[BallSpec]:
    """Candidate balls of every order in [n, n_max] whose centers form a net.

    Continuous spaces use net spacing r / (refine * Lip), ``Lip`` the product
    of declared Lipschitz bounds over the first ``m - 1`` maps.  Centers farther
    than r from every sample point are dropped, since their balls cannot hold
    a sample point.  On symbolic spaces the candidates are the cylinders that
    meet the sample.
    """
    if n > n_max:
        raise ArgumentError("need n <= N_max")
    space = system.space
    z = space.validate(z_sample)
    if z.ndim == (0 if isinstance(space, UnitInterval) else 1):
        z = z[None]
    out = []
    for m in range(n, n_max + 1):
        r = radius_for(m, eps, neutralized)
        if isinstance(space, SymbolicShift):
            ell = cylinder_length(system, start, m, r)
            prefixes = np.unique(z[:, :ell], axis=0)
            centers = pad_words(space, prefixes)
            if space.forbidden:
                centers = np.array([_admissible_extension(space, p) for p in prefixes])
        else:
            s = net_spacing(system, m, eps, neutralized, start, refine)
            if s <= 0 or not np.isfinite(s):
                raise ConfigurationError("net spacing vanished")
            centers = build_net(space, s)
            if centers.shape[0] > 2_000_000:
                raise ConfigurationError(f"net of {centers.shape[0]} centers at order {m}")
            d = space.dist(centers[:, None], z[None]) if isinstance(space, UnitInterval) else \
                space.dist(centers[:, None, :], z[None, :, :])
            centers = centers[(d < r).any(axis=1)]
        out.extend(BallSpec(c, start, m, eps, neutralized) for c in centers)
    if not out:
        raise ConfigurationError("no candidate ball meets the sample")
    return out


def _admissible_extension(space: SymbolicShift, prefix: np.ndarray) -> np.ndarray:
    word = np.zeros(space.horizon, dtype=np.int64)
    word[: len(prefix)] = prefix
    for t in range(len(prefix), space.horizon):
        for sym in range(space.k):
            word[t] = sym
            if space.admissible(word[: t + 1]):
                break
        else:
            raise ConfigurationError("prefix has no admissible extension")
    return word


# --------------------------------------------------------------------------
# finite instances


@dataclass(frozen=True)
class FiniteInstance:
    """Ground points, candidate balls and their membership matrix (ball x point)."""

    system: MapSequence
    ground: np.ndarray = field(compare=False)
    balls: tuple[BallSpec, ...]
    membership: np.ndarray = field(compare=False)
    # common-prefix length per ball when every ball is a symbolic cylinder
    cylinders: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.membership.shape != (len(self.balls), self.ground.shape[0]):
            raise ArgumentError("membership matrix shape mismatch")
        if not self.membership.any(axis=0).all():
            miss = int(np.argmin(self.membership.any(axis=0)))
            raise InstanceError(f"ground point {miss} is not covered by any candidate")

    @classmethod
    def build(cls, system: MapSequence, ground, balls: Sequence[BallSpec]) -> "FiniteInstance":
        space = system.space
        ground = space.validate(ground)
        if isinstance(space, UnitInterval):
            ground = np.atleast_1d(ground)
        elif ground.ndim == 1:
            ground = ground[None]
        if not balls:
            raise InstanceError("no candidate balls")
        rows = [ball_contains(system, b, ground) for b in balls]
        membership = np.array(rows, dtype=bool).reshape(len(balls), ground.shape[0])
        cyl = None
        if isinstance(space, SymbolicShift):
            cyl = tuple(cylinder_length(system, b.start, b.order, b.radius) for b in balls)
            for b, ell, row in zip(balls, cyl, membership):
                same = np.all(ground[:, :ell] == np.asarray(b.center)[:ell], axis=1)
                if not np.array_equal(same, row):
                    cyl = None
                    break
        return cls(system, ground, tuple(balls), membership, cyl)

    @property
    def costs_orders(self) -> np.ndarray:
        return np.array([b.order for b in self.balls])

    def costs(self, alpha: float) -> np.ndarray:
        return np.exp(-alpha * self.costs_orders.astype(float))

    def restrict(self, points: np.ndarray) -> "FiniteInstance":
        """Same candidates, ground set reduced to the boolean/index selection."""
        g = self.ground[points]
        mem = self.membership[:, points]
        keep = mem.any(axis=1)
        cyl = None if self.cylinders is None else tuple(c for c, k in zip(self.cylinders, keep) if k)
        return FiniteInstance(self.system, g, tuple(b for b, k in zip(self.balls, keep) if k),
                              mem[keep], cyl)

    # text format -----------------------------------------------------------
    def to_text(self) -> str:
        lines = ["# neutral-entropy finite instance v1",
                 "system " + json.dumps(self.system.to_dict(), sort_keys=True)]
        g = self.ground.reshape(self.ground.shape[0], -1)
        lines.append(f"ground {g.shape[0]} {g.shape[1]}")
        lines += [" ".join(repr(v.item()) for v in row) for row in g]
        lines.append(f"balls {len(self.balls)}")
        for b in self.balls:
            c = np.ravel(b.center)
            lines.append(" ".join([str(b.order), str(b.start), repr(float(b.eps)), b.mode]
                                  + [repr(v.item()) for v in c]))
        lines.append("membership")
        lines += ["".join("1" if v else "0" for v in row) for row in self.membership]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "FiniteInstance":
        rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        it = iter(rows)
        head = next(it)
        if not head.startswith("system "):
            raise ArgumentError("instance text must start with a system line")
        system = MapSequence.from_dict(json.loads(head[len("system "):]))
        _, npts, dim = next(it).split()
        integer = isinstance(system.space, SymbolicShift)
        conv = int if integer else float
        pts = [[conv(v) for v in next(it).split()] for _ in range(int(npts))]
        ground = np.array(pts, dtype=np.int64 if integer else float)
        if isinstance(system.space, UnitInterval):
            ground = ground[:, 0]
        _, nb = next(it).split()
        balls = []
        for _ in range(int(nb)):
            parts = next(it).split()
            center = np.array([conv(v) for v in parts[4:]])
            if isinstance(system.space, UnitInterval):
                center = center[0]
            balls.append(BallSpec(center, int(parts[1]), int(parts[0]), float(parts[2]),
                                  parts[3] == "neutralized"))
        if next(it) != "membership":
            raise ArgumentError("missing membership section")
        mem = np.array([[c == "1" for c in next(it)] for _ in balls], dtype=bool)
        inst = cls.build(system, ground, balls)
        if not np.array_equal(inst.membership, mem.reshape(inst.membership.shape)):
            raise ArgumentError("stored membership disagrees with recomputed membership")
        return inst


def _center_key(b: BallSpec) -> tuple:
    return tuple(np.ravel(b.center).tolist())


# --------------------------------------------------------------------------
# solvers


def greedy_cover(instance: FiniteInstance, alpha: float) -> CoverFamily:
    """Repeatedly take the ball with least cost per newly covered point.

    Ties go to the lower order, then the lexicographically smaller center.
    """
    mem = instance.membership
    cost = instance.costs(alpha)
    order = np.array([b.order for b in instance.balls])
    rank = np.empty(len(instance.balls), dtype=np.int64)
    rank[sorted(range(len(instance.balls)),
                key=lambda j: (order[j], _center_key(instance.balls[j])))] = np.arange(len(rank))
    uncovered = np.ones(mem.shape[1], dtype=bool)
    chosen = []
    while uncovered.any():
        gain = (mem & uncovered).sum(axis=1)
        with np.errstate(divide="ignore"):
            ratio = np.where(gain > 0, cost / np.maximum(gain, 1), np.inf)
        best = ratio.min()
        tied = np.nonzero(ratio == best)[0]
        j = int(tied[np.argmin(rank[tied])])
        chosen.append(j)
        uncovered &= ~mem[j]
    chosen.sort(key=lambda j: rank[j])
    return CoverFamily(tuple((instance.balls[j], 1.0) for j in chosen), alpha)


def exact_min_cover(instance: FiniteInstance, alpha: float) -> CoverFamily:
    """Minimum-cost subfamily covering the ground set.

    Cylinder instances are solved by dynamic programming over the prefix
    tree; anything else by branch and bound once dominated candidates are
    dropped, limited to ``EXACT_LIMIT`` remaining candidates.
    """
    if instance.cylinders is not None:
        chosen = _laminar_cover(instance, alpha)
    else:
        cost = instance.costs(alpha)
        keep = _undominated(instance.membership, cost)
        if len(keep) > EXACT_LIMIT:
            raise SizeError(f"{len(keep)} undominated candidates exceed the exact limit "
                            f"{EXACT_LIMIT}")
        sub = _branch_and_bound(instance.membership[keep], cost[keep])
        chosen = [int(keep[j]) for j in sub]
    chosen = sorted(chosen, key=lambda j: (instance.balls[j].order, _center_key(instance.balls[j])))
    return CoverFamily(tuple((instance.balls[j], 1.0) for j in chosen), alpha)


def _undominated(mem: np.ndarray, cost: np.ndarray) -> np.ndarray:
    """Candidates not dominated by a cheaper (or equally cheap, earlier) one
    whose point set contains theirs; some optimal cover uses only these."""
    order = np.lexsort((np.arange(len(cost)), cost))
    kept: list[int] = []
    for j in order:
        pts = mem[j]
        if kept and np.any(np.all(mem[kept][:, pts], axis=1)):
            continue
        kept.append(int(j))
    return np.array(sorted(kept), dtype=np.int64)


def _branch_and_bound(mem: np.ndarray, cost: np.ndarray) -> list[int]:
    nb, npts = mem.shape
    masks = [int("".join("1" if v else "0" for v in row[::-1]) or "0", 2) for row in mem]
    full = (1 << npts) - 1
    covering = [[j for j in range(nb) if masks[j] >> p & 1] for p in range(npts)]
    for lst in covering:
        lst.sort(key=lambda j: (cost[j], j))
    best = [math.inf, None]

    def search(covered: int, total: float, picked: list[int]):
        if total >= best[0]:
            return
        if covered == full:
            best[0], best[1] = total, list(picked)
            return
        free = ~covered & full
        p = (free & -free).bit_length() - 1
        for j in covering[p]:
            picked.append(j)
            search(covered | masks[j], total + cost[j], picked)
            picked.pop()

    search(0, 0.0, [])
    if best[1] is None:
        raise InstanceError("instance has no cover")
    return best[1]


def _laminar_cover(instance: FiniteInstance, alpha: float) -> list[int]:
    cost = instance.costs(alpha)
    lengths = sorted(set(instance.cylinders))
    g = instance.ground
    # cheapest candidate per (length, prefix)
    cheapest: dict[tuple[int, tuple], int] = {}
    for j, (b, ell) in enumerate(zip(instance.balls, instance.cylinders)):
        key = (ell, tuple(np.asarray(b.center)[:ell].tolist()))
        if key not in cheapest or cost[j] < cost[cheapest[key]]:
            cheapest[key] = j
    # value[prefix] at each level, bottom-up
    value: dict[tuple, tuple[float, list[int]]] = {}
    prefixes_at = {ell: sorted({tuple(row[:ell].tolist()) for row in g}) for ell in lengths}
    for depth, ell in reversed(list(enumerate(lengths))):
        for p in prefixes_at[ell]:
            own = cheapest.get((ell, p))
            own_val = (cost[own], [own]) if own is not None else (math.inf, [])
            if depth + 1 < len(lengths):
                nxt = lengths[depth + 1]
                kids = [value[q] for q in prefixes_at[nxt] if q[:ell] == p]
                split = (math.fsum(k[0] for k in kids), [j for k in kids for j in k[1]])
            else:
                split = (math.inf, [])
            value[p] = own_val if own_val[0] <= split[0] else split
    top = [value[p] for p in prefixes_at[lengths[0]]]
    total = math.fsum(v[0] for v in top)
    if not math.isfinite(total):
        raise InstanceError("instance has no cover")
    return [j for v in top for j in v[1]]


def cover_is_valid(instance: FiniteInstance, family: CoverFamily) -> bool:
    idx = {id(b): j for j, b in enumerate(instance.balls)}
    rows = [instance.membership[idx[id(b)]] for b in family.balls]
    return bool(np.logical_or.reduce(rows, axis=0).all()) if rows else False


# --------------------------------------------------------------------------
# Vitali selection


def vitali_select(system: MapSequence, balls: Sequence[BallSpec]) -> list[int]:
    """Indices J of a 5r-Vitali subfamily of equal-radius Bowen balls.

    ``I(i)`` is taken as the indices whose centers lie within 2r of ball i in
    the Bowen metric (a superset of the balls actually meeting ball i).  Balls
    are scanned in input order and kept when their family is disjoint from
    every kept family, which forces any dropped center within 4r of a kept
    one.
    """
    if not balls:
        raise ArgumentError("need at least one ball")
    b0 = balls[0]
    for b in balls:
        if (b.start, b.order) != (b0.start, b0.order) or b.radius != b0.radius:
            raise ArgumentError("vitali_select needs identical radius, order and start")
    r = b0.radius
    centers = np.stack([np.asarray(b.center) for b in balls])
    if isinstance(system.space, UnitInterval):
        d = bowen_dist(system, b0.start, b0.order, centers[:, None], centers[None, :])
    else:
        d = bowen_dist(system, b0.start, b0.order, centers[:, None, :], centers[None, :, :])
    near = d < 2 * r
    taken = np.zeros(len(balls), dtype=bool)  # union of kept families
    selected = []
    for i in range(len(balls)):
        if not (near[i] & taken).any():
            selected.append(i)
            taken |= near[i]
    return selected


def vitali_families_disjoint(system: MapSequence, balls: Sequence[BallSpec], selected) -> bool:
    b0 = balls[0]
    centers = np.stack([np.asarray(b.center) for b in balls])
    sel = centers[list(selected)]
    if isinstance(system.space, UnitInterval):
        d = bowen_dist(system, b0.start, b0.order, sel[:, None], centers[None, :])
    else:
        d = bowen_dist(system, b0.start, b0.order, sel[:, None, :], centers[None, :, :])
    near = d < 2 * b0.radius
    return bool((near.sum(axis=0) <= 1).all())


def vitali_containment(system: MapSequence, balls: Sequence[BallSpec], selected, probes) -> bool:
    """Every probe inside some input ball lies within 5r of a selected center."""
    b0 = balls[0]
    space = system.space
    probes = space.validate(probes)
    inside = np.zeros(probes.shape[0], dtype=bool)
    for b in balls:
        inside |= ball_contains(system, b, probes)
    big = np.zeros_like(inside)
    for j in selected:
        bj = balls[j]
        big |= bowen_dist(system, bj.start, bj.order, bj.center, probes) < 5 * bj.radius
    return bool(np.all(big[inside]))


# --------------------------------------------------------------------------
# 1-D sweep


@dataclass(frozen=True)
class SweepCover:
    order: int
    count: int
    centers: np.ndarray = field(compare=False)
    fragmented: bool
    saturated: bool


def sweep_cover(system: MapSequence, z: tuple[float, float], order: int, eps: float,
                neutralized: bool = True, start: int = 1, refine: float = SWEEP_REFINE,
                seed: int = 0) -> SweepCover:
    """Fewest net-centered central arcs covering the interval ``z = [a, b)``.

    Interval-cover greedy: from the leftmost uncovered point take the arc
    containing it that reaches farthest right.  This is optimal for the
    candidate arcs; the true balls may be larger than their central arcs,
    so the count is an upper bound for the restricted family, and
    ``fragmented`` reports whether probing found ball pieces outside the
    arcs.  ``saturated`` marks radii at or above the space diameter.
    """
    if not isinstance(system.space, UnitInterval):
        raise ArgumentError("sweep covers need the unit interval")
    a, b = z
    if not 0 <= a < b <= 1:
        raise ArgumentError("Z must be a sub-interval [a, b) of [0, 1)")
    r = radius_for(order, eps, neutralized)
    check_scale(system.space, order, r)
    # centers only matter within one arc reach of Z; estimate the reach on a
    # coarse probe grid.  A short pad only loosens the bound, never breaks
    # coverage, since every chosen arc is checked to extend the sweep.
    probe = np.mod(a + (b - a) * np.arange(257) / 256, 1.0)
    pl, pr = arc_extents(system, start, order, r, probe)
    frag = fragmented(system, start, order, r, probe, pl, pr, seed=seed)
    if frag:
        # excluded from exponent fits anyway; a coarse net suffices
        refine = min(refine, 3.0)
    s = net_spacing(system, order, eps, neutralized, start, refine)
    reach = float(np.quantile(np.maximum(pl, pr), 0.9))
    pad = min(r, 4.0 * reach + 2 * s)
    lo, hi = a - pad, b + pad
    count = math.ceil(hi / s) - math.floor(lo / s) + 1
    if count > MAX_CENTERS:
        raise ConfigurationError(f"{count} net centers at order {order} exceed {MAX_CENTERS}")
    centers = np.unique(np.mod(np.arange(math.floor(lo / s), math.ceil(hi / s) + 1) * s, 1.0))
    parts = [arc_extents(system, start, order, r, centers[k: k + CHUNK])
             for k in range(0, len(centers), CHUNK)]
    left = np.concatenate([p[0] for p in parts])
    right = np.concatenate([p[1] for p in parts])
    # lift arcs next to Z: a center c may serve Z from c-1, c or c+1
    lifts = []
    for shift in (-1.0, 0.0, 1.0):
        L = centers + shift - left
        R = centers + shift + right
        keep = (R > a) & (L < b)
        lifts.append((L[keep], R[keep], centers[keep]))
    L = np.concatenate([x[0] for x in lifts])
    R = np.concatenate([x[1] for x in lifts])
    C = np.concatenate([x[2] for x in lifts])
    o = np.argsort(L, kind="stable")
    L, R, C = L[o], R[o], C[o]
    best = np.maximum.accumulate(R)
    # arg[k]: index of an arc attaining the running maximum best[k]
    arg = np.maximum.accumulate(np.where(R == best, np.arange(len(R)), 0))
    tol = 1e-6 * float(np.min(right)) if len(right) else 0.0

    def first(p: float) -> tuple[int, float]:
        """Arc reaching farthest right among those holding p; arcs whose left
        end sits within tol of p are admitted after an exact membership test,
        which matters where a map is discontinuous."""
        j = int(np.searchsorted(L, p, side="left")) - 1
        k, reach = (int(arg[j]), float(best[j])) if j >= 0 else (-1, p)
        near = np.arange(j + 1, int(np.searchsorted(L, p + tol, side="left")))
        if near.size:
            inside = np.atleast_1d(bowen_dist(system, start, order, C[near], np.mod(p, 1.0)) < r)
            for q in near[inside]:
                if R[q] > reach:
                    k, reach = int(q), float(R[q])
        return k, reach

    def run(p: float, end: float, exact_start: bool) -> list[float]:
        out = []
        while p < end - tol:
            if exact_start and not out:
                k, nxt = first(p)
            else:
                j = int(np.searchsorted(L, p, side="left")) - 1
                k, nxt = (int(arg[j]), float(best[j])) if j >= 0 else (-1, p)
            if k < 0 or nxt <= p:
                raise InstanceError(f"arcs leave a gap at {p!r}")
            out.append(C[k])
            p = nxt
        return out

    chosen = run(a, b, True)
    if a == 0.0 and b == 1.0:
        # on the full circle the first arc need not start the sweep at 0:
        # try each arc through 0 and close the loop at its left end + 1
        through = np.nonzero((L < 0.0) & (R > 0.0))[0]
        if through.size > 256:
            through = through[np.linspace(0, through.size - 1, 256).astype(int)]
        for k in through:
            trial = [C[k]] + run(R[k], L[k] + 1.0, False)
            if len(trial) < len(chosen):
                chosen = trial
    if not frag:
        idx = np.linspace(0, len(centers) - 1, min(64, len(centers))).astype(int)
        frag = fragmented(system, start, order, r, centers[idx], left[idx], right[idx], seed=seed)
    return SweepCover(order, len(chosen), np.array(chosen), frag, r >= system.space.diameter)
