"""Spaces, map sequences, Bowen metrics and (neutralized) Bowen balls.

Points are numpy arrays.  A single point of the unit interval is a 0-d float
array, a torus point has shape ``(dim,)`` and a symbolic point is an integer
word of shape ``(L,)``.  Every routine broadcasts over leading axes, so a
batch of ``N`` points simply carries one extra leading dimension.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import ArgumentError, ConfigurationError, DomainError

# --------------------------------------------------------------------------
# spaces


@dataclass(frozen=True)
class UnitInterval:
    """[0, 1) with the wraparound distance."""

    kind = "interval"
    diameter = 0.5
    dim = 1

    def validate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not np.all((x >= 0.0) & (x < 1.0)):
            raise DomainError("interval points must lie in [0, 1)")
        return x

    def dist(self, x, y) -> np.ndarray:
        g = np.abs(np.asarray(x, float) - np.asarray(y, float))
        return np.minimum(g, 1.0 - g)

    def descriptor(self) -> str:
        return "interval"


@dataclass(frozen=True)
class Torus:
    dim: int

    kind = "torus"
    diameter = 0.5

    def __post_init__(self):
        if self.dim < 1:
            raise ArgumentError("torus dimension must be positive")

    def validate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise DomainError(f"torus points need trailing axis of length {self.dim}")
        if not np.all((x >= 0.0) & (x < 1.0)):
            raise DomainError("torus coordinates must lie in [0, 1)")
        return x

    def dist(self, x, y) -> np.ndarray:
        g = np.abs(np.asarray(x, float) - np.asarray(y, float))
        return np.minimum(g, 1.0 - g).max(axis=-1)

    def descriptor(self) -> str:
        return f"torus:{self.dim}"


@dataclass(frozen=True)
class SymbolicShift:
    """Words of length ``horizon`` over ``{0..k-1}`` avoiding ``forbidden`` blocks.

    ``d(x, y) = exp(-t)`` with ``t`` the 0-based index of the first mismatch.
    """

    k: int
    horizon: int
    forbidden: tuple[tuple[int, ...], ...] = ()

    kind = "shift"
    diameter = 1.0

    def __post_init__(self):
        if self.k < 2 or self.horizon < 1:
            raise ArgumentError("shift needs k >= 2 and horizon >= 1")
        for w in self.forbidden:
            if not w or any(not 0 <= s < self.k for s in w):
                raise ArgumentError(f"bad forbidden word {w}")

    @property
    def dim(self) -> int:
        return self.horizon

    def admissible(self, words) -> np.ndarray:
        w = np.asarray(words)
        ok = np.ones(w.shape[:-1], dtype=bool)
        L = w.shape[-1]
        for block in self.forbidden:
            b = len(block)
            for s in range(L - b + 1):
                hit = np.ones(w.shape[:-1], dtype=bool)
                for t, sym in enumerate(block):
                    hit &= w[..., s + t] == sym
                ok &= ~hit
        return ok

    def validate(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[-1:] != (self.horizon,):
            raise DomainError(f"symbolic points are words of length {self.horizon}")
        if not np.issubdtype(x.dtype, np.integer):
            if not np.all(np.equal(np.mod(x, 1), 0)):
                raise DomainError("symbols must be integers")
            x = x.astype(np.int64)
        if np.any((x < 0) | (x >= self.k)):
            raise DomainError(f"symbols must lie in 0..{self.k - 1}")
        if not np.all(self.admissible(x)):
            raise DomainError("word contains a forbidden block")
        return x

    def dist(self, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x), np.asarray(y))
        diff = x != y
        any_diff = diff.any(axis=-1)
        t = np.argmax(diff, axis=-1)
        return np.where(any_diff, np.exp(-t.astype(float)), 0.0)

    def descriptor(self) -> str:
        s = f"shift:k={self.k},L={self.horizon}"
        if self.forbidden:
            s += ",forbid=" + "/".join("".join(map(str, w)) for w in self.forbidden)
        return s


Space = UnitInterval | Torus | SymbolicShift


def parse_space(text: str) -> Space:
    text = text.strip()
    if text == "interval":
        return UnitInterval()
    if text.startswith("torus:"):
        return Torus(int(text.split(":", 1)[1]))
    if text.startswith("shift:"):
        params = _kv(text.split(":", 1)[1])
        forbid = ()
        if "forbid" in params:
            forbid = tuple(tuple(int(c) for c in w) for w in params["forbid"].split("/") if w)
        return SymbolicShift(int(params["k"]), int(params["L"]), forbid)
    raise ArgumentError(f"unknown space descriptor {text!r}")


def _kv(body: str) -> dict[str, str]:
    out = {}
    for part in body.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ArgumentError(f"expected key=value, got {part!r}")
        key, val = part.split("=", 1)
        out[key.strip()] = val.strip()
    return out


# --------------------------------------------------------------------------
# maps


@dataclass(frozen=True)
class Affine:
    """x -> a*x + b mod 1, coordinate-wise, integer a >= 1."""

    a: tuple[int, ...] = (2,)
    b: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        if any(int(v) != v or v < 1 for v in self.a):
            raise ArgumentError("affine multipliers must be integers >= 1")

    def __call__(self, x):
        if len(self.a) == 1:
            return np.mod(self.a[0] * x + self.b[0], 1.0)
        # one multiplier per torus coordinate, broadcast along the last axis
        return np.mod(np.asarray(self.a, float) * x + np.asarray(self.b, float), 1.0)

    @property
    def lipschitz(self) -> float:
        return float(max(self.a))

    def descriptor(self) -> str:
        a = "/".join(str(int(v)) for v in self.a)
        b = "/".join(repr(float(v)) for v in self.b)
        return f"affine:a={a},b={b}"


@dataclass(frozen=True)
class Scale:
    """x -> c*x on [0, 1) with 0 < c <= 1."""

    c: float = 0.5

    def __post_init__(self):
        if not 0 < self.c <= 1:
            raise ArgumentError("scale factor must lie in (0, 1]")

    def __call__(self, x):
        return self.c * x

    # the wraparound metric is not scaled uniformly by c, so no contraction
    # bound is claimed
    lipschitz = 1.0

    def descriptor(self) -> str:
        return f"scale:c={self.c!r}"


@dataclass(frozen=True)
class Tent:
    def __call__(self, x):
        return np.mod(1.0 - np.abs(2.0 * x - 1.0), 1.0)

    lipschitz = 2.0

    def descriptor(self) -> str:
        return "tent"


@dataclass(frozen=True)
class Logistic:
    r: float = 3.7

    def __post_init__(self):
        if not 0 < self.r < 4:
            raise ArgumentError("logistic parameter must lie in (0, 4)")

    def __call__(self, x):
        return self.r * x * (1.0 - x)

    @property
    def lipschitz(self) -> float:
        return float(self.r)

    def descriptor(self) -> str:
        return f"logistic:r={self.r!r}"


@dataclass(frozen=True)
class Shift:
    """Left shift on horizon-truncated words; the vacated slot is filled with 0."""

    def __call__(self, x):
        out = np.empty_like(x)
        out[..., :-1] = x[..., 1:]
        out[..., -1] = 0
        return out

    lipschitz = math.e

    def descriptor(self) -> str:
        return "shift"


Map = Affine | Scale | Tent | Logistic | Shift


def parse_map(text: str) -> Map:
    text = text.strip()
    name, _, body = text.partition(":")
    params = _kv(body)
    if name == "affine":
        a = tuple(int(v) for v in params.get("a", "2").split("/"))
        b = tuple(float(v) for v in params.get("b", "0").split("/"))
        if len(b) == 1 and len(a) > 1:
            b = b * len(a)
        return Affine(a, b)
    if name == "identity":
        return Affine((1,), (0.0,))
    if name == "scale":
        return Scale(float(params.get("c", "0.5")))
    if name == "tent":
        return Tent()
    if name == "logistic":
        return Logistic(float(params.get("r", "3.7")))
    if name == "shift":
        return Shift()
    raise ArgumentError(f"unknown map descriptor {text!r}")


def _map_fits(space: Space, m: Map) -> bool:
    if isinstance(space, SymbolicShift):
        return isinstance(m, Shift)
    if isinstance(m, Shift):
        return False
    if isinstance(m, Affine):
        return len(m.a) in (1, space.dim)
    if isinstance(space, Torus) and space.dim > 1:
        return False
    return True


# --------------------------------------------------------------------------
# map sequences


RULES = ("autonomous", "periodic", "switched")


@dataclass(frozen=True)
class MapSequence:
    """A rule producing the maps f_1, f_2, ... of a non-autonomous system.

    ``autonomous`` repeats ``maps[0]``, ``periodic`` cycles through ``maps``
    and ``switched`` draws ``f_n`` from ``maps`` with ``weights`` using a
    generator seeded by ``(seed, n)``, so each index is reproducible on its
    own.
    """

    space: Space
    maps: tuple[Map, ...]
    rule: str = "autonomous"
    seed: int = 0
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        if self.rule not in RULES:
            raise ArgumentError(f"rule must be one of {RULES}")
        if not self.maps:
            raise ArgumentError("at least one map is required")
        for m in self.maps:
            if not _map_fits(self.space, m):
                raise ArgumentError(f"{m.descriptor()} does not act on {self.space.descriptor()}")
        if self.rule == "switched":
            w = self.weights or tuple([1.0 / len(self.maps)] * len(self.maps))
            if len(w) != len(self.maps) or min(w) < 0 or abs(sum(w) - 1) > 1e-12:
                raise ArgumentError("switched weights must be a probability vector over maps")
            object.__setattr__(self, "weights", tuple(float(v) for v in w))

    def map_at(self, n: int) -> Map:
        """The map f_n (1-based)."""
        if n < 1:
            raise ArgumentError("map indices start at 1")
        if self.rule == "autonomous":
            return self.maps[0]
        if self.rule == "periodic":
            return self.maps[(n - 1) % len(self.maps)]
        rng = np.random.default_rng([self.seed, n])
        return self.maps[int(rng.choice(len(self.maps), p=self.weights))]

    def lipschitz_product(self, i: int, count: int) -> float:
        """Product of declared Lipschitz bounds of f_i, ..., f_{i+count-1}."""
        out = 1.0
        for j in range(count):
            out *= self.map_at(i + j).lipschitz
        return out

    @cached_property
    def connected_balls(self) -> bool:
        """True when Bowen balls are known to be arcs around their centers."""
        if not isinstance(self.space, UnitInterval):
            return False
        return all(isinstance(m, (Affine, Scale)) for m in self.maps)

    def to_dict(self) -> dict:
        d = {
            "space": self.space.descriptor(),
            "rule": self.rule,
            "maps": [m.descriptor() for m in self.maps],
        }
        if self.rule == "switched":
            d["seed"] = self.seed
            d["weights"] = list(self.weights)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MapSequence":
        return cls(
            space=parse_space(d["space"]),
            maps=tuple(parse_map(m) for m in d["maps"]),
            rule=d.get("rule", "autonomous"),
            seed=int(d.get("seed", 0)),
            weights=tuple(float(w) for w in d.get("weights", ())),
        )


def autonomous(space: Space, m: Map) -> MapSequence:
    return MapSequence(space, (m,), "autonomous")


def periodic(space: Space, maps: Sequence[Map]) -> MapSequence:
    return MapSequence(space, tuple(maps), "periodic")


# --------------------------------------------------------------------------
# balls


@dataclass(frozen=True)
class BallSpec:
    """B(center; start, order, r) with r = exp(-order*eps) when neutralized."""

    center: np.ndarray = field(compare=False)
    start: int
    order: int
    eps: float
    neutralized: bool = True

    def __post_init__(self):
        if self.start < 1 or self.order < 1:
            raise ArgumentError("start index and order must be positive")
        if not self.eps > 0:
            raise ArgumentError("eps must be positive")

    @property
    def radius(self) -> float:
        if self.neutralized:
            return math.exp(-self.order * self.eps)
        return self.eps

    @property
    def mode(self) -> str:
        return "neutralized" if self.neutralized else "fixed"

    def key(self) -> tuple:
        return (self.order, tuple(np.ravel(self.center).tolist()))


def radius_for(order: int, eps: float, neutralized: bool = True) -> float:
    return math.exp(-order * eps) if neutralized else eps


# --------------------------------------------------------------------------
# operations


def compose(system: MapSequence, i: int, n: int, x) -> np.ndarray:
    """f_i^n(x) = f_{i+n-1} o ... o f_i (x); n = 0 is the identity."""
    if i < 1:
        raise ArgumentError("start index must be >= 1")
    if n < 0:
        raise ArgumentError("n must be nonnegative")
    x = system.space.validate(x)
    for j in range(n):
        x = system.map_at(i + j)(x)
    return x


def bowen_dist(system: MapSequence, i: int, n: int, x, y) -> np.ndarray:
    """d_{i,n}(x, y) = max_{0<=j<n} d(f_i^j x, f_i^j y)."""
    if n < 1:
        raise ArgumentError("Bowen metric needs n >= 1")
    if i < 1:
        raise ArgumentError("start index must be >= 1")
    space = system.space
    x = space.validate(x)
    y = space.validate(y)
    out = space.dist(x, y)
    for j in range(1, n):
        f = system.map_at(i + j - 1)
        x, y = f(x), f(y)
        out = np.maximum(out, space.dist(x, y))
    return out


def ball_contains(system: MapSequence, ball: BallSpec, y) -> np.ndarray:
    """Strict membership d_{i,n}(center, y) < r, no tolerance."""
    return bowen_dist(system, ball.start, ball.order, ball.center, y) < ball.radius


def check_scale(space: Space, order: int, radius: float) -> None:
    """Reject scales finer than a symbolic horizon can resolve."""
    if isinstance(space, SymbolicShift):
        floor = math.exp(-(space.horizon - order))
        if radius < floor:
            raise ConfigurationError(
                f"radius {radius:.3g} at order {order} is below exp(-(L-n)) = {floor:.3g}; "
                f"raise the horizon L={space.horizon}"
            )


def cylinder_length(system: MapSequence, i: int, n: int, radius: float) -> int:
    """Common-prefix length equivalent to membership in a symbolic Bowen ball.

    Found by probing the metric itself with words that first differ at
    position t, so it follows whatever distance and map the system uses.
    """
    space = system.space
    if not isinstance(space, SymbolicShift):
        raise ArgumentError("cylinder_length needs a symbolic space")
    check_scale(space, n, radius)
    L = space.horizon
    x = np.zeros(L, dtype=np.int64)
    ys = np.zeros((L, L), dtype=np.int64)
    ys[np.arange(L), np.arange(L)] = 1
    d = np.empty(L)
    for t in range(L):
        # the probe words need not be admissible; only distances are read
        xx, yy = x, ys[t]
        dt = space.dist(xx, yy)
        for j in range(1, n):
            f = system.map_at(i + j - 1)
            xx, yy = f(xx), f(yy)
            dt = max(dt, space.dist(xx, yy))
        d[t] = dt
    inside = d < radius
    # membership must be monotone in t: agreeing longer never hurts
    for t in range(L):
        if inside[t:].all():
            return t
    return L


def arc_extents(system: MapSequence, i: int, n: int, radius: float, centers,
                iters: int = 22) -> tuple[np.ndarray, np.ndarray]:
    """Left and right reach of the ball component around each 1-D center.

    Returns ``(left, right)``: every offset ``s`` with ``-left < s < right``
    keeps ``c + s`` inside the ball, up to the bisection resolution.  The
    search climbs a ladder of ratio sqrt(2) from a member offset until the
    first non-member, so a ball that is not connected is cut back to its
    central component (up to the ladder spacing); ``iters`` log-scale
    bisection steps then refine the reach.  The ladder starts just below
    ``r / Lip`` (product of the declared Lipschitz bounds), where expanding
    maps place the boundary.
    """
    space = system.space
    if not isinstance(space, UnitInterval):
        raise ArgumentError("arc extents are defined on the unit interval only")
    c = space.validate(centers)
    maps = [system.map_at(i + j) for j in range(n - 1)]
    orbit = [c]
    for f in maps:
        orbit.append(f(orbit[-1]))
    top = math.log(min(radius, 0.5))
    floor = top - 60 * math.log(2)
    guess = max(floor, min(top, math.log(radius / system.lipschitz_product(i, n - 1)) - math.log(2)))
    step = 0.5 * math.log(2)
    h0 = radius / system.lipschitz_product(i, n - 1)

    def member(off, idx=None):
        ok = None
        for f_j, cj in zip([None] + maps, orbit):
            if idx is not None:
                cj = cj[idx]
            y = np.mod(cj + off, 1.0) if f_j is None else f_j(y)
            d = space.dist(cj, y) < radius
            ok = d if ok is None else ok & d
        return ok

    out = []
    for sign in (-1.0, 1.0):
        lo = np.full(c.shape, guess)
        bad = ~member(sign * np.exp(lo))
        lo[bad] = floor
        hi = np.full(c.shape, np.inf)
        open_ = np.ones(c.shape, dtype=bool)
        while open_.any():
            idx = np.nonzero(open_)
            rung = np.minimum(lo[idx] + step, top)
            ok = member(sign * np.exp(rung), idx)
            at_top = rung >= top
            lo[idx] = np.where(ok, rung, lo[idx])
            hi[idx] = np.where(ok, np.where(at_top, rung, np.inf), rung)
            open_[idx] = ok & ~at_top
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            ok = member(sign * np.exp(mid))
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        reach = np.exp(lo)
        # A reach far beyond the Lipschitz scale h0 can come from the ladder
        # stepping over holes of a disconnected ball.  Rescan those centers
        # linearly from 0 in steps of h0/4 and cap the arc at 16 h0; a shorter
        # arc stays inside the ball, so covers built from it remain valid.
        sus = np.nonzero(reach > SCAN_TRIGGER * h0)[0]
        if sus.size:
            reach[sus] = _linear_reach(member, sign, h0, sus, iters)
        out.append(reach)
    return out[0], out[1]


SCAN_TRIGGER = 4.0
SCAN_STEPS = 64


def _linear_reach(member, sign, h0, idx, iters):
    dx = h0 / 4
    lo = np.full(idx.size, SCAN_STEPS * dx)
    hi = np.full(idx.size, np.inf)
    open_ = np.ones(idx.size, dtype=bool)
    for k in range(1, SCAN_STEPS + 1):
        if not open_.any():
            break
        sub = idx[open_]
        ok = member(np.full(sub.size, sign * k * dx), sub)
        where = np.nonzero(open_)[0]
        failed = where[~ok]
        lo[failed] = (k - 1) * dx
        hi[failed] = k * dx
        open_[failed] = False
    cut = np.isfinite(hi)
    if cut.any():
        sub = idx[cut]
        a, b = lo[cut], hi[cut]
        for _ in range(iters):
            mid = 0.5 * (a + b)
            ok = member(sign * mid, sub)
            a = np.where(ok, mid, a)
            b = np.where(ok, b, mid)
        lo[cut] = a
    return np.maximum(lo, 0.0)


def fragmented(system: MapSequence, i: int, n: int, radius: float, centers, left, right,
               probes: int = 256, seed: int = 0) -> bool:
    """True if some sampled point outside the central arcs still lies in a ball.

    Offsets are drawn between each reach and ``min(r, 1/2)``; a hit means the
    central component underestimates the ball at this order.
    """
    c = system.space.validate(centers)
    top = min(radius, 0.5)
    rng = np.random.default_rng(seed)
    for sign, reach in ((-1.0, left), (1.0, right)):
        # start past the bisection uncertainty band around each reach
        start = reach * (1.0 + 1e-4)
        gap = top - start
        keep = gap > 0
        if not keep.any():
            continue
        cc, ss, gg = c[keep], start[keep], gap[keep]
        u = rng.random((probes, cc.size))
        off = ss + u * gg
        y = np.mod(cc + sign * off, 1.0)
        if np.any(bowen_dist(system, i, n, np.broadcast_to(cc, y.shape), y) < radius):
            return True
    return False
