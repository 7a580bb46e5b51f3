"""Example systems whose neutralized entropy can be derived by hand.

Each entry carries a reference exponent together with an executable counting
oracle that does not touch the covering machinery: interval systems count
arcs of the known Bowen-ball width, symbolic systems count admissible words
with a transfer matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import (
    Affine,
    Logistic,
    MapSequence,
    Scale,
    Shift,
    SymbolicShift,
    UnitInterval,
    autonomous,
    periodic,
)
from .errors import UnknownEntryError
from .estimators import TargetSet

HORIZON = 40
GOLDEN = (1 + math.sqrt(5)) / 2
PROBE_TARGET = 60_000


@dataclass(frozen=True)
class ZooEntry:
    name: str
    system: MapSequence
    reference: Callable[[float], float] | None
    provenance: str
    lipschitz: tuple[float, ...]
    # ball derivative factor per order for interval entries: product of |f'|
    # over the first order-1 maps that stretch the distance
    stretch: Callable[[int], float] | None = None
    exploratory: bool = False

    @property
    def space(self):
        return self.system.space

    @property
    def symbolic(self) -> bool:
        return isinstance(self.space, SymbolicShift)

    def reference_exponent(self, eps: float) -> tuple[float, str]:
        if self.reference is None:
            raise UnknownEntryError(f"{self.name} has no reference exponent")
        return self.reference(eps), self.provenance

    def growth(self) -> float:
        """Exponential growth rate of admissible words (symbolic entries)."""
        return spectral_radius(self.space)

    def oracle_count(self, order: int, eps: float, target: TargetSet | None = None) -> int:
        """Independent single-order cover count at alpha = 0."""
        if self.symbolic:
            if target is not None and target.kind != "full":
                raise UnknownEntryError("symbolic oracles count the full shift only")
            return word_count(self.space, order + math.floor(order * eps))
        a, b = (0.0, 1.0) if target is None else target.interval()
        h = math.exp(-order * eps) / self.stretch(order)
        return math.floor((b - a) / (2 * h)) + 1

    def probe(self, eps: float, n_max: int = 16) -> TargetSet:
        """Dyadic sub-interval keeping the oracle count at ``n_max`` near
        ``PROBE_TARGET``; the whole space for non-expanding entries."""
        if self.symbolic:
            return TargetSet()
        full = self.oracle_count(n_max, eps)
        k = 0
        while full / 2 ** k > PROBE_TARGET:
            k += 1
        return TargetSet() if k == 0 else TargetSet("interval", 0.0, 2.0 ** -k)


def transfer_matrix(space: SymbolicShift) -> tuple[np.ndarray, list[tuple[int, ...]]]:
    """Transitions between admissible blocks of length q-1 (q the longest forbidden word)."""
    q = max((len(w) for w in space.forbidden), default=1)
    size = max(q - 1, 1)
    states = [s for s in np.ndindex(*([space.k] * size)) if _allowed(space, s)]
    index = {s: i for i, s in enumerate(states)}
    A = np.zeros((len(states), len(states)), dtype=object)
    for s in states:
        for a in range(space.k):
            w = s + (a,)
            if _allowed(space, w):
                A[index[s], index[w[1:] if q > 1 else (a,)]] += 1
    return A, states


def _allowed(space: SymbolicShift, w: tuple[int, ...]) -> bool:
    for f in space.forbidden:
        for s in range(len(w) - len(f) + 1):
            if tuple(w[s: s + len(f)]) == f:
                return False
    return True


def word_count(space: SymbolicShift, length: int) -> int:
    """Number of admissible words of the given length."""
    A, states = transfer_matrix(space)
    size = len(states[0])
    if length <= size:
        return sum(1 for w in np.ndindex(*([space.k] * length)) if _allowed(space, w))
    v = np.ones(len(states), dtype=object)
    for _ in range(length - size):
        v = A.dot(v)
    return int(sum(v))


def spectral_radius(space: SymbolicShift) -> float:
    A, _ = transfer_matrix(space)
    return float(max(abs(np.linalg.eigvals(A.astype(float)))))


def _interval(name, maps, ref, note, stretch, rule="autonomous") -> ZooEntry:
    seq = MapSequence(UnitInterval(), tuple(maps), rule)
    return ZooEntry(name, seq, ref, note, tuple(m.lipschitz for m in maps), stretch)


def _shift(name, k, forbidden, note) -> ZooEntry:
    space = SymbolicShift(k, HORIZON, forbidden)
    seq = autonomous(space, Shift())
    g = spectral_radius(space)
    return ZooEntry(name, seq, lambda e, g=g: (1 + e) * math.log(g), note, (math.e,))


def _build() -> dict[str, ZooEntry]:
    ln2, ln3 = math.log(2), math.log(3)
    entries = [
        _interval("identity", [Affine((1,), (0.0,))], lambda e: e,
                  "static balls of radius r: floor(1/(2r))+1 arcs, exponent eps",
                  lambda m: 1.0),
        _interval("contraction", [Scale(0.5)], lambda e: e,
                  "x -> x/2: the Bowen distance is attained at time 0; static count",
                  lambda m: 1.0),
        _interval("doubling", [Affine((2,), (0.0,))], lambda e: ln2 + e,
                  "arc half-width r/2^(n-1); interval count, exponent ln2 + eps",
                  lambda m: 2.0 ** (m - 1)),
        _interval("triple", [Affine((3,), (0.0,))], lambda e: ln3 + e,
                  "arc half-width r/3^(n-1); interval count, exponent ln3 + eps",
                  lambda m: 3.0 ** (m - 1)),
        _interval("periodic23", [Affine((2,), (0.0,)), Affine((3,), (0.0,))],
                  lambda e: (ln2 + ln3) / 2 + e,
                  "alternating x2, x3: half-width r over the derivative product; "
                  "exponent (ln2+ln3)/2 + eps",
                  lambda m: float(np.prod([2.0 if j % 2 == 0 else 3.0 for j in range(m - 1)])),
                  rule="periodic"),
        _shift("full2", 2, (), "cylinder length n+floor(n eps); 2^length words"),
        _shift("full3", 3, (), "cylinder length n+floor(n eps); 3^length words"),
        _shift("golden", 2, ((1, 1),),
               "transfer-matrix word count, growth rate the golden ratio"),
    ]
    out = {e.name: e for e in entries}
    out["switched23"] = ZooEntry(
        "switched23",
        MapSequence(UnitInterval(), (Affine((2,), (0.0,)), Affine((3,), (0.0,))), "switched", 0),
        None, "random x2/x3 switching; no closed form", (2.0, 3.0), None, exploratory=True)
    out["logistic"] = ZooEntry(
        "logistic", autonomous(UnitInterval(), Logistic(3.7)), None,
        "logistic r=3.7; no closed form", (3.7,), None, exploratory=True)
    return out


_REGISTRY = _build()


def list_entries(include_exploratory: bool = True) -> list[str]:
    return [n for n, e in _REGISTRY.items() if include_exploratory or not e.exploratory]


def get(name: str) -> ZooEntry:
    key = name.removeprefix("zoo:")
    try:
        return _REGISTRY[key]
    except KeyError:
        raise UnknownEntryError(f"unknown zoo entry {name!r}") from None


def reference_exponent(name: str, eps: float) -> tuple[float, str]:
    return get(name).reference_exponent(eps)
