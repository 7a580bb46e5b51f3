"""Atomic probability measures and dynamical-ball mass queries."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .covering import admissible_words
from .dynamics import BallSpec, MapSequence, SymbolicShift, UnitInterval, ball_contains, compose
from .errors import ArgumentError


@dataclass(frozen=True)
class FiniteMeasure:
    """Atoms (points) with positive masses summing to one."""

    space: object
    points: np.ndarray = field(compare=False)
    masses: np.ndarray = field(compare=False)

    def __post_init__(self):
        pts = self.space.validate(self.points)
        if isinstance(self.space, UnitInterval):
            pts = np.atleast_1d(pts)
        elif pts.ndim == 1:
            pts = pts[None]
        w = np.asarray(self.masses, dtype=float).ravel()
        if w.shape[0] != pts.shape[0] or w.shape[0] == 0:
            raise ArgumentError("need one positive mass per atom")
        if not (w > 0).all():
            raise ArgumentError("atom masses must be positive")
        if abs(math.fsum(w) - 1.0) > 1e-12:
            raise ArgumentError(f"masses sum to {math.fsum(w)!r}, not 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "masses", w)

    @classmethod
    def uniform(cls, space, points) -> "FiniteMeasure":
        n = np.shape(points)[0] if np.ndim(points) else 1
        return cls(space, points, np.full(n, 1.0 / n))

    @classmethod
    def from_weights(cls, space, points, weights) -> "FiniteMeasure":
        """Normalize nonnegative weights, dropping zero atoms."""
        w = np.asarray(weights, dtype=float)
        keep = w > 0
        pts = np.asarray(points)[keep]
        w = w[keep]
        w = w / math.fsum(w)
        w[-1] = 1.0 - math.fsum(w[:-1])
        return cls(space, pts, w)

    def __len__(self) -> int:
        return self.masses.shape[0]

    # CSV: one column per coordinate then mass
    def to_csv(self) -> str:
        buf = io.StringIO()
        pts = self.points.reshape(len(self), -1)
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow([f"x{j}" for j in range(pts.shape[1])] + ["mass"])
        for row, w in zip(pts.tolist(), self.masses.tolist()):
            wr.writerow([repr(v) for v in row] + [repr(w)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, space, text: str) -> "FiniteMeasure":
        rows = list(csv.reader(io.StringIO(text)))
        body = rows[1:]
        conv = int if isinstance(space, SymbolicShift) else float
        pts = np.array([[conv(v) for v in r[:-1]] for r in body])
        if isinstance(space, UnitInterval):
            pts = pts[:, 0]
        return cls(space, pts, np.array([float(r[-1]) for r in body]))


def _check_space(mu: FiniteMeasure, system: MapSequence) -> None:
    if mu.space != system.space:
        raise ArgumentError(f"measure on {mu.space.descriptor()} but system on "
                            f"{system.space.descriptor()}")


def mass_of_ball(mu: FiniteMeasure, system: MapSequence, ball: BallSpec) -> float:
    """Total mass of atoms strictly inside the ball."""
    _check_space(mu, system)
    inside = ball_contains(system, ball, mu.points)
    return math.fsum(mu.masses[inside])


def supported_on(mu: FiniteMeasure, z: Callable[[np.ndarray], np.ndarray]) -> bool:
    return bool(np.all(z(mu.points)))


@dataclass(frozen=True)
class SamplerConfig:
    seed: int
    count: int
    initial: str = "uniform"  # uniform | grid
    push: str = "none"        # none | random (push forward a uniform number of steps)

    def __post_init__(self):
        if self.count < 1:
            raise ArgumentError("sample count must be >= 1")
        if self.initial not in ("uniform", "grid") or self.push not in ("none", "random"):
            raise ArgumentError("unknown sampler option")


def empirical_measure(system: MapSequence, cfg: SamplerConfig, start: int = 1,
                      horizon: int = 1) -> FiniteMeasure:
    """Uniform measure on sampled initial points, optionally pushed forward.

    With ``push="random"`` each sample is moved ``j`` steps along the
    sequence from time ``start``, ``j`` uniform in ``[0, horizon)``.  Equal
    points are merged so atoms stay distinct.
    """
    if horizon < 1:
        raise ArgumentError("horizon must be >= 1")
    rng = np.random.default_rng(cfg.seed)
    space = system.space
    m = cfg.count
    if isinstance(space, SymbolicShift):
        pts = _symbolic_sample(space, m, rng, cfg.initial)
    elif cfg.initial == "grid":
        side = max(1, round(m ** (1.0 / space.dim)))
        g = np.arange(side) / side
        if isinstance(space, UnitInterval):
            pts = g
        else:
            pts = np.stack([a.ravel() for a in np.meshgrid(*([g] * space.dim), indexing="ij")], -1)
    else:
        shape = (m,) if isinstance(space, UnitInterval) else (m, space.dim)
        pts = rng.random(shape)
    if cfg.push == "random":
        steps = rng.integers(0, horizon, size=pts.shape[0])
        moved = [compose(system, start, int(j), p) for p, j in zip(pts, steps)]
        pts = np.array(moved)
    uniq, counts = np.unique(pts, axis=0, return_counts=True)
    return FiniteMeasure(space, uniq, counts / counts.sum())


def _symbolic_sample(space: SymbolicShift, m: int, rng, initial: str) -> np.ndarray:
    """Admissible words; ``grid`` spreads evenly over the shortest word length
    with at least ``m`` words, ``uniform`` walks forward choosing uniformly
    among allowed symbols.  Tails are completed with the smallest allowed
    symbol (grid) or at random (uniform)."""
    out = np.zeros((m, space.horizon), dtype=np.int64)
    t0 = 0
    if initial == "grid":
        ell = 0
        words = admissible_words(space, 0)
        while words.shape[0] < m and ell < space.horizon:
            ell += 1
            words = admissible_words(space, ell)
        idx = np.linspace(0, words.shape[0] - 1, m).round().astype(int)
        out[:, :ell] = words[idx]
        t0 = ell
    for t in range(t0, space.horizon):
        allowed = np.zeros((m, space.k), dtype=bool)
        for a in range(space.k):
            out[:, t] = a
            allowed[:, a] = space.admissible(out[:, : t + 1])
        if initial == "grid":
            out[:, t] = np.argmax(allowed, axis=1)
        else:
            u = rng.random(m) * allowed.sum(axis=1)
            cum = np.cumsum(allowed, axis=1)
            out[:, t] = np.argmax(cum > u[:, None], axis=1)
    return out
