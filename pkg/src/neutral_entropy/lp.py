"""Dense two-phase simplex for min c.x s.t. A x >= b, x >= 0, with duals."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .covering import FiniteInstance
from .errors import ArgumentError, InstanceError, SolverError
from .measures import FiniteMeasure, mass_of_ball

PIVOT_TOL = 1e-11
CERT_TOL = 1e-9


@dataclass(frozen=True)
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        c, A, b = (np.asarray(v, dtype=float) for v in (self.c, self.A, self.b))
        if A.ndim != 2 or c.shape != (A.shape[1],) or b.shape != (A.shape[0],):
            raise ArgumentError("inconsistent LP dimensions")
        if not (np.isfinite(A).all() and np.isfinite(b).all() and np.isfinite(c).all()):
            raise ArgumentError("LP entries must be finite")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    def to_text(self) -> str:
        m, n = self.A.shape
        lines = [f"lp {m} {n}", "c " + " ".join(map(repr, self.c.tolist()))]
        for row, rhs in zip(self.A.tolist(), self.b.tolist()):
            lines.append(" ".join(map(repr, row)) + " >= " + repr(rhs))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "LinearProgram":
        rows = [ln for ln in text.splitlines() if ln.strip()]
        _, m, n = rows[0].split()
        c = [float(v) for v in rows[1].split()[1:]]
        A, b = [], []
        for ln in rows[2: 2 + int(m)]:
            lhs, rhs = ln.split(">=")
            A.append([float(v) for v in lhs.split()])
            b.append(float(rhs))
        return cls(np.array(c), np.array(A).reshape(int(m), int(n)), np.array(b))


@dataclass(frozen=True)
class LPSolution:
    status: str  # optimal | infeasible | unbounded | failed
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    objective: float = float("nan")
    gap: float = float("nan")
    primal_residual: float = float("nan")
    dual_residual: float = float("nan")
    iterations: int = 0

    def to_text(self) -> str:
        lines = [f"status {self.status}", f"objective {self.objective!r}", f"gap {self.gap!r}"]
        if self.x is not None:
            lines.append("x " + " ".join(map(repr, self.x.tolist())))
            lines.append("y " + " ".join(map(repr, self.y.tolist())))
        return "\n".join(lines) + "\n"


def _pivot(T: np.ndarray, r: int, col: int) -> None:
    T[r] /= T[r, col]
    f = T[:, col].copy()
    f[r] = 0.0
    T -= np.outer(f, T[r])


def _run(T: np.ndarray, basis: list[int], allowed: np.ndarray, max_iter: int) -> tuple[str, int]:
    """Bland's rule on tableau T whose last row holds reduced costs."""
    it = 0
    while it < max_iter:
        red = T[-1, :-1]
        cand = np.nonzero((red < -PIVOT_TOL) & allowed)[0]
        if cand.size == 0:
            return "optimal", it
        col = int(cand[0])
        colv = T[:-1, col]
        pos = colv > PIVOT_TOL
        if not pos.any():
            return "unbounded", it
        ratios = np.full(colv.shape, np.inf)
        ratios[pos] = T[:-1, -1][pos] / colv[pos]
        best = ratios.min()
        ties = np.nonzero(ratios <= best + 1e-12 * max(1.0, abs(best)))[0]
        r = int(min(ties, key=lambda k: basis[k]))
        _pivot(T, r, col)
        basis[r] = col
        it += 1
    return "failed", it


def solve(lp: LinearProgram, max_iter: int = 50_000) -> LPSolution:
    """Solve with two-phase simplex and Bland's rule; certify the result.

    A solution is reported optimal only if primal feasibility, dual
    feasibility and the duality gap all pass at 1e-9; otherwise the status
    is ``failed``.
    """
    A, b, c = lp.A, lp.b, lp.c
    m, n = A.shape
    # standard form: A x - s = b, flipped so the right-hand side is >= 0
    sign = np.where(b < 0, -1.0, 1.0)
    S = np.hstack([A, -np.eye(m)]) * sign[:, None]
    rhs = b * sign
    nv = n + m
    T = np.zeros((m + 1, nv + m + 1))
    T[:m, :nv] = S
    T[:m, nv:nv + m] = np.eye(m)
    T[:m, -1] = rhs
    T[-1, :nv] = -S.sum(axis=0)
    T[-1, -1] = -rhs.sum()
    basis = list(range(nv, nv + m))
    allowed = np.ones(nv + m, dtype=bool)
    status, it1 = _run(T, basis, allowed, max_iter)
    if status != "optimal":
        return LPSolution("failed", iterations=it1)
    if T[-1, -1] < -1e-9 * max(1.0, np.abs(rhs).max(initial=0.0)):
        return LPSolution("infeasible", iterations=it1)
    # drive artificials out; rows that cannot be pivoted are redundant
    keep = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] >= nv:
            nz = np.nonzero(np.abs(T[r, :nv]) > 1e-9)[0]
            if nz.size:
                _pivot(T, r, int(nz[0]))
                basis[r] = int(nz[0])
            else:
                keep[r] = False
    rows = np.nonzero(keep)[0]
    T2 = np.zeros((rows.size + 1, nv + 1))
    T2[:-1, :nv] = T[rows, :nv]
    T2[:-1, -1] = T[rows, -1]
    basis2 = [basis[r] for r in rows]
    cost = np.concatenate([c, np.zeros(m)])
    T2[-1, :nv] = cost
    for k, j in enumerate(basis2):
        T2[-1] -= cost[j] * T2[k]
    status, it2 = _run(T2, basis2, np.ones(nv, dtype=bool), max_iter)
    iters = it1 + it2
    if status != "optimal":
        return LPSolution(status if status == "unbounded" else "failed", iterations=iters)
    return _certify(lp, S[rows], rhs[rows], sign[rows], rows, cost, basis2, iters)


def _certify(lp, S, rhs, sign, rows, cost, basis, iters) -> LPSolution:
    A, b, c = lp.A, lp.b, lp.c
    m, n = A.shape
    B = S[:, basis]
    try:
        xb = np.linalg.solve(B, rhs)
        yr = np.linalg.solve(B.T, cost[basis])
    except np.linalg.LinAlgError:
        return LPSolution("failed", iterations=iters)
    full = np.zeros(n + m)
    full[basis] = xb
    x = np.maximum(full[:n], 0.0)
    y = np.zeros(m)
    y[rows] = yr * sign
    y = np.maximum(y, 0.0)
    obj = float(c @ x)
    scale = 1.0 + abs(obj)
    p_res = float(max(np.max(b - A @ x, initial=0.0), -np.min(full[:n], initial=0.0)))
    d_res = float(max(np.max(A.T @ y - c, initial=0.0), 0.0))
    gap = abs(obj - float(b @ y))
    ok = p_res <= CERT_TOL * scale and d_res <= CERT_TOL * scale and gap <= CERT_TOL * scale
    return LPSolution("optimal" if ok else "failed", x, y, obj, gap, p_res, d_res, iters)


# --------------------------------------------------------------------------
# fractional covers and Frostman measures


@dataclass(frozen=True)
class WeightedValue:
    value: float
    weights: np.ndarray = field(compare=False)
    duals: np.ndarray = field(compare=False)   # one per ground point
    gap: float = 0.0
    residual: float = 0.0


def _components(mem: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Connected components of the ball/point incidence graph."""
    nb, npts = mem.shape
    parent = list(range(nb))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for p in range(npts):
        bs = np.nonzero(mem[:, p])[0]
        root = find(int(bs[0]))
        for j in bs[1:]:
            rj = find(int(j))
            if rj != root:
                parent[rj] = root
    roots = np.array([find(j) for j in range(nb)])
    owner = roots[np.argmax(mem, axis=0)]
    return [(np.nonzero(roots == r)[0], np.nonzero(owner == r)[0]) for r in np.unique(roots)]


def fractional_cover(membership: np.ndarray, cost: np.ndarray) -> WeightedValue:
    """min sum_i cost_i c_i  s.t.  sum_{i covers p} c_i >= 1 for every point p, c >= 0.

    The program splits over connected components of the incidence graph and
    points with identical membership share one constraint; the dual mass of
    such a class sits on its first point.
    """
    mem = np.asarray(membership, dtype=bool)
    if not mem.any(axis=0).all():
        raise InstanceError("a ground point lies in no candidate ball")
    weights = np.zeros(mem.shape[0])
    duals = np.zeros(mem.shape[1])
    total, gap, resid = [], 0.0, 0.0
    for balls, pts in _components(mem):
        sub = mem[np.ix_(balls, pts)]
        cols, first = np.unique(sub.T, axis=0, return_index=True)
        sol = solve(LinearProgram(cost[balls], cols.astype(float), np.ones(cols.shape[0])))
        if sol.status == "infeasible":
            raise InstanceError("fractional cover infeasible")
        if sol.status != "optimal":
            raise SolverError(f"simplex ended with status {sol.status}")
        weights[balls] = sol.x
        duals[pts[first]] = sol.y
        total.append(sol.objective)
        gap = max(gap, sol.gap)
        resid = max(resid, sol.primal_residual, sol.dual_residual)
    return WeightedValue(math.fsum(total), weights, duals, gap, resid)


@dataclass(frozen=True)
class FrostmanCertificate:
    c: float
    gap: float
    max_excess: float   # max over candidate balls of mu(B) - e^{-alpha m}/c
    passed: bool


def frostman_measure(instance: FiniteInstance, alpha: float,
                     tol: float = CERT_TOL) -> tuple[FiniteMeasure, FrostmanCertificate]:
    """Probability measure on the ground set that is small on every candidate ball.

    The optimal dual of the fractional cover program puts total mass
    ``c = W`` on the ground points with at most ``e^{-alpha m}`` inside each
    candidate ball; dividing by ``c`` gives the measure.  The bound is then
    re-checked ball by ball with strict-membership mass queries.
    """
    w = fractional_cover(instance.membership, instance.costs(alpha))
    if not w.value > 0:
        raise ArgumentError("fractional cover value must be positive")
    mu = FiniteMeasure.from_weights(instance.system.space, instance.ground, w.duals)
    excess = max(mass_of_ball(mu, instance.system, b) - math.exp(-alpha * b.order) / w.value
                 for b in instance.balls)
    return mu, FrostmanCertificate(w.value, w.gap, excess, excess <= tol and w.gap <= tol)
