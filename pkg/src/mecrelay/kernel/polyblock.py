"""Polyblock outer approximation for monotonic maximization.

Maximize an increasing ``f`` over ``{x in [0, b] : g(x) <= c}`` where ``g`` is
increasing and ``g(0) <= c``. The feasible set is normal (downward closed),
so it is enclosed by a union of boxes ``[0, v]`` whose upper corners ``v``
(the vertices) shrink toward the boundary as the iteration proceeds.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import ConvergenceError, DomainError
from .scalar import bracket_increasing

DOMINANCE_SLACK = 1e-12


@dataclass
class MonotoneProblem:
    objective: Callable[[np.ndarray], float]
    constraint: Callable[[np.ndarray], float]
    cap: float
    upper: np.ndarray
    eps: float = 1e-5
    probe_points: int = 5

    def __post_init__(self):
        self.upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if np.any(self.upper < 0) or not np.all(np.isfinite(self.upper)):
            raise DomainError("box bounds must be finite and nonnegative")
        if not self.eps > 0:
            raise DomainError("eps must be positive")
        if self.probe_points >= 2:
            self._probe()

    def _probe(self):
        # coarse lattice check that f and g are nondecreasing along every axis
        axes = [np.linspace(0.0, u, self.probe_points) for u in self.upper]
        grid = {}
        for idx in itertools.product(range(self.probe_points), repeat=self.upper.size):
            x = np.array([axes[i][j] for i, j in enumerate(idx)])
            grid[idx] = (self.objective(x), self.constraint(x))
        for idx, (fv, gv) in grid.items():
            for i in range(self.upper.size):
                if idx[i] + 1 < self.probe_points:
                    nxt = list(idx)
                    nxt[i] += 1
                    fn, gn = grid[tuple(nxt)]
                    tol_f = 1e-9 * max(1.0, abs(fv))
                    tol_g = 1e-9 * max(1.0, abs(gv))
                    if fn < fv - tol_f or gn < gv - tol_g:
                        raise DomainError(f"objective or constraint decreases along axis {i} near {idx}")


@dataclass
class PolyblockResult:
    x: np.ndarray
    value: float
    bound: float
    iterations: int
    history: list = field(default_factory=list)

    @property
    def gap(self) -> float:
        return self.bound - self.value


def polyblock_maximize(p: MonotoneProblem, tol_bisect: float = 1e-10, max_iter: int = 20000,
                       seeds: Sequence[np.ndarray] = (), projection: str = "illinois") -> PolyblockResult:
    """Return an ``eps``-optimal feasible point of ``p``.

    ``seeds`` are extra feasible points used to initialize the incumbent.
    Raises ``ConvergenceError`` (payload: best point, value, bound) when the
    iteration budget is exhausted.
    """
    ub = p.upper
    dim = ub.size
    origin = np.zeros(dim)
    if p.constraint(origin) > p.cap:
        raise DomainError("origin is infeasible; the feasible set is empty")
    xtol = tol_bisect  # on the ray parameter in [0, 1]

    best_x = origin
    best = p.objective(origin)
    for s in seeds:
        s = np.asarray(s, dtype=float)
        if p.constraint(s) <= p.cap:
            fs = p.objective(s)
            if fs > best:
                best, best_x = fs, s

    verts = ub.reshape(1, -1).copy()
    vals = np.array([p.objective(ub)])
    pruned_bound = -math.inf
    history = []
    bound = max(vals[0], best)

    for it in range(1, max_iter + 1):
        # drop vertices that cannot beat the incumbent by more than eps
        drop = vals <= best + p.eps
        if drop.any():
            pruned_bound = max(pruned_bound, float(vals[drop].max()))
            verts, vals = verts[~drop], vals[~drop]
        bound = max(best, pruned_bound, float(vals.max()) if vals.size else -math.inf)
        history.append((bound, best))
        if bound - best <= p.eps:
            return PolyblockResult(best_x, best, bound, it, history)

        k = int(np.argmax(vals))
        z, fz = verts[k], float(vals[k])
        verts, vals = np.delete(verts, k, axis=0), np.delete(vals, k)
        if p.constraint(z) <= p.cap:
            if fz > best:
                best, best_x = fz, z
            continue

        def phi(lam, z=z):
            return p.constraint(lam * z) - p.cap

        lam, _, _ = bracket_increasing(phi, 0.0, 1.0, xtol, method=projection)
        pi = lam * z
        fpi = p.objective(pi)
        if fpi > best:
            best, best_x = fpi, pi

        for i in range(dim):
            if pi[i] >= z[i]:
                continue
            v = z.copy()
            v[i] = pi[i]
            if verts.size and np.any(np.all(v <= verts + DOMINANCE_SLACK, axis=1)):
                continue
            # new vertex may dominate older ones
            if verts.size:
                keep = ~np.all(verts <= v + DOMINANCE_SLACK, axis=1)
                verts, vals = verts[keep], vals[keep]
            verts = np.vstack([verts, v])
            vals = np.append(vals, p.objective(v))

    raise ConvergenceError(
        "polyblock vertex budget exhausted",
        payload={"x": best_x.tolist(), "value": best, "bound": bound, "gap": bound - best},
    )
