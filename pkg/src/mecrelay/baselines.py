"""Equal-allocation baseline: every relay gets the same slot (or bandwidth).

Slots are fixed at ``t / N`` with ``t = (T - L d / fB) / 2``; relay energies
are water-filled for the remaining convex problem and ``d`` is optimized by
golden section. Equal slots and equal bandwidths give the same energy, so one
solution serves both.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .kernel import bisect_increasing, golden_search
from .scenario import ChannelRealization, SystemParams, TaskSpec, d_domain, local_energy, offload_time_budget

FALLBACK_GRID = 512
PROBE_POINTS = 33


@dataclass(frozen=True)
class EqualAllocSolution:
    d: float
    E: np.ndarray
    slot: float
    bandwidth: float
    total_energy: float
    lam: float
    method: str = "golden"


def _energies(lam, slot, ch, params, cost):
    return np.maximum(0.0, slot * (lam * params.W * ch.h / cost - params.noise) / ch.h)


def _rate(E, slot, ch, params):
    return float(np.sum(slot * params.W * np.log1p(E * ch.h / (slot * params.noise))))


def equal_alloc_lower(d: float, ch: ChannelRealization, task: TaskSpec, params: SystemParams):
    """Minimum relay energy with equal slots. Returns ``(energy, E, lambda)``.

    ``E_n(lambda) = max(0, slot (lambda W h_n / c_n - sigma^2 W) / h_n)`` with
    ``c_n = 1 + h_n / g_n``; ``lambda`` is found by bisection on ``ln lambda``
    so that the rate constraint is tight, then refined in closed form on the
    identified active set.
    """
    N = ch.N
    cost = 1.0 + ch.h / ch.g
    if d <= 0.0:
        return 0.0, np.zeros(N), 0.0
    slot = 0.5 * offload_time_budget(task, params, d) / N
    # lambda at which relay n switches on
    lam_on = cost * params.sigma2 / ch.h
    lo = math.log(lam_on.min())

    def deficit(loglam):
        return d - _rate(_energies(math.exp(loglam), slot, ch, params, cost), slot, ch, params)

    # rate is unbounded in lambda; grow the bracket until it covers d
    hi = lo + 1.0
    while deficit(hi) > 0.0:
        hi = lo + 2.0 * (hi - lo)
        if hi - lo > 1e4:
            raise NumericError("water-filling bracket failed", payload={"d": d})
    # phi(x) = -deficit is nondecreasing; largest x with rate <= d
    loglam = bisect_increasing(lambda x: -deficit(x), lo, hi, 1e-13 * max(1.0, abs(hi)))
    active = lam_on < math.exp(loglam) * (1.0 + 1e-12)
    if not active.any():
        active = lam_on == lam_on.min()
    # on a fixed active set the rate is affine in ln lambda
    k = active.sum()
    loglam = (d / (slot * params.W) - np.sum(np.log(ch.h[active] / (cost[active] * params.sigma2)))) / k
    lam = math.exp(loglam)
    E = _energies(lam, slot, ch, params, cost)
    if np.any(E[~active] > 0) or np.any(E[active] <= 0):
        raise NumericError("active set changed during refinement", payload={"d": d, "lambda": lam})
    return float(np.sum(cost * E)), E, lam


def _unimodal(vals) -> bool:
    k = int(np.argmin(vals))
    tol = 1e-12 * max(1.0, float(np.max(np.abs(vals))))
    left = np.diff(vals[:k + 1])
    right = np.diff(vals[k:])
    return bool(np.all(left <= tol) and np.all(right >= -tol))


def solve_equal_alloc(task: TaskSpec, ch: ChannelRealization, params: SystemParams) -> EqualAllocSolution:
    _, d_max = d_domain(task, params)

    def f(d):
        return equal_alloc_lower(d, ch, task, params)[0] + local_energy(task, params, d)

    method = "golden"
    if d_max <= 0.0:
        d = 0.0
    else:
        probe = np.array([f(x) for x in np.linspace(0.0, d_max, PROBE_POINTS)])
        if _unimodal(probe):
            d, _ = golden_search(f, 0.0, d_max, params.tol_golden)
        else:
            grid = np.linspace(0.0, d_max, FALLBACK_GRID)
            d = float(grid[int(np.argmin([f(x) for x in grid]))])
            method = "grid-fallback"
    energy, E, lam = equal_alloc_lower(d, ch, task, params)
    t = 0.5 * (task.T - task.L * d / params.fB)
    return EqualAllocSolution(d, E, t / ch.N, params.W / ch.N,
                              energy + local_energy(task, params, d), lam, method)
