"""Brute-force oracles and property probes.

The oracles use only the rate and energy formulas from :mod:`mecrelay.scenario`;
they never call solver code.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError
from .scenario import (ChannelRealization, SystemParams, TaskSpec, af_snr, d_domain, local_energy,
                       offload_time_budget, tdma_rate)

DEFAULT_BUDGET = 10_000_000


@dataclass(frozen=True)
class GridSpec:
    """Per-dimension ``(lo, hi, steps)`` ranges plus an evaluation budget.

    ``refine`` rounds re-center every range on the incumbent and shrink it by
    ``shrink``; the budget caps the total number of evaluated points.
    """
    ranges: dict
    refine: int = 0
    shrink: float = 0.1
    budget: int = DEFAULT_BUDGET

    def points(self) -> int:
        return int(np.prod([r[2] for r in self.ranges.values()])) * (1 + self.refine)

    def check(self):
        if self.points() > self.budget:
            raise DomainError(f"grid has {self.points()} points, budget is {self.budget}")


@dataclass
class OracleResult:
    energy: float
    allocation: dict
    evaluations: int
    feasible: bool = True
    diagnostic: str = ""


# ------------------------------------------------------------------ TDMA

def _tdma_energy_grid(task, ch, params, d, theta, rho):
    """Energy for offload ``d``, slot share ``theta`` and data share ``rho`` of relay 0 (N <= 2).

    Each relay's energy is the exact inverse of its DF-TDMA rate; both hops
    are matched (``Q_n g_n = P_n h_n``), so relay energy adds ``E_n h_n / g_n``.
    """
    tau = task.T - task.L * d / params.fB
    half = 0.5 * tau
    total = local_energy_vec(task, params, d)
    if ch.N == 1:
        theta = np.ones_like(theta)
        rho = np.ones_like(rho)
    shares_t = [theta, 1.0 - theta]
    shares_d = [rho, 1.0 - rho]
    for n in range(ch.N):
        t_n = half * shares_t[n]
        d_n = d * shares_d[n]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            E_n = t_n * params.noise * np.expm1(d_n / (t_n * params.W)) / ch.h[n]
        E_n = np.where(d_n <= 0, 0.0, np.where(t_n <= 0, np.inf, E_n))
        total = total + E_n * (1.0 + ch.h[n] / ch.g[n])
    return total


def local_energy_vec(task, params, d):
    return params.kappa * task.L ** 3 * (task.D - d) ** 3 / task.T ** 2


def default_tdma_grid(task, params, steps=(201, 81, 81), refine=4) -> GridSpec:
    _, d_max = d_domain(task, params)
    return GridSpec({"d": (0.0, d_max, steps[0]), "theta": (0.0, 1.0, steps[1]),
                     "rho": (0.0, 1.0, steps[2])}, refine=refine)


def brute_force_tdma(task: TaskSpec, ch: ChannelRealization, params: SystemParams,
                     grid: GridSpec | None = None) -> OracleResult:
    """Exhaustive search over (d, slot split, data split) for N <= 2."""
    if ch.N > 2:
        raise DomainError("the TDMA oracle supports N <= 2")
    grid = grid or default_tdma_grid(task, params)
    grid.check()
    _, d_max = d_domain(task, params)
    ranges = dict(grid.ranges)
    best = (math.inf, None)
    evals = 0
    for _ in range(grid.refine + 1):
        axes = [np.linspace(*ranges[k][:2], int(ranges[k][2])) for k in ("d", "theta", "rho")]
        axes[0] = np.clip(axes[0], 0.0, d_max)
        axes[1] = np.clip(axes[1], 0.0, 1.0)
        axes[2] = np.clip(axes[2], 0.0, 1.0)
        D, TH, RH = np.meshgrid(*axes, indexing="ij")
        vals = _tdma_energy_grid(task, ch, params, D, TH, RH)
        evals += vals.size
        k = np.unravel_index(int(np.nanargmin(vals)), vals.shape)
        if vals[k] < best[0]:
            best = (float(vals[k]), (float(D[k]), float(TH[k]), float(RH[k])))
        for name, centre in zip(("d", "theta", "rho"), best[1]):
            lo, hi, n = ranges[name]
            half = 0.5 * (hi - lo) * grid.shrink
            ranges[name] = (centre - half, centre + half, n)
    d, theta, rho = best[1]
    return OracleResult(best[0], {"d": d, "theta": theta, "rho": rho}, evals)


def brute_force_equal(task: TaskSpec, ch: ChannelRealization, params: SystemParams,
                      steps=(201, 401), refine=4) -> OracleResult:
    """Equal-slot oracle for N <= 2: the slot split is pinned at 1/2, data split and d are gridded."""
    if ch.N > 2:
        raise DomainError("the equal-allocation oracle supports N <= 2")
    _, d_max = d_domain(task, params)
    grid = GridSpec({"d": (0.0, d_max, steps[0]), "theta": (0.5, 0.5, 1),
                     "rho": (0.0, 1.0, steps[1])}, refine=refine)
    return brute_force_tdma(task, ch, params, grid)


# ------------------------------------------------------------------ AF

def default_af_grid(task, params, d=None, steps=(1, 400, 400), refine=5) -> GridSpec:
    _, d_max = d_domain(task, params)
    d_range = (d, d, 1) if d is not None else (0.0, d_max, max(steps[0], 2))
    return GridSpec({"d": d_range, "log10_P": (-12.0, 6.0, steps[1]),
                     "log10_beta": (-6.0, 6.0, steps[2])}, refine=refine)


def _af_min_at(task, ch, params, d, ranges, rounds, shrink):
    """Feasible minimum of ``t (P + beta^2 (P h + noise)) + E_c`` over a (P, beta) log grid at fixed d."""
    tau = offload_time_budget(task, params, d)
    t = 0.5 * tau
    ec = local_energy(task, params, d)
    if d <= 0.0:
        return ec, {"d": 0.0, "P": 0.0, "beta": 0.0}, 1, True
    need = math.expm1(2.0 * d / (params.W * tau))
    r = dict(ranges)
    best = (math.inf, None)
    evals = 0
    for _ in range(rounds + 1):
        lp = np.linspace(*r["log10_P"][:2], int(r["log10_P"][2]))
        lb = np.linspace(*r["log10_beta"][:2], int(r["log10_beta"][2]))
        P, B = np.meshgrid(10.0 ** lp, 10.0 ** lb, indexing="ij")
        snr = af_snr(P, B[..., None], ch, params)
        energy = t * (P + B ** 2 * (P * ch.h[0] + params.noise)) + ec
        energy = np.where(snr >= need, energy, np.inf)
        evals += energy.size
        k = np.unravel_index(int(np.argmin(energy)), energy.shape)
        if not math.isfinite(energy[k]):
            if best[1] is None:
                return math.inf, {}, evals, False
            break
        if energy[k] < best[0]:
            best = (float(energy[k]), (float(lp[k[0]]), float(lb[k[1]])))
        for name, centre in zip(("log10_P", "log10_beta"), best[1]):
            lo, hi, n = r[name]
            half = 0.5 * (hi - lo) * shrink
            r[name] = (centre - half, centre + half, n)
    return best[0], {"d": d, "P": 10.0 ** best[1][0], "beta": 10.0 ** best[1][1]}, evals, True


def brute_force_af(task: TaskSpec, ch: ChannelRealization, params: SystemParams,
                   grid: GridSpec | None = None) -> OracleResult:
    """Exhaustive feasible minimum of the AF energy for N = 1 over (d, P, beta) grids.

    ``P`` and ``beta`` use logarithmic grids refined around the incumbent; ``d``
    is scanned on its own linear grid without refinement.
    """
    if ch.N != 1:
        raise DomainError("the AF oracle supports N = 1 only")
    grid = grid or default_af_grid(task, params)
    grid.check()
    dlo, dhi, dn = grid.ranges["d"]
    best = OracleResult(math.inf, {}, 0, False, "no feasible grid point")
    evals = 0
    for d in np.linspace(dlo, dhi, int(dn)):
        e, alloc, n, ok = _af_min_at(task, ch, params, float(d), grid.ranges, grid.refine, grid.shrink)
        evals += n
        if ok and e < best.energy:
            best = OracleResult(e, alloc, 0)
    best.evaluations = evals
    return best


# ------------------------------------------------------------------ probes

@dataclass
class ProbeReport:
    passed: bool
    violations: list = field(default_factory=list)
    points: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def probe_monotone(f: Callable[[float], float], interval, points: int = 25, rtol: float = 1e-10) -> ProbeReport:
    """Flag adjacent grid pairs where ``f`` decreases by more than ``rtol`` relative."""
    xs = np.linspace(interval[0], interval[1], points)
    vals = [float(f(float(x))) for x in xs]
    bad = []
    for i in range(points - 1):
        if vals[i + 1] < vals[i] - rtol * abs(vals[i]):
            bad.append({"x0": float(xs[i]), "x1": float(xs[i + 1]), "f0": vals[i], "f1": vals[i + 1]})
    return ProbeReport(not bad, bad, points)


def probe_midpoint_convex(f: Callable[[float], float], interval, pairs: int = 50, seed: int = 0,
                          atol: float = 1e-12, rtol: float = 1e-12) -> ProbeReport:
    """Check ``f((a+b)/2) <= (f(a)+f(b))/2`` on random pairs."""
    rng = np.random.default_rng(seed)
    lo, hi = interval
    bad = []
    for _ in range(pairs):
        a, b = rng.uniform(lo, hi, 2)
        fa, fb, fm = f(float(a)), f(float(b)), f(float(0.5 * (a + b)))
        avg = 0.5 * (fa + fb)
        if fm > avg + atol + rtol * abs(avg):
            bad.append({"a": float(a), "b": float(b), "f_mid": fm, "avg": avg})
    return ProbeReport(not bad, bad, pairs)
