"""Amplify-and-forward mode.

Inner level: for fixed ``d`` the power problem is written in log variables
``q = ln P``, ``s = ln delta``, ``alpha_n = ln beta_n`` and solved by
successive convex approximation, linearizing the one concave-side constraint
around the current iterate. Outer level: the offload amount is chosen by a
polyblock search on ``(d, omega)``, which needs the lower-level value to be
increasing in ``d`` (probed at run time).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import ConvergenceError, DomainError, NumericError
from .kernel import LseProgram, MonotoneProblem, log_sum_exp, polyblock_maximize, solve_lse_program
from .scenario import ChannelRealization, SystemParams, TaskSpec, d_domain, local_energy, psi

__all__ = [
    "ScaState", "AfSolution", "psi", "feasible_start", "sca_subproblem", "sca_step", "sca_solve",
    "XBar", "af_objective", "offload_cutoff", "solve_af_polyblock", "solve_af_grid", "LOG_FLOOR",
]

LOG_FLOOR = -60.0
START_MARGIN = 1e-6
INTERIOR_NUDGE = 1e-12
MAX_SCA_ITER = 500


@dataclass(frozen=True)
class ScaState:
    q: float
    s: float
    alpha: np.ndarray
    iter: int
    Ybar: float

    @property
    def x(self) -> np.ndarray:
        return np.concatenate(([self.q, self.s], self.alpha))

    @property
    def P(self) -> float:
        return math.exp(self.q)

    @property
    def beta(self) -> np.ndarray:
        return np.exp(self.alpha)


def _objective_log(x, ch, noise):
    q, alpha = x[0], x[2:]
    w = np.concatenate(([1.0], ch.h, np.full(ch.N, noise)))
    e = np.concatenate(([q], q + 2.0 * alpha, 2.0 * alpha))
    return log_sum_exp(w, e)


def _slack_power(x, psi_val, ch, noise):
    """Relay power constraint slack: ``-ln psi - ln noise - ln(1 + sum g e^{2 alpha}) + s``."""
    s, alpha = x[1], x[2:]
    return -math.log(psi_val) - math.log(noise) - log_sum_exp(np.concatenate(([1.0], ch.g)),
                                                               np.concatenate(([0.0], 2.0 * alpha))) + s


def _slack_signal(x, ch):
    """Signal constraint slack: ``2 ln sum sqrt(hg) e^{alpha} + q - s``."""
    q, s, alpha = x[0], x[1], x[2:]
    return 2.0 * log_sum_exp(np.sqrt(ch.h * ch.g), alpha) + q - s


def _restore_interior(x, psi_val, ch, noise):
    x = x.copy()
    r = _slack_power(x, psi_val, ch, noise)
    if r <= INTERIOR_NUDGE:
        x[1] += INTERIOR_NUDGE - r
    r = _slack_signal(x, ch)
    if r <= INTERIOR_NUDGE:
        x[0] += INTERIOR_NUDGE - r
    return x


def feasible_start(d: float, ch: ChannelRealization, task: TaskSpec, params: SystemParams,
                   margin: float = START_MARGIN) -> ScaState:
    """All ``beta_n = 1``, ``delta`` just above its floor, ``P`` just above what ``delta`` needs."""
    if d <= 0:
        raise DomainError("the AF power problem is trivial at d = 0; bypass it")
    pv = psi(d, task, params)
    noise = params.noise
    delta = pv * noise * (1.0 + ch.g.sum()) * (1.0 + margin)
    P = delta * (1.0 + margin) / np.sum(np.sqrt(ch.h * ch.g)) ** 2
    x = np.concatenate(([math.log(P), math.log(delta)], np.zeros(ch.N)))
    return ScaState(x[0], x[1], x[2:], 0, _objective_log(x, ch, noise))


def sca_subproblem(state: ScaState, psi_val: float, ch: ChannelRealization, params: SystemParams) -> LseProgram:
    """Convex restriction around ``state``: the signal constraint is linearized."""
    N = ch.N
    n = N + 2
    noise = params.noise
    I = np.eye(N)
    U = np.zeros((1 + 2 * N, n))
    U[0, 0] = 1.0
    U[1:N + 1, 0] = 1.0
    U[1:N + 1, 2:] = 2.0 * I
    U[N + 1:, 2:] = 2.0 * I
    a = np.concatenate(([1.0], ch.h, np.full(N, noise)))
    V = np.zeros((N + 1, n))
    V[:, 1] = -1.0
    V[1:, 2:] = 2.0 * I
    b = np.concatenate(([1.0], ch.g))
    c = -math.log(psi_val) - math.log(noise)
    rg = np.sqrt(ch.h * ch.g)
    wts = rg * np.exp(state.alpha - state.alpha.max())
    omega = wts / wts.sum()
    lse0 = log_sum_exp(rg, state.alpha)
    w = np.concatenate(([1.0, -1.0], 2.0 * omega))
    e = 2.0 * lse0 - 2.0 * float(omega @ state.alpha)
    return LseProgram(a, U, np.full(n, LOG_FLOOR), b, V, c, w, e)


def sca_step(state: ScaState, d: float, ch: ChannelRealization, task: TaskSpec,
             params: SystemParams) -> ScaState:
    """Solve one convexified subproblem starting from ``state``."""
    pv = psi(d, task, params)
    prob = sca_subproblem(state, pv, ch, params)
    x0 = _restore_interior(state.x, pv, ch, params.noise)
    res = solve_lse_program(prob, x0, tol=params.tol_newton)
    x = _restore_interior(res.x, pv, ch, params.noise)
    return ScaState(x[0], x[1], x[2:].copy(), state.iter + 1, _objective_log(x, ch, params.noise))


def _sca_python(d, ch, task, params, max_iter):
    state = feasible_start(d, ch, task, params)
    trace = [state.Ybar]
    for _ in range(max_iter):
        nxt = sca_step(state, d, ch, task, params)
        if nxt.Ybar > state.Ybar:
            # barrier inexactness near the fixed point; keep the incumbent
            trace.append(state.Ybar)
            return state, trace, True
        trace.append(nxt.Ybar)
        converged = abs(nxt.Ybar - state.Ybar) < params.tol_sca
        state = nxt
        if converged:
            return state, trace, True
    return state, trace, False


def sca_solve(d: float, ch: ChannelRealization, task: TaskSpec, params: SystemParams,
              max_iter: int = MAX_SCA_ITER):
    """Run the SCA loop from :func:`feasible_start`. Returns ``(Ybar, state, trace)``."""
    core = _backend.core()
    if core is None:
        state, trace, ok = _sca_python(d, ch, task, params, max_iter)
    else:
        pv = psi(d, task, params)
        x, trace, ok = core.sca_solve(np.ascontiguousarray(ch.h), np.ascontiguousarray(ch.g),
                                      params.noise, pv, params.tol_sca, params.tol_newton,
                                      int(max_iter), LOG_FLOOR, START_MARGIN, INTERIOR_NUDGE)
        trace = list(trace)
        state = ScaState(x[0], x[1], np.array(x[2:]), len(trace) - 1, trace[-1])
    if not ok:
        raise ConvergenceError(f"SCA hit the iteration cap at d={d!r}", payload={"trace": trace})
    return state.Ybar, state, trace


class XBar:
    """Memoized ``exp(Ybar(d))`` for one scenario; ``XBar(0) = 0``."""

    def __init__(self, ch: ChannelRealization, task: TaskSpec, params: SystemParams):
        self.ch, self.task, self.params = ch, task, params
        self._cache: dict[float, tuple[float, ScaState | None, list]] = {}
        self.solves = 0

    @staticmethod
    def _key(d: float) -> float:
        if d == 0.0:
            return 0.0
        return float(f"{d:.10g}")  # ~1e-9 relative

    def entry(self, d: float):
        k = self._key(d)
        hit = self._cache.get(k)
        if hit is None:
            if d <= 0.0:
                hit = (0.0, None, [])
            else:
                y, state, trace = sca_solve(d, self.ch, self.task, self.params)
                self.solves += 1
                hit = (math.exp(y), state, trace)
            self._cache[k] = hit
        return hit

    def __call__(self, d: float) -> float:
        return self.entry(d)[0]


def af_objective(d: float, xbar: XBar) -> float:
    """Outer objective ``(T - L d / fB) / 2 * Xbar(d) + E_c(d)``."""
    task, params = xbar.task, xbar.params
    return 0.5 * (task.T - task.L * d / params.fB) * xbar(d) + local_energy(task, params, d)


@dataclass
class AfSolution:
    d: float
    t: float
    P: float
    beta: np.ndarray
    total_energy: float
    objective: float
    sca_trace: list = field(default_factory=list)
    poly_gap: float = 0.0
    method: str = "polyblock"
    iterations: int = 0
    flags: list = field(default_factory=list)


def _assemble(d, xbar: XBar, method, gap=0.0, iterations=0, flags=()):
    task, params, ch = xbar.task, xbar.params, xbar.ch
    t = 0.5 * (task.T - task.L * d / params.fB)
    obj = af_objective(d, xbar)
    _, state, trace = xbar.entry(d)
    if state is None:
        P, beta = 0.0, np.zeros(ch.N)
    else:
        P, beta = state.P, state.beta
        # scale P so the rate constraint holds with equality
        sig = np.sum(np.sqrt(ch.h * ch.g) * beta) ** 2
        noise = params.noise * (1.0 + np.sum(ch.g * beta ** 2))
        P = psi(d, task, params) * noise / sig
    total = float(np.sum(beta ** 2 * (P * ch.h + params.noise)) * t + P * t + local_energy(task, params, d))
    return AfSolution(d, t, P, beta, total, obj, list(trace), gap, method, iterations, list(flags))


def probe_xbar(xbar: XBar, points: int = 25, rtol: float = 1e-10) -> bool:
    _, d_max = d_domain(xbar.task, xbar.params)
    vals = [xbar(d) for d in np.linspace(0.0, d_max, points)]
    return all(b >= a - rtol * abs(a) for a, b in zip(vals, vals[1:]))


def offload_cutoff(xbar: XBar, points: int = 25, refine: int = 20) -> float:
    """Smallest ``d_hi`` such that no ``d > d_hi`` can beat the best probe point.

    For ``d <= d_max`` the phase length satisfies ``t(d) >= t(d_max)``, so with
    Xbar nondecreasing ``F(d) >= t(d_max) Xbar(d_hi)`` whenever ``d >= d_hi``.
    Any ``d_hi`` where that bound reaches a known objective value is a safe
    upper limit for the search.
    """
    task, params = xbar.task, xbar.params
    _, d_max = d_domain(task, params)
    t_min = 0.5 * (task.T - task.L * d_max / params.fB)
    grid = np.linspace(0.0, d_max, points)
    f_ref = min(af_objective(float(d), xbar) for d in grid)
    above = [float(d) for d in grid if t_min * xbar(float(d)) >= f_ref]
    if not above or above[0] >= d_max:
        return d_max
    hi = above[0]
    lo = hi - d_max / (points - 1)
    for _ in range(refine):
        mid = 0.5 * (lo + hi)
        if t_min * xbar(mid) >= f_ref:
            hi = mid
        else:
            lo = mid
    return hi


def solve_af_grid(task: TaskSpec, ch: ChannelRealization, params: SystemParams, steps: int = 200,
                  xbar: XBar | None = None) -> AfSolution:
    """Uniform grid over ``[0, d_max]``; also the fallback when the probe fails."""
    if steps < 2:
        raise DomainError("steps must be >= 2")
    xbar = xbar or XBar(ch, task, params)
    _, d_max = d_domain(task, params)
    grid = np.linspace(0.0, d_max, steps)
    vals = [af_objective(float(d), xbar) for d in grid]
    k = int(np.argmin(vals))
    return _assemble(float(grid[k]), xbar, "grid", iterations=steps)


def solve_af_polyblock(task: TaskSpec, ch: ChannelRealization, params: SystemParams,
                       on_probe_failure: str = "fallback", xbar: XBar | None = None) -> AfSolution:
    """Polyblock over ``(d, omega)`` maximizing ``G(d) + omega``.

    ``G(d) = L d / (2 fB) Xbar(d) - E_c(d)`` and the budget is
    ``omega + T/2 Xbar(d) <= T/2 Xbar(d_max)``.
    """
    xbar = xbar or XBar(ch, task, params)
    _, d_max = d_domain(task, params)
    if d_max <= 0.0:
        return _assemble(0.0, xbar, "polyblock")
    if not probe_xbar(xbar):
        if on_probe_failure == "raise":
            raise NumericError("Xbar(d) is not monotone on the probe grid; use solve_af_grid instead")
        return _assemble(solve_af_grid(task, ch, params, xbar=xbar).d, xbar, "grid-fallback",
                         flags=["xbar-not-monotone"])
    T, L, fB = task.T, task.L, params.fB
    # the omega box scales with Xbar at the right end; cut it where d cannot win
    d_hi = offload_cutoff(xbar)
    cap = 0.5 * T * xbar(d_hi)

    def gain(z):
        d = min(max(z[0], 0.0), d_hi)
        return L * d / (2.0 * fB) * xbar(d) - local_energy(task, params, d) + z[1]

    def budget(z):
        d = min(max(z[0], 0.0), d_hi)
        return z[1] + 0.5 * T * xbar(d)

    prob = MonotoneProblem(gain, budget, cap, np.array([d_hi, cap]), eps=params.eps_poly, probe_points=0)
    res = polyblock_maximize(prob, tol_bisect=params.tol_bisect,
                             seeds=[np.array([d_hi, 0.0]), np.array([0.0, cap])])
    d_star = float(min(max(res.x[0], 0.0), d_hi))
    sol = _assemble(d_star, xbar, "polyblock", iterations=res.iterations)
    # the recovered point sits on the budget boundary, so its value is cap - objective
    sol.poly_gap = max(0.0, res.bound - (cap - sol.objective))
    return sol
