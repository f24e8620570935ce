"""DF-TDMA: optimal allocation through the two-level decomposition.

With ``P_n h_n = Q_n g_n`` and ``E_n = P_n t_n`` the problem becomes convex.
For fixed ``d`` the lower level collapses to a linear program in the slot
energies whose optimum puts all energy on the relay with the smallest cost
ratio ``(1 + h_n/g_n) / h_n``; the outer problem in ``d`` is convex and is
solved by golden section.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import InconsistencyError
from .kernel import golden_search
from .scenario import (ChannelRealization, SystemParams, TaskSpec, d_domain, local_energy,
                       offload_time_budget, sigma_threshold)

__all__ = [
    "TdmaSolution", "KktResidualsTdma", "sigma_threshold", "best_relay", "lower_lp",
    "recover_slots", "recover_powers", "upper_objective", "solve_tdma", "kkt_residuals_tdma",
]


@dataclass(frozen=True)
class TdmaSolution:
    d: float
    E: np.ndarray
    t: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    U: float
    total_energy: float
    snr_common: float
    evaluations: int = 0

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.E > 0)


def best_relay(ch: ChannelRealization) -> int:
    """Index minimizing ``(1 + h/g) / h``; ties go to the lowest index."""
    ratio = (1.0 + ch.h / ch.g) / ch.h
    return int(np.argmin(ratio))


def lower_lp(d: float, ch: ChannelRealization, task: TaskSpec, params: SystemParams):
    """Closed-form optimum of the lower-level LP. Returns ``(U(d), E)``."""
    sig = sigma_threshold(d, task, params)
    n = best_relay(ch)
    E = np.zeros(ch.N)
    E[n] = sig / ch.h[n]
    U = sig * (1.0 + ch.h[n] / ch.g[n]) / ch.h[n]
    return U, E


def recover_slots(E, d: float, ch: ChannelRealization, task: TaskSpec, params: SystemParams) -> np.ndarray:
    """Slot lengths proportional to ``E_n h_n`` filling half the time budget."""
    E = np.asarray(E, dtype=float)
    tau = offload_time_budget(task, params, d)
    load = E * ch.h
    total = load.sum()
    if total <= 0:
        if d > 0:
            raise InconsistencyError("no relay carries energy although d > 0")
        return np.zeros(ch.N)
    return load * tau / (2.0 * total)


def recover_powers(E, t, ch: ChannelRealization):
    """``P_n = E_n / t_n`` and ``Q_n = P_n h_n / g_n``; idle relays get zeros."""
    E = np.asarray(E, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any((E > 0) & (t <= 0)):
        raise InconsistencyError("positive energy on a relay with a zero slot")
    P = np.zeros_like(E)
    on = t > 0
    P[on] = E[on] / t[on]
    Q = P * ch.h / ch.g
    return P, Q


def upper_objective(d: float, ch: ChannelRealization, task: TaskSpec, params: SystemParams) -> float:
    """``U(d) + E_c(d)``."""
    return lower_lp(d, ch, task, params)[0] + local_energy(task, params, d)


def _golden_d(ch, task, params):
    _, d_max = d_domain(task, params)
    n = best_relay(ch)
    ratio = (1.0 + ch.h[n] / ch.g[n]) / ch.h[n]
    core = _backend.core()
    if core is not None:
        d, f, nev = core.golden_tdma(ratio, params.noise, params.W, task.T, task.L, params.fB,
                                     params.kappa, task.D, 0.0, d_max, params.tol_golden)
        return d, nev
    count = [0]

    def f(d):
        count[0] += 1
        return ratio * sigma_threshold(d, task, params) + local_energy(task, params, d)

    d, _ = golden_search(f, 0.0, d_max, params.tol_golden)
    return d, count[0]


def solution_at(d: float, ch: ChannelRealization, task: TaskSpec, params: SystemParams,
                evaluations: int = 0) -> TdmaSolution:
    """Assemble the full TDMA allocation for a given offload amount."""
    U, E = lower_lp(d, ch, task, params)
    t = recover_slots(E, d, ch, task, params)
    P, Q = recover_powers(E, t, ch)
    on = t > 0
    snr = float(np.mean(E[on] * ch.h[on] / (t[on] * params.noise))) if on.any() else 0.0
    total = U + local_energy(task, params, d)
    return TdmaSolution(d, E, t, P, Q, U, total, snr, evaluations)


def solve_tdma(task: TaskSpec, ch: ChannelRealization, params: SystemParams) -> TdmaSolution:
    _, d_max = d_domain(task, params)
    if d_max <= 0.0:
        return solution_at(0.0, ch, task, params)
    d, nev = _golden_d(ch, task, params)
    return solution_at(d, ch, task, params, nev)


@dataclass(frozen=True)
class KktResidualsTdma:
    mu: float
    lam: float
    zeta: np.ndarray
    eta: np.ndarray
    stationarity_E: np.ndarray     # d/dE_n of the Lagrangian; zeta < 0 reported here
    stationarity_t: np.ndarray     # d/dt_n of the Lagrangian; eta < 0 reported here
    slack_rate: float              # mu * rate slack
    slack_time: float              # lambda * time slack
    slack_E: np.ndarray            # zeta_n * E_n
    slack_t: np.ndarray            # eta_n * t_n
    primal_rate: float             # rate shortfall
    primal_time: float             # time overrun
    primal_E: np.ndarray           # negative energies
    primal_t: np.ndarray           # negative slots

    def groups(self) -> dict:
        return {
            "stationarity_E": float(np.max(np.abs(self.stationarity_E), initial=0.0)),
            "stationarity_t": float(np.max(np.abs(self.stationarity_t), initial=0.0)),
            "slack_rate": abs(self.slack_rate),
            "slack_time": abs(self.slack_time),
            "slack_E": float(np.max(np.abs(self.slack_E), initial=0.0)),
            "slack_t": float(np.max(np.abs(self.slack_t), initial=0.0)),
            "primal_rate": self.primal_rate,
            "primal_time": self.primal_time,
            "primal_E": float(np.max(self.primal_E, initial=0.0)),
            "primal_t": float(np.max(self.primal_t, initial=0.0)),
        }

    @property
    def max_residual(self) -> float:
        return max(self.groups().values())


def _theta(x):
    return math.log1p(x) - x / (1.0 + x)


def kkt_residuals_tdma(sol: TdmaSolution, task: TaskSpec, params: SystemParams,
                       ch: ChannelRealization, d: float | None = None) -> KktResidualsTdma:
    """Reconstruct multipliers from the active relays and evaluate every KKT group.

    Residuals are made dimensionless: stationarity rows are divided by
    ``1 + |objective gradient|``, multipliers by their natural scale, rate
    slacks by ``max(d, 1)`` nats and time slacks by the time budget.
    """
    d = sol.d if d is None else d
    E, t = np.asarray(sol.E, float), np.asarray(sol.t, float)
    h, g = ch.h, ch.g
    noise = params.noise
    W = params.W
    tau = offload_time_budget(task, params, d)
    cost = 1.0 + h / g
    on = (E > 0) & (t > 0)
    x = np.zeros(ch.N)
    x[on] = E[on] * h[on] / (t[on] * noise)
    if on.any():
        ref = int(np.flatnonzero(on)[np.argmin(cost[on] / h[on])])
    else:
        ref = best_relay(ch)
    x_ref = x[ref]
    # energy stationarity on the reference relay (zeta = 0)
    mu = cost[ref] * params.sigma2 * (1.0 + x_ref) / h[ref]
    # d/dt_n of the Lagrangian; eta < 0 reported here on the reference relay with eta = 0
    lam = 0.5 * mu * W * _theta(x_ref)
    # idle relays: evaluate the ratio terms along the common SNR direction
    x_eval = np.where(on, x, x_ref)
    dE = mu * h / (params.sigma2 * (1.0 + x_eval))           # mu t h W / (t s2 W + E h)
    zeta = cost - dE
    zeta = np.where(on, 0.0, zeta)
    dt = np.array([_theta(v) for v in x_eval]) * mu * W
    eta = np.where(on, 0.0, 2.0 * lam - dt)

    scale_E = 1.0 + cost
    stat_E = (cost - dE - zeta) / scale_E
    stat_E = np.where(zeta < 0, zeta / scale_E, stat_E)       # dual infeasibility
    stat_t = (2.0 * lam - dt - eta) / (1.0 + mu * W)
    stat_t = np.where(eta < 0, eta / (1.0 + mu * W), stat_t)

    rate = float(np.sum(np.where(on, t * W * np.log1p(np.where(on, x, 0.0)), 0.0)))
    # complementary slackness in energy units, relative to the energy at stake
    U = float(np.sum(cost * E))
    rate_scale = max(d, 1.0)
    slack_rate = mu * (d - rate) / (mu * rate_scale + U)
    slack_time = lam * (2.0 * t.sum() - tau) / (lam * tau + U + 1e-300)
    slack_E = zeta * E / (U + 1e-300)
    slack_t = eta * t / (lam * tau + U + 1e-300)
    primal_rate = max(0.0, (d - rate) / rate_scale)
    primal_time = max(0.0, (2.0 * t.sum() - tau) / tau)
    return KktResidualsTdma(
        mu=mu, lam=lam, zeta=zeta, eta=eta,
        stationarity_E=stat_E, stationarity_t=stat_t,
        slack_rate=slack_rate, slack_time=slack_time, slack_E=slack_E, slack_t=slack_t,
        primal_rate=primal_rate, primal_time=primal_time,
        primal_E=np.maximum(0.0, -E), primal_t=np.maximum(0.0, -t),
    )
