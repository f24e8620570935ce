"""DF-FDMA: solved through the TDMA problem and an energy-preserving map.

With ``E_n = P_n t`` and ``r_n = w_n t`` the FDMA problem has the same form
as the TDMA one in ``(E_n, r_n = t_n W)``, so the TDMA optimum carries over:
``t = (T fB - L d) / (2 fB)``, ``w_n = t_n W / t``, ``P_n = E_n / t``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InconsistencyError
from .scenario import ChannelRealization, SystemParams, TaskSpec, local_energy
from .tdma import TdmaSolution, solve_tdma


@dataclass(frozen=True)
class FdmaSolution:
    d: float
    t: float
    w: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    total_energy: float


def map_tdma_to_fdma(tdma: TdmaSolution, task: TaskSpec, params: SystemParams,
                     ch: ChannelRealization) -> FdmaSolution:
    d = tdma.d
    t = (task.T * params.fB - task.L * d) / (2.0 * params.fB)
    if t <= 0:
        if d > 0:
            raise InconsistencyError("zero phase length with a positive offload amount")
        t = 0.0
    slots = np.asarray(tdma.t, dtype=float)
    on = slots > 0
    w = np.zeros_like(slots)
    P = np.zeros_like(slots)
    if t > 0:
        w[on] = slots[on] * params.W / t
        P[on] = np.asarray(tdma.E)[on] / t
    Q = P * ch.h / ch.g
    total = float(np.sum((P + Q) * t)) + local_energy(task, params, d)
    return FdmaSolution(d, t, w, P, Q, total)


def map_fdma_to_tdma(sol: FdmaSolution, params: SystemParams) -> tuple[np.ndarray, np.ndarray]:
    """Inverse map: ``t_n = w_n t / W`` and ``E_n = P_n t``."""
    return sol.w * sol.t / params.W, sol.P * sol.t


def solve_fdma(task: TaskSpec, ch: ChannelRealization, params: SystemParams) -> FdmaSolution:
    return map_tdma_to_fdma(solve_tdma(task, ch, params), task, params, ch)
