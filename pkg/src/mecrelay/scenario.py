"""Physical model: task, system parameters, channels and elementary formulas.

All data amounts are in nats. Gains are linear power gains.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Any, Mapping

import numpy as np

from .errors import DomainError, InfeasibleError


@dataclass(frozen=True)
class TaskSpec:
    """Computation task ``(T, D, L)``: deadline [s], input size [nats], cycles per nat."""

    T: float
    D: float
    L: float

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise DomainError(f"T must be positive, got {self.T!r}")
        if not (self.D >= 0 and math.isfinite(self.D)):
            raise DomainError(f"D must be nonnegative, got {self.D!r}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise DomainError(f"L must be positive, got {self.L!r}")


@dataclass(frozen=True)
class SystemParams:
    W: float = 1e6
    sigma2: float = 1e-14
    kappa: float = 1e-25
    fB: float = 5e9
    eps_poly: float = 1e-5
    tol_golden: float = 1e-8
    tol_sca: float = 1e-8
    tol_newton: float = 1e-9
    tol_bisect: float = 1e-10
    mu_margin: float = 1e-9

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"{f.name} must be positive and finite, got {v!r}")
        if self.eps_poly > 1e-3:
            raise DomainError(f"eps_poly must be <= 1e-3, got {self.eps_poly!r}")

    @property
    def noise(self) -> float:
        """Noise power over the whole band, sigma^2 * W."""
        return self.sigma2 * self.W


@dataclass(frozen=True)
class ChannelRealization:
    """Per-relay gains for one fading block: ``h`` mobile->relay, ``g`` relay->BS."""

    h: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        h = np.array(self.h, dtype=float).reshape(-1)
        g = np.array(self.g, dtype=float).reshape(-1)
        if h.size < 1 or h.shape != g.shape:
            raise DomainError("h and g must be nonempty and of equal length")
        if not (np.all(h > 0) and np.all(g > 0) and np.all(np.isfinite(h)) and np.all(np.isfinite(g))):
            raise DomainError("all channel gains must be positive and finite")
        h.flags.writeable = False
        g.flags.writeable = False
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "g", g)

    @property
    def N(self) -> int:
        return int(self.h.size)

    def scaled(self, factor: float) -> "ChannelRealization":
        return ChannelRealization(self.h * factor, self.g * factor)


def path_loss_db(distance_km: float, bandwidth_mhz: float) -> float:
    """Free-space path loss ``32.4 + 20 log10(distance) + 20 log10(bandwidth)``.

    The bandwidth term replaces the usual carrier-frequency term; this is
    kept as published.
    """
    if not (distance_km > 0 and bandwidth_mhz > 0):
        raise DomainError("distance and bandwidth must be positive")
    return 32.4 + 20.0 * math.log10(distance_km) + 20.0 * math.log10(bandwidth_mhz)


RAYLEIGH_MEAN = 0.5


def _hop_stream(seed: int, relay: int, hop: int) -> np.random.Generator:
    # one PCG64 stream per (relay, hop); hop 0 = mobile->relay, 1 = relay->BS
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(relay, hop))))


def sample_channel_components(seed: int, N: int, dist_min_km: float, dist_max_km: float,
                              params: SystemParams) -> dict:
    """Draw distances, path gains and fading factors for both hops of every relay.

    Returns a dict of ``(2, N)`` arrays (row 0: mobile->relay, row 1: relay->BS)
    under keys ``distance_km``, ``path_gain``, ``fading``.
    """
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    if not (0 < dist_min_km < dist_max_km):
        raise DomainError("need 0 < dist_min_km < dist_max_km")
    bw_mhz = params.W / 1e6
    dist = np.empty((2, N))
    fade = np.empty((2, N))
    for n in range(N):
        for hop in range(2):
            rng = _hop_stream(int(seed), n, hop)
            dist[hop, n] = rng.uniform(dist_min_km, dist_max_km)
            fade[hop, n] = rng.exponential(RAYLEIGH_MEAN)
    pl = 32.4 + 20.0 * np.log10(dist) + 20.0 * math.log10(bw_mhz)
    return {"distance_km": dist, "path_gain": 10.0 ** (-pl / 10.0), "fading": fade}


def sample_channels(seed: int, N: int, dist_min_km: float, dist_max_km: float,
                    params: SystemParams) -> ChannelRealization:
    """Path loss times an Exp(mean 0.5) Rayleigh power factor, per relay and hop."""
    c = sample_channel_components(seed, N, dist_min_km, dist_max_km, params)
    gain = c["path_gain"] * c["fading"]
    # an exponential draw of exactly 0 has probability ~2^-53; keep gains positive
    gain = np.maximum(gain, np.finfo(float).tiny)
    return ChannelRealization(gain[0], gain[1])


def local_energy(task: TaskSpec, params: SystemParams, d: float) -> float:
    """Local CPU energy ``kappa L^3 (D - d)^3 / T^2``."""
    if not (0.0 <= d <= task.D):
        raise DomainError(f"d={d!r} outside [0, {task.D!r}]")
    return params.kappa * task.L ** 3 * (task.D - d) ** 3 / task.T ** 2


def offload_time_budget(task: TaskSpec, params: SystemParams, d: float) -> float:
    """Time left for both offloading phases, ``T - L d / fB``."""
    tau = task.T - task.L * d / params.fB
    if tau < 0:
        raise InfeasibleError(f"d={d!r} exceeds the edge capacity bound fB*T/L")
    return tau


def capacity_bound(task: TaskSpec, params: SystemParams) -> float:
    """Offload amount at which the edge server uses the whole deadline."""
    return params.fB * task.T / task.L


def d_domain(task: TaskSpec, params: SystemParams) -> tuple[float, float]:
    """Admissible offload interval ``[0, d_max]``."""
    d_max = min(task.D, (1.0 - params.mu_margin) * capacity_bound(task, params))
    return 0.0, d_max


def _check_d(task, params, d):
    _, d_max = d_domain(task, params)
    if d < 0:
        raise DomainError(f"d={d!r} is negative")
    if task.L * d >= params.fB * task.T:
        raise DomainError(f"d={d!r} at or beyond the singularity L d = fB T")
    if d > task.D:
        raise DomainError(f"d={d!r} exceeds D={task.D!r}")


def psi(d: float, task: TaskSpec, params: SystemParams) -> float:
    """Receive SNR needed to carry ``d`` nats in half the time budget."""
    _check_d(task, params, d)
    tau = task.T - task.L * d / params.fB
    return math.expm1(2.0 * d / (params.W * tau))


def sigma_threshold(d: float, task: TaskSpec, params: SystemParams) -> float:
    """Minimum aggregate ``sum E_n h_n`` that carries ``d`` nats under DF-TDMA."""
    _check_d(task, params, d)
    tau = task.T - task.L * d / params.fB
    return 0.5 * params.noise * tau * math.expm1(2.0 * d / (params.W * tau))


# Rate formulas, used by the brute-force oracles and the feasibility checks.

def tdma_rate(t, E, h, params: SystemParams):
    """Per-relay DF-TDMA nats ``t W ln(1 + E h / (t sigma^2 W))`` (0 where t == 0)."""
    t = np.asarray(t, dtype=float)
    E = np.asarray(E, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = t * params.W * np.log1p(E * h / (t * params.noise))
    return np.where(t > 0, r, 0.0)


def fdma_rate(t, w, P, h, params: SystemParams):
    """Per-relay DF-FDMA nats ``t w ln(1 + P h / (sigma^2 w))`` (0 where w == 0)."""
    w = np.asarray(w, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = t * w * np.log1p(np.asarray(P) * h / (params.sigma2 * w))
    return np.where(w > 0, r, 0.0)


def af_snr(P, beta, ch: ChannelRealization, params: SystemParams):
    """End-to-end AF receive SNR for mobile power ``P`` and relay gains ``beta``."""
    beta = np.asarray(beta, dtype=float)
    sig = P * np.sum(np.sqrt(ch.h * ch.g) * beta, axis=-1) ** 2
    noise = params.noise * (1.0 + np.sum(ch.g * beta ** 2, axis=-1))
    return sig / noise


def af_rate(t, P, beta, ch: ChannelRealization, params: SystemParams):
    return t * params.W * np.log1p(af_snr(P, beta, ch, params))


# Config files -------------------------------------------------------------

CONFIG_DEFAULTS: dict[str, Any] = {
    "W_hz": 1e6,
    "sigma2_w_per_hz": 1e-14,
    "kappa": 1e-25,
    "fB_hz": 5e9,
    "L_cycles_per_nat": 50.0,
    "D_nats": 8e4,
    "T_s": 0.01,
    "N": 5,
    "dist_min_km": 0.1,
    "dist_max_km": 0.5,
    "seed": 0,
}

_OPTIONAL_KEYS = {"h", "g", "eps_poly", "tol_golden", "tol_sca", "tol_newton", "tol_bisect", "mu_margin"}


class ConfigError(DomainError):
    """A scenario config is malformed; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class Scenario:
    task: TaskSpec
    params: SystemParams
    channels: ChannelRealization
    config: dict = field(default_factory=dict)

    def with_overrides(self, **kw) -> "Scenario":
        """Re-resolve the scenario after overriding config keys (reuses explicit gains)."""
        cfg = dict(self.config)
        cfg.update(kw)
        return scenario_from_config(cfg)


def _num(cfg, key, *, integer=False):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(key, f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(key, f"expected an integer, got {v!r}")
    return int(v) if integer else float(v)


def scenario_from_config(raw: Mapping[str, Any]) -> Scenario:
    """Build a scenario from a config mapping; missing keys take the defaults."""
    unknown = set(raw) - set(CONFIG_DEFAULTS) - _OPTIONAL_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    cfg = dict(CONFIG_DEFAULTS)
    cfg.update(raw)
    vals = {k: _num(cfg, k, integer=k in ("N", "seed")) for k in CONFIG_DEFAULTS}

    def build(key, ctor):
        try:
            return ctor()
        except DomainError as exc:
            raise ConfigError(key, str(exc)) from None

    if vals["T_s"] <= 0:
        raise ConfigError("T_s", f"must be positive, got {vals['T_s']!r}")
    if vals["D_nats"] < 0:
        raise ConfigError("D_nats", f"must be nonnegative, got {vals['D_nats']!r}")
    if vals["L_cycles_per_nat"] <= 0:
        raise ConfigError("L_cycles_per_nat", f"must be positive, got {vals['L_cycles_per_nat']!r}")
    task = TaskSpec(T=vals["T_s"], D=vals["D_nats"], L=vals["L_cycles_per_nat"])

    extra = {k: _num(cfg, k) for k in _OPTIONAL_KEYS - {"h", "g"} if k in cfg}
    for key, name in (("W_hz", "W"), ("sigma2_w_per_hz", "sigma2"), ("kappa", "kappa"), ("fB_hz", "fB")):
        if vals[key] <= 0:
            raise ConfigError(key, f"must be positive, got {vals[key]!r}")
    params = build("params", lambda: SystemParams(
        W=vals["W_hz"], sigma2=vals["sigma2_w_per_hz"], kappa=vals["kappa"], fB=vals["fB_hz"], **extra))

    if ("h" in cfg) != ("g" in cfg):
        raise ConfigError("h" if "g" in cfg else "g", "h and g must be given together")
    if "h" in cfg:
        ch = build("h", lambda: ChannelRealization(cfg["h"], cfg["g"]))
        vals["N"] = ch.N
    else:
        if vals["N"] < 1:
            raise ConfigError("N", f"must be >= 1, got {vals['N']}")
        if not (0 < vals["dist_min_km"] < vals["dist_max_km"]):
            raise ConfigError("dist_min_km", "need 0 < dist_min_km < dist_max_km")
        ch = sample_channels(vals["seed"], vals["N"], vals["dist_min_km"], vals["dist_max_km"], params)
    effective = dict(cfg)
    effective.update(vals)
    if "h" in cfg:
        effective["h"] = [float(x) for x in ch.h]
        effective["g"] = [float(x) for x in ch.g]
    return Scenario(task, params, ch, effective)


def default_scenario(seed: int = 0, N: int = 5, **overrides) -> Scenario:
    cfg = {"seed": seed, "N": N}
    cfg.update(overrides)
    return scenario_from_config(cfg)


__all__ = [
    "TaskSpec", "SystemParams", "ChannelRealization", "Scenario", "ConfigError",
    "path_loss_db", "sample_channels", "sample_channel_components", "local_energy",
    "offload_time_budget", "d_domain", "capacity_bound", "psi", "sigma_threshold",
    "tdma_rate", "fdma_rate", "af_snr", "af_rate", "scenario_from_config",
    "default_scenario", "CONFIG_DEFAULTS",
]
