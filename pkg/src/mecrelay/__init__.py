"""Minimum-energy resource allocation for relay-assisted computation offloading.

One mobile device splits a task of ``D`` nats into a local part and an
offloaded part ``d`` that reaches the edge server through ``N`` relays.
Three relaying policies are solved: decode-and-forward with TDMA or FDMA
relay access, and amplify-and-forward. An equal-allocation policy serves as
a baseline.
"""
from ._backend import active as active_backend, compiled_available, set_backend
from .af import AfSolution, XBar, sca_solve, solve_af_grid, solve_af_polyblock
from .baselines import EqualAllocSolution, solve_equal_alloc
from .errors import (ConvergenceError, DomainError, InconsistencyError, InfeasibleError, MecRelayError,
                     NumericError)
from .fdma import FdmaSolution, map_fdma_to_tdma, map_tdma_to_fdma, solve_fdma
from .scenario import (ChannelRealization, ConfigError, Scenario, SystemParams, TaskSpec, default_scenario,
                       sample_channels, scenario_from_config)
from .tdma import TdmaSolution, kkt_residuals_tdma, solve_tdma
from .validation import brute_force_af, brute_force_tdma, probe_midpoint_convex, probe_monotone

__version__ = "0.1.0"
