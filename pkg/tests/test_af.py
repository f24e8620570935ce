import math

import numpy as np
import pytest

from mecrelay import _backend
from mecrelay.af import (AfSolution, XBar, af_objective, feasible_start, probe_xbar, sca_solve, sca_step,
                         solve_af_grid, solve_af_polyblock)
from mecrelay.errors import ConvergenceError, DomainError, NumericError
from mecrelay.scenario import (ChannelRealization, af_rate, af_snr, d_domain, default_scenario, local_energy,
                               offload_time_budget, psi)
from mecrelay.validation import brute_force_af, default_af_grid


def _d_for_psi(target, task, params):
    # psi(d) = target  <=>  d = W tau ln(1 + target) / 2 with tau = T - L d / fB
    k = 0.5 * params.W * math.log1p(target)
    return k * task.T / (1.0 + k * task.L / params.fB)


def test_feasible_start_formula():
    sc = default_scenario(seed=0, N=1)
    ch = ChannelRealization([1.0], [1.0])
    d = _d_for_psi(3.0, sc.task, sc.params)
    assert psi(d, sc.task, sc.params) == pytest.approx(3.0, rel=1e-12)
    st = feasible_start(d, ch, sc.task, sc.params, margin=0.0)
    assert st.P == pytest.approx(6.0 * sc.params.noise, rel=1e-12)
    np.testing.assert_allclose(st.beta, [1.0])


@pytest.mark.parametrize("seed", range(4))
def test_feasible_start_is_feasible(seed):
    sc = default_scenario(seed=seed, N=3)
    d = 0.6 * sc.task.D
    st = feasible_start(d, sc.channels, sc.task, sc.params)
    assert af_snr(st.P, st.beta, sc.channels, sc.params) >= psi(d, sc.task, sc.params)


def test_feasible_start_rejects_zero():
    sc = default_scenario(seed=0, N=2)
    with pytest.raises(DomainError):
        feasible_start(0.0, sc.channels, sc.task, sc.params)


def test_sca_trace_monotone_and_converged(backend):
    sc = default_scenario(seed=1, N=3)
    y, st, trace = sca_solve(5e4, sc.channels, sc.task, sc.params)
    assert np.all(np.diff(trace) <= 0.0)
    assert abs(trace[-1] - trace[-2]) < sc.params.tol_sca
    assert len(trace) - 1 <= 50
    assert y == trace[-1]
    # the returned point is feasible for the original constraint
    assert af_snr(st.P, st.beta, sc.channels, sc.params) >= psi(5e4, sc.task, sc.params) * (1 - 1e-9)


def test_sca_fixed_point(backend):
    sc = default_scenario(seed=2, N=2)
    d = 4e4
    y, st, _ = sca_solve(d, sc.channels, sc.task, sc.params)
    nxt = sca_step(st, d, sc.channels, sc.task, sc.params)
    assert abs(nxt.Ybar - y) < sc.params.tol_sca


def test_sca_backends_agree():
    if not _backend.compiled_available():
        pytest.skip("compiled core not built")
    sc = default_scenario(seed=4, N=3)
    out = {}
    for name in ("python", "compiled"):
        with _backend.using(name):
            out[name] = sca_solve(3e4, sc.channels, sc.task, sc.params)
    assert out["python"][0] == pytest.approx(out["compiled"][0], abs=1e-10)
    assert len(out["python"][2]) == len(out["compiled"][2])


def test_sca_iteration_cap():
    sc = default_scenario(seed=1, N=3)
    with pytest.raises(ConvergenceError) as exc:
        sca_solve(5e4, sc.channels, sc.task, sc.params, max_iter=1)
    assert "trace" in exc.value.payload


@pytest.mark.parametrize("seed", [0, 1])
def test_sca_matches_oracle_n1(seed):
    sc = default_scenario(seed=seed, N=1)
    d = 6e4
    _, st, _ = sca_solve(d, sc.channels, sc.task, sc.params)
    ora = brute_force_af(sc.task, sc.channels, sc.params, default_af_grid(sc.task, sc.params, d=d))
    assert st.P == pytest.approx(ora.allocation["P"], rel=1e-3)
    assert st.beta[0] == pytest.approx(ora.allocation["beta"], rel=1e-3)


def test_xbar_basics():
    sc = default_scenario(seed=3, N=2)
    xb = XBar(sc.channels, sc.task, sc.params)
    assert xb(0.0) == 0.0
    _, d_max = d_domain(sc.task, sc.params)
    small = xb(1e-3 * d_max)
    assert 0.0 < small < 1e-2 * xb(0.5 * d_max)
    assert xb(1e-4 * d_max) < small
    # memoized
    n = xb.solves
    xb(0.5 * d_max)
    assert xb.solves == n


def test_xbar_monotone_50_points():
    sc = default_scenario(seed=5, N=3)
    xb = XBar(sc.channels, sc.task, sc.params)
    _, d_max = d_domain(sc.task, sc.params)
    vals = [xb(d) for d in np.linspace(0.0, d_max, 50)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    assert probe_xbar(xb)


def test_xbar_close_to_oracle_n1():
    sc = default_scenario(seed=2, N=1)
    xb = XBar(sc.channels, sc.task, sc.params)
    for d in (2e4, 5e4, 7.5e4):
        ora = brute_force_af(sc.task, sc.channels, sc.params, default_af_grid(sc.task, sc.params, d=d))
        t = 0.5 * offload_time_budget(sc.task, sc.params, d)
        x_ora = (ora.energy - local_energy(sc.task, sc.params, d)) / t
        assert xb(d) >= x_ora * (1 - 1e-3)
        assert xb(d) <= x_ora * (1 + 1e-3)


def test_polyblock_zero_data():
    sc = default_scenario(seed=0, N=2, D_nats=0.0)
    sol = solve_af_polyblock(sc.task, sc.channels, sc.params)
    assert sol.d == 0.0 and sol.total_energy == 0.0


@pytest.mark.parametrize("seed", [0, 7])
def test_polyblock_against_grid(seed):
    sc = default_scenario(seed=seed, N=2)
    xb = XBar(sc.channels, sc.task, sc.params)
    poly = solve_af_polyblock(sc.task, sc.channels, sc.params, xbar=xb)
    grid = solve_af_grid(sc.task, sc.channels, sc.params, steps=200, xbar=xb)
    assert abs(poly.objective - grid.objective) <= sc.params.eps_poly
    assert poly.poly_gap <= sc.params.eps_poly
    assert poly.total_energy == pytest.approx(poly.objective, rel=1e-9)
    # rate constraint at equality
    rate = af_rate(poly.t, poly.P, poly.beta, sc.channels, sc.params)
    assert rate == pytest.approx(poly.d, rel=1e-6)
    # a grid through d* cannot undercut the polyblock objective by more than eps
    _, d_max = d_domain(sc.task, sc.params)
    pts = np.append(np.linspace(0.0, d_max, 50), poly.d)
    assert min(af_objective(float(d), xb) for d in pts) >= poly.objective - sc.params.eps_poly


def test_grid_endpoints_only():
    sc = default_scenario(seed=0, N=2)
    xb = XBar(sc.channels, sc.task, sc.params)
    _, d_max = d_domain(sc.task, sc.params)
    sol = solve_af_grid(sc.task, sc.channels, sc.params, steps=2, xbar=xb)
    assert sol.objective == min(af_objective(0.0, xb), af_objective(d_max, xb))
    with pytest.raises(DomainError):
        solve_af_grid(sc.task, sc.channels, sc.params, steps=1, xbar=xb)


class _Bumpy(XBar):
    """Xbar with an artificial dip, to exercise the probe."""

    def __call__(self, d):
        v = super().__call__(d)
        _, d_max = d_domain(self.task, self.params)
        return v * (0.5 if 0.4 * d_max < d < 0.6 * d_max else 1.0)


def test_probe_failure_falls_back_or_raises():
    sc = default_scenario(seed=0, N=1, D_nats=3e4)
    xb = _Bumpy(sc.channels, sc.task, sc.params)
    sol = solve_af_polyblock(sc.task, sc.channels, sc.params, xbar=xb)
    assert "xbar-not-monotone" in sol.flags
    assert sol.method == "grid-fallback"
    with pytest.raises(NumericError):
        solve_af_polyblock(sc.task, sc.channels, sc.params, on_probe_failure="raise", xbar=xb)


def test_offload_cutoff_is_safe():
    from mecrelay.af import offload_cutoff
    sc = default_scenario(seed=0, N=2, D_nats=1.2e5)
    xb = XBar(sc.channels, sc.task, sc.params)
    _, d_max = d_domain(sc.task, sc.params)
    d_hi = offload_cutoff(xb)
    assert 0.0 < d_hi < d_max
    left = min(af_objective(float(d), xb) for d in np.linspace(0.0, d_hi, 40))
    right = min(af_objective(float(d), xb) for d in np.linspace(d_hi, d_max, 40))
    assert right >= left
