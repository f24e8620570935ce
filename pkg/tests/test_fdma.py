import numpy as np
import pytest

from mecrelay.errors import InconsistencyError
from mecrelay.fdma import map_fdma_to_tdma, map_tdma_to_fdma, solve_fdma
from mecrelay.scenario import default_scenario, fdma_rate
from mecrelay.tdma import solution_at, solve_tdma


def test_zero_offload_maps_to_zero():
    sc = default_scenario(seed=0, N=3, D_nats=0.0)
    f = solve_fdma(sc.task, sc.channels, sc.params)
    assert f.total_energy == 0.0
    assert np.all(f.w == 0.0) and np.all(f.P == 0.0)


def test_single_active_relay_gets_all_bandwidth():
    sc = default_scenario(seed=0, N=3)
    t = solve_tdma(sc.task, sc.channels, sc.params)
    f = map_tdma_to_fdma(t, sc.task, sc.params, sc.channels)
    n = t.active[0]
    assert f.w[n] == pytest.approx(sc.params.W, rel=1e-14)
    assert f.w.sum() == pytest.approx(sc.params.W, rel=1e-14)


@pytest.mark.parametrize("seed", range(6))
def test_equivalence_and_tightness(seed):
    sc = default_scenario(seed=seed, N=4)
    t = solve_tdma(sc.task, sc.channels, sc.params)
    f = map_tdma_to_fdma(t, sc.task, sc.params, sc.channels)
    assert abs(f.total_energy - t.total_energy) <= 1e-9 * t.total_energy
    rate = fdma_rate(f.t, f.w, f.P, sc.channels.h, sc.params).sum()
    assert rate == pytest.approx(f.d, rel=1e-6)
    assert f.w.sum() == pytest.approx(sc.params.W, rel=1e-12)


def test_round_trip():
    sc = default_scenario(seed=3, N=4)
    t = solve_tdma(sc.task, sc.channels, sc.params)
    f = map_tdma_to_fdma(t, sc.task, sc.params, sc.channels)
    slots, E = map_fdma_to_tdma(f, sc.params)
    np.testing.assert_allclose(slots, t.t, rtol=1e-14)
    np.testing.assert_allclose(E, t.E, rtol=1e-14)


def test_mapping_of_multi_relay_split():
    # a non-optimal two-relay TDMA allocation still maps to an equal-energy FDMA one
    sc = default_scenario(seed=3, N=2)
    base = solution_at(3e4, sc.channels, sc.task, sc.params)
    import dataclasses
    from mecrelay.tdma import recover_powers, recover_slots
    E = np.array([base.E.sum() * 0.4, base.E.sum() * 0.6])
    t = recover_slots(E, base.d, sc.channels, sc.task, sc.params)
    P, Q = recover_powers(E, t, sc.channels)
    split = dataclasses.replace(base, E=E, t=t, P=P, Q=Q)
    f = map_tdma_to_fdma(split, sc.task, sc.params, sc.channels)
    expected = float(np.sum(E * (1 + sc.channels.h / sc.channels.g))) + (split.total_energy - split.U)
    assert f.total_energy == pytest.approx(expected, rel=1e-12)
    assert f.w.sum() == pytest.approx(sc.params.W, rel=1e-12)


def test_zero_phase_with_positive_d_is_inconsistent():
    import dataclasses
    sc = default_scenario(seed=0, N=2, T_s=0.01, D_nats=2e6)
    cap = sc.params.fB * sc.task.T / sc.task.L
    base = solution_at(1e4, sc.channels, sc.task, sc.params)
    bad = dataclasses.replace(base, d=cap)
    with pytest.raises(InconsistencyError):
        map_tdma_to_fdma(bad, sc.task, sc.params, sc.channels)
