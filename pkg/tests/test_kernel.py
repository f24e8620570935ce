import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mecrelay.errors import ConvergenceError, DomainError, InfeasibleError, NumericError
from mecrelay.kernel import (LseProgram, MonotoneProblem, ScalarProblem, bisect_increasing, bracket_increasing,
                             golden_iteration_bound, golden_search, log_sum_exp, polyblock_maximize,
                             solve_lse_program)
from mecrelay.scenario import d_domain, local_energy
from mecrelay.tdma import upper_objective


# ------------------------------------------------------------ golden section

def test_golden_quadratic():
    x, fx = golden_search(lambda x: (x - 3.0) ** 2, 0.0, 10.0, 1e-8)
    assert x == pytest.approx(3.0, abs=1e-7)
    assert fx < 1e-13


def test_golden_nonsmooth():
    x, _ = golden_search(lambda x: abs(x - 0.25), 0.0, 1.0, 1e-10)
    assert x == pytest.approx(0.25, abs=1e-9)


def test_golden_boundary_minimizer_is_exact():
    assert golden_search(lambda x: x, 2.0, 5.0)[0] == 2.0
    assert golden_search(lambda x: -x, 2.0, 5.0)[0] == 5.0


def test_golden_degenerate_interval():
    assert golden_search(lambda x: x * x, 1.5, 1.5) == (1.5, 2.25)


def test_golden_evaluation_count():
    calls = []

    def f(x):
        calls.append(x)
        return (x - 0.3) ** 2

    golden_search(f, 0.0, 1.0, 1e-8)
    assert len(calls) <= golden_iteration_bound(1e-8) + 4


def test_golden_errors():
    with pytest.raises(DomainError):
        golden_search(lambda x: x, 1.0, 0.0)
    with pytest.raises(NumericError) as exc:
        golden_search(lambda x: math.nan, 0.0, 1.0)
    assert "x" in exc.value.payload
    with pytest.raises(DomainError):
        ScalarProblem(lambda x: x, 0.0, 1.0, tol=0.0)


def test_golden_on_tdma_upper_objective(sc3):
    t, p, ch = sc3.task, sc3.params, sc3.channels
    _, d_max = d_domain(t, p)
    f = lambda d: upper_objective(d, ch, t, p)
    x, fx = ScalarProblem(f, 0.0, d_max, 1e-8).solve()
    grid = np.linspace(0.0, d_max, 10_000)
    vals = np.array([f(d) for d in grid])
    k = int(np.argmin(vals))
    assert abs(x - grid[k]) <= d_max / 9_999
    assert fx <= vals[k] + 1e-15


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(0.1, 10), st.floats(-10, 0), st.floats(0.5, 20))
def test_golden_finds_vertex_of_convex_functions(c, a, lo, width):
    hi = lo + width
    x, _ = golden_search(lambda x: a * (x - c) ** 2 + abs(x - c), lo, hi, 1e-10)
    assert x == pytest.approx(min(max(c, lo), hi), abs=1e-8 * width + 1e-12)


# ------------------------------------------------------------ bracketing

@pytest.mark.parametrize("method", ["illinois", "bisect"])
def test_bracket_increasing(method):
    root = 0.3141592653589793
    a, b, fa = bracket_increasing(lambda x: x ** 3 - root ** 3, 0.0, 1.0, 1e-12, method=method)
    assert a <= root < b or a == pytest.approx(root, abs=1e-12)
    assert b - a <= 1e-12
    assert fa <= 0


def test_bracket_requires_sign():
    with pytest.raises(DomainError):
        bracket_increasing(lambda x: x + 1.0, 0.0, 1.0, 1e-9)
    # whole interval feasible: the upper end is returned
    assert bracket_increasing(lambda x: x - 2.0, 0.0, 1.0, 1e-9)[0] == 1.0


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.5, 40.0))
def test_illinois_and_bisect_agree(root, k):
    phi = lambda x: math.expm1(k * (x - root))
    a1 = bracket_increasing(phi, 0.0, 1.0, 1e-11, method="illinois")[0]
    a2 = bisect_increasing(phi, 0.0, 1.0, 1e-11)
    assert abs(a1 - a2) <= 2e-11


# ------------------------------------------------------------ log-sum-exp

def test_log_sum_exp_values():
    assert log_sum_exp([1.0], [4.2]) == pytest.approx(4.2, abs=1e-15)
    assert log_sum_exp([1.0, 1.0], [0.0, 0.0]) == pytest.approx(math.log(2.0), abs=1e-15)
    # shift identity without overflow; 30-digit reference 711.098642554829926451530
    v = log_sum_exp([2.0, 3.0], [700.0, 710.0])
    assert v == pytest.approx(710.0 + math.log(3.0 + 2.0 * math.exp(-10.0)), abs=1e-12)
    assert v == pytest.approx(711.098642554829926451530, abs=1e-12)


def test_log_sum_exp_errors():
    with pytest.raises(DomainError):
        log_sum_exp([], [])
    with pytest.raises(DomainError):
        log_sum_exp([1.0, -1.0], [0.0, 0.0])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(1e-3, 1e3), st.floats(-700, 700)), min_size=1, max_size=8),
       st.floats(-100, 100))
def test_log_sum_exp_shift_invariance(terms, shift):
    w, x = map(np.array, zip(*terms))
    assert log_sum_exp(w, x + shift) == pytest.approx(log_sum_exp(w, x) + shift, abs=1e-9 * (1 + abs(shift)))
    assert log_sum_exp(w, x) >= np.max(np.log(w) + x) - 1e-12


# ------------------------------------------------------------ barrier LSE solver

def test_lse_unconstrained_hits_lower_bound():
    prob = LseProgram([1.0], [[1.0]], [-3.0])
    res = solve_lse_program(prob, [0.0])
    assert res.x[0] == pytest.approx(-3.0, abs=1e-6)
    assert res.value == pytest.approx(-3.0, abs=1e-6)


def _two_var_program():
    # min ln(e^{x0} + e^{-x0} + e^{x1} + 2 e^{-x1 + x0})  s.t. ln(e^{x0} + e^{x1}) <= 3,  x0 + 1 >= 0
    return LseProgram(
        obj_weights=[1.0, 1.0, 1.0, 2.0],
        obj_exponents=[[1, 0], [-1, 0], [0, 1], [1, -1]],
        lower=[-5.0, -5.0],
        con_weights=[1.0, 1.0], con_exponents=[[1, 0], [0, 1]], con_bound=3.0,
        aff_w=[1.0, 0.0], aff_e=1.0,
    )


def test_lse_matches_dense_grid():
    prob = _two_var_program()
    res = solve_lse_program(prob, [0.0, 0.0])
    xs = np.linspace(-1.0, 2.0, 601)
    ys = np.linspace(-2.0, 2.0, 801)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    obj = np.log(np.exp(X) + np.exp(-X) + np.exp(Y) + 2 * np.exp(X - Y))
    k = np.unravel_index(np.argmin(obj), obj.shape)
    # refine around the grid winner with a second pass
    xs2 = np.linspace(X[k] - 0.01, X[k] + 0.01, 201)
    ys2 = np.linspace(Y[k] - 0.01, Y[k] + 0.01, 201)
    X2, Y2 = np.meshgrid(xs2, ys2, indexing="ij")
    obj2 = np.log(np.exp(X2) + np.exp(-X2) + np.exp(Y2) + 2 * np.exp(X2 - Y2))
    assert res.value == pytest.approx(obj2.min(), abs=1e-4)
    assert res.value <= obj2.min() + 1e-9
    # constraints hold
    assert prob.constraint_value(res.x) <= prob.con_bound + 1e-8
    assert prob.affine_value(res.x) >= -1e-8
    assert np.all(res.x >= prob.lower - 1e-8)


def test_lse_active_constraint():
    # push the optimum onto the lse constraint: min ln(e^{-x0} + e^{-x1}) s.t. ln(e^{x0}+e^{x1}) <= 0
    prob = LseProgram([1.0, 1.0], [[-1, 0], [0, -1]], [-30.0, -30.0],
                      con_weights=[1.0, 1.0], con_exponents=[[1, 0], [0, 1]], con_bound=0.0)
    res = solve_lse_program(prob, [-2.0, -2.0])
    np.testing.assert_allclose(res.x, [-math.log(2.0)] * 2, atol=1e-6)
    assert prob.constraint_value(res.x) <= 1e-8


def test_lse_infeasible_start():
    prob = _two_var_program()
    with pytest.raises(InfeasibleError):
        solve_lse_program(prob, [-2.0, 0.0])


def test_lse_shape_errors():
    with pytest.raises(DomainError):
        LseProgram([1.0, 1.0], [[1.0, 0.0]], [0.0, 0.0])
    with pytest.raises(DomainError):
        LseProgram([1.0], [[1.0]], [0.0], con_weights=[1.0])


# ------------------------------------------------------------ polyblock

def test_polyblock_linear():
    # a flat boundary is the slow case for outer approximation; keep eps moderate
    prob = MonotoneProblem(lambda x: x.sum(), lambda x: x.sum(), 1.0, [1.0, 1.0], eps=1e-3)
    res = polyblock_maximize(prob)
    assert res.value == pytest.approx(1.0, abs=1e-9)
    assert res.gap <= 1e-3


def test_polyblock_product_on_disc():
    prob = MonotoneProblem(lambda x: x[0] * x[1], lambda x: x @ x, 1.0, [1.0, 1.0], eps=1e-5)
    res = polyblock_maximize(prob)
    assert res.value == pytest.approx(0.5, abs=1e-5)
    assert res.gap <= 1e-5
    np.testing.assert_allclose(res.x, [math.sqrt(0.5)] * 2, atol=5e-3)
    assert res.x @ res.x <= 1.0 + 1e-12
    # bounds never drop below the incumbent and shrink over time
    bounds = [b for b, _ in res.history]
    assert all(b >= v - 1e-15 for b, v in res.history)
    assert bounds[-1] <= bounds[0]


@pytest.mark.parametrize("projection", ["illinois", "bisect"])
def test_polyblock_projection_methods_agree(projection):
    prob = MonotoneProblem(lambda x: x[0] + 2 * x[1], lambda x: x[0] ** 2 + x[1] ** 3, 1.0, [1.0, 1.0], eps=1e-5)
    res = polyblock_maximize(prob, projection=projection)
    # optimum: maximize x + 2 y on x^2 + y^3 = 1
    ys = np.linspace(0, 1, 200001)
    ref = np.max(np.sqrt(np.clip(1 - ys ** 3, 0, None)) + 2 * ys)
    assert res.value == pytest.approx(ref, abs=2e-5)
    assert res.value <= ref + 1e-9


def test_polyblock_budget_error():
    prob = MonotoneProblem(lambda x: x[0] * x[1], lambda x: x @ x, 1.0, [1.0, 1.0], eps=1e-9)
    with pytest.raises(ConvergenceError) as exc:
        polyblock_maximize(prob, max_iter=5)
    assert {"x", "value", "bound", "gap"} <= set(exc.value.payload)


def test_polyblock_rejects_nonmonotone_and_infeasible():
    with pytest.raises(DomainError):
        MonotoneProblem(lambda x: -x.sum(), lambda x: x.sum(), 1.0, [1.0, 1.0])
    prob = MonotoneProblem(lambda x: x.sum(), lambda x: x.sum() + 2.0, 1.0, [1.0, 1.0])
    with pytest.raises(DomainError):
        polyblock_maximize(prob)
