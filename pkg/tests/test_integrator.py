import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from pseudosimple.errors import IntegrationError
from pseudosimple.fields import (CoeffsD3, PlanarParams, d3_cubic, d3_rhs, eval_field, planar_polar_rhs, planar_rhs)
from pseudosimple.integrator import evaluate_rhs, hermite, locate_crossings, refine_terminal, solve

PLANAR = PlanarParams(0.1, 1.0)


def _axis_solution(a, b, x0, t):
    """x' = a x + b x^2 in closed form."""
    E = np.exp(a * t)
    return a * x0 * E / (a + b * x0 * (1 - E))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.5), st.floats(0.2, 2.0), st.floats(-0.5, 0.02))
def test_real_axis_matches_closed_form(a, b, x0):
    # x0 <= 0.02 keeps the blow-up time ln(1 + a / (b x0)) / a beyond t = 5
    sol = solve(planar_rhs, np.array([a, b]), np.array([x0, 0.0]), (0.0, 5.0), rtol=1e-12, atol=1e-14)
    exact = _axis_solution(a, b, x0, sol.t)
    assert np.max(np.abs(sol.x[:, 0] - exact)) <= 1e-9 * (1 + np.abs(exact).max())
    assert np.all(sol.x[:, 1] == 0.0)  # the invariant axis is kept exactly


def test_agrees_with_reference_solver(warm):
    spec = d3_cubic(CoeffsD3.reference())
    x0 = np.array([0.2, 0.1, -0.3, 0.25])
    sol = solve(spec.rhs, spec.params, x0, (0.0, 40.0), rtol=1e-12, atol=1e-14)
    ref = solve_ivp(lambda t, x: eval_field(spec, x), (0.0, 40.0), x0, method="DOP853", rtol=1e-12, atol=1e-14)
    assert np.allclose(sol.x_final, ref.y[:, -1], atol=1e-8)
    assert sol.status == "max-time" and sol.t_final == 40.0


def test_dense_output_and_exact_state(warm):
    spec = d3_cubic(CoeffsD3.reference())
    x0 = np.array([0.2, 0.1, -0.3, 0.25])
    sol = solve(spec.rhs, spec.params, x0, (0.0, 10.0), rtol=1e-12, atol=1e-14)
    tq = 0.5 * (sol.t[3] + sol.t[4])
    ref = solve_ivp(lambda t, x: eval_field(spec, x), (0.0, tq), x0, method="DOP853", rtol=1e-13, atol=1e-15)
    assert np.allclose(sol.exact_state(tq), ref.y[:, -1], atol=1e-10)
    assert np.allclose(sol(tq), ref.y[:, -1], atol=1e-5)
    assert np.allclose(sol(sol.t[5]), sol.x[5])


def test_hermite_is_exact_for_cubics():
    t = np.array([0.0, 0.7, 1.5, 3.0])
    x = (t**3 - 2 * t)[:, None]
    f = (3 * t**2 - 2)[:, None]
    tq = np.linspace(0, 3, 31)
    assert np.allclose(hermite(t, x, f, tq)[:, 0], tq**3 - 2 * tq, atol=1e-12)
    assert hermite(t, x, f, 1.0).shape == (1,)


def test_evaluate_rhs_matches_numpy_evaluation():
    spec = d3_cubic(CoeffsD3.reference())
    x = np.array([0.3, -0.1, 0.2, 0.05])
    assert np.allclose(evaluate_rhs(d3_rhs, spec.params, x), eval_field(spec, x), atol=1e-15)


def test_projector_keeps_the_subspace(warm):
    spec = d3_cubic(CoeffsD3.reference())
    P = np.diag([1.0, 0.0, 1.0, 0.0])  # the plane fixed by kappa
    sol = solve(spec.rhs, spec.params, np.array([0.1, 0.0, 0.2, 0.0]), (0.0, 100.0), projector=P)
    assert np.all(sol.x[:, [1, 3]] == 0.0)


def test_escape_and_stop_statuses():
    sol = solve(planar_rhs, PLANAR.as_array(), np.array([0.5, 0.0]), (0.0, 1e3), escape_radius=10.0)
    assert sol.status == "escape-radius" and np.linalg.norm(sol.x_final) > 10.0
    sol = solve(planar_polar_rhs, PLANAR.as_array(), np.array([0.2, 0.0]), (0.0, 1e3), stop=(0, 1.0),
                rtol=1e-13, atol=1e-15)
    assert sol.status == "stop-threshold"
    t, x = refine_terminal(sol, lambda y: y[0], 1.0)
    a, b, r0 = PLANAR.alpha, PLANAR.beta, 0.2
    assert math.isclose(t, math.log((r0 + a / b) / (r0 * (1 + a / b))) / a, rel_tol=1e-11)
    assert math.isclose(x[0], 1.0, abs_tol=1e-13)


def test_blow_up_is_reported():
    with pytest.raises(IntegrationError):
        solve(planar_rhs, PLANAR.as_array(), np.array([2.0, 0.0]), (0.0, 1e3))
    sol = solve(planar_rhs, PLANAR.as_array(), np.array([2.0, 0.0]), (0.0, 1e3), strict=False)
    assert sol.status not in ("max-time", "stop-threshold")


def test_crossings_of_an_oscillation(warm):
    spec = d3_cubic(CoeffsD3.reference())
    sol = solve(spec.rhs, spec.params, np.array([0.2, 0.1, -0.3, 0.25]), (0.0, 200.0))
    tc, xc = locate_crossings(sol, lambda X: X[..., 2], direction=0)
    assert np.all(np.abs(xc[:, 2]) < 1e-8)
    up, _ = locate_crossings(sol, lambda X: X[..., 2], direction=1)
    down, _ = locate_crossings(sol, lambda X: X[..., 2], direction=-1)
    assert len(up) + len(down) == len(tc)


def test_chunking_does_not_change_the_result():
    spec = d3_cubic(CoeffsD3.reference())
    x0 = np.array([0.2, 0.1, -0.3, 0.25])
    a = solve(spec.rhs, spec.params, x0, (0.0, 300.0))
    b = solve(spec.rhs, spec.params, x0, (0.0, 300.0), chunk=50)
    assert np.array_equal(a.t, b.t) and np.array_equal(a.x, b.x)
