import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from pseudosimple.errors import DomainError
from pseudosimple.fields import PlanarParams
from pseudosimple.planar_d3 import (SECTOR, SectorState, angle_drift_check, conserved_quantity, exit_angle_implicit,
                                    exit_bound_check, log_exit_ratio, s_integral, s_integral_closed_form, transit,
                                    transit_time_axis)

rates = st.tuples(st.floats(0.02, 0.5), st.floats(0.3, 3.0)).map(lambda ab: PlanarParams(*ab))


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-6, SECTOR - 1e-6))
def test_s_integral_against_adaptive_quadrature(theta):
    # quad copes with the integrable t^(-2/3) endpoint singularity on its own
    ref, _ = quad(lambda t: math.sin(3 * t) ** (-2 / 3), 0, theta, limit=200, epsabs=1e-13, epsrel=1e-12,
                  points=[min(theta, math.pi / 6)] if theta > math.pi / 6 else None)
    assert math.isclose(s_integral(theta), ref, rel_tol=1e-7)


def test_s_integral_endpoint_and_symmetry():
    assert math.isclose(s_integral(SECTOR), s_integral_closed_form(), rel_tol=1e-13)
    th = np.linspace(0, SECTOR, 11)
    S = s_integral(th)
    assert S[0] == 0.0 and np.all(np.diff(S) > 0)
    # sin 3t is symmetric about pi/6
    assert np.allclose(S + S[::-1], S[-1], rtol=1e-12)
    with pytest.raises(DomainError):
        s_integral(-0.1)


@settings(max_examples=20, deadline=None)
@given(rates, st.floats(0.05, 0.9), st.floats(0.02, 0.98))
def test_transit_conserves_and_scales(p, r0, frac):
    th0 = frac * SECTOR
    rec = transit(p, r0, th0, keep_solution=True)
    sol = rec.solution
    r, th = sol.x[:, 0], sol.x[:, 1]
    c = conserved_quantity(p, r, th)
    assert np.max(np.abs(c - c[0])) <= 1e-7 * abs(c[0])
    e = np.exp(-6 * p.alpha * sol.t) * r**6 * np.sin(3 * th) ** 2
    assert np.max(np.abs(e - e[0])) <= 1e-7 * e[0]
    # leaving the unit disc takes at least as long as along the unstable axis
    assert rec.tau >= transit_time_axis(p, r0) * (1 - 1e-9)
    assert 0 <= rec.theta_exit < th0


@settings(max_examples=20, deadline=None)
@given(rates, st.floats(0.05, 0.9), st.floats(0.02, 0.49))
def test_exit_angle_from_conserved_quantity(p, r0, frac):
    th0 = frac * SECTOR
    assert math.isclose(exit_angle_implicit(p, r0, th0), transit(p, r0, th0).theta_exit, rel_tol=1e-7, abs_tol=1e-13)


@settings(max_examples=20, deadline=None)
@given(rates, st.floats(0.05, 0.9), st.floats(0.01, 0.49))
def test_exit_bounds_hold(p, r0, frac):
    rep = exit_bound_check(p, r0, frac * SECTOR)
    assert rep.passed


def test_axis_transit_closed_form():
    p = PlanarParams(0.1, 1.0)
    ref, _ = quad(lambda r: 1 / (p.alpha * r + p.beta * r * r), 0.3, 1.0, epsrel=1e-13)
    assert math.isclose(transit_time_axis(p, 0.3), ref, rel_tol=1e-12)
    assert transit(p, 0.3, 0.0).theta_exit == 0.0
    for bad in (0.0, 1.0, 1.5):
        with pytest.raises(DomainError):
            transit_time_axis(p, bad)


def test_log_exit_ratio_is_finite_near_the_saddle():
    p = PlanarParams(0.05, 1.0)
    val = log_exit_ratio(p, 0.01, 1e-3)
    assert math.isfinite(val)


def test_angle_drift_bound():
    eps = 0.4
    rep = angle_drift_check(PlanarParams(0.05, 1.0), eps)
    assert rep.precondition and rep.passed and rep.max_r_sin_theta < eps
    assert rep.n_trajectories == 30
    # the maxima of r sin(theta) sit where alpha = 2 beta r cos(theta)
    assert rep.turning_point_residual < 1e-2
    with pytest.raises(DomainError):
        angle_drift_check(PlanarParams(0.05, 1.0), -1.0)


def test_sector_state_clamps():
    assert SectorState(0.5, 2.0).theta == SECTOR
    with pytest.raises(ValueError):
        SectorState(-1.0, 0.1)


def test_domain_checks():
    p = PlanarParams(0.1, 1.0)
    with pytest.raises(DomainError):
        transit(p, 0.5, SECTOR)
    with pytest.raises(DomainError):
        exit_bound_check(p, 0.5, math.pi / 6)
