import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from pseudosimple.errors import DegenerateAngleError, DomainError
from pseudosimple.fields import CoeffsD3, cycle_rates, d3_tilde_cubic
from pseudosimple.maps import (CycleData, InstabilityModel, PeriodicOrbitModel, ReflectionModel, SectionPoint,
                               choose_dihedral_shift, cycle_data_from_rates, escape_angle_bound,
                               iterate_return_map, periodic_regime, phi1, phi2_d3, phi2_simple, psi_global,
                               reflection_contraction)

PERIODIC = CycleData(0.204067, 0.283406, 0.483406, 0.004, A=1.0, Theta=5 * math.pi / 6, B11=0.8, B12=0.5, B21=0.3,
                     B22=0.7, v01=0.5, v02=0.6, beta=1.0)
GENERIC = CycleData(1, 1, 1, 1, Theta=math.pi / 6, v01=0.5)


def test_cycle_data_validation():
    with pytest.raises(ValueError):
        CycleData(-1, 1, 1, 1)
    with pytest.raises(ValueError):
        CycleData(1, 1, 1, 1, v01=1.5)
    with pytest.raises(ValueError):
        CycleData(1, 1, 1, 1, k=2)
    assert math.isclose(CycleData(1, 2, 3, 4).h, 3 / 8)


def test_local_maps():
    rho, th = phi1(PERIODIC, 0.01, 0.2)
    assert math.isclose(rho, PERIODIC.v01 * 0.01 ** (PERIODIC.c1 / PERIODIC.e1))
    assert math.isclose(th, math.atan(0.2 / PERIODIC.v01))
    with pytest.raises(DomainError):
        phi1(PERIODIC, -0.01, 0.2)
    v, q = phi2_simple(GENERIC, 0.1, 0.2)
    assert math.isclose(v, GENERIC.v02 * (0.1 * math.cos(0.2)) ** (GENERIC.c2 / GENERIC.e2))
    with pytest.raises(DomainError):
        phi2_simple(GENERIC, 0.1, 2.0)


def test_planar_passage_respects_the_dihedral_symmetry():
    v, s = phi2_d3(PERIODIC, 0.1, 0.3)
    v2, s2 = phi2_d3(PERIODIC, 0.1, 0.3 + 2 * math.pi / 3)
    v3, s3 = phi2_d3(PERIODIC, 0.1, -0.3)
    assert math.isclose(v, v2, rel_tol=1e-12) and math.isclose(s, s2, rel_tol=1e-12)
    assert math.isclose(v, v3, rel_tol=1e-12) and math.isclose(s, -s3, rel_tol=1e-12)
    assert phi2_d3(PERIODIC, 0.0, 0.3) == (0.0, 0.0)
    with pytest.raises(ValueError):
        phi2_d3(PERIODIC, 0.1, 0.3, angle="cos")


@given(st.floats(-20, 20))
def test_dihedral_shift_lands_in_the_sector(theta):
    s = choose_dihedral_shift(theta)
    t = (theta + 2 * math.pi * s / 3 + math.pi) % (2 * math.pi) - math.pi
    assert -math.pi / 3 - 1e-12 < t <= math.pi / 3 + 1e-12


@given(st.floats(-1, 1), st.floats(-1, 1))
def test_global_maps(v, q):
    p = psi_global(PERIODIC, "linear", SectionPoint(v, q, polar=False))
    assert np.allclose(p.cartesian, [0.8 * v + 0.5 * q, 0.3 * v + 0.7 * q])
    r = psi_global(PERIODIC, "rotation", SectionPoint(abs(v), q))
    assert math.isclose(r.b, q + PERIODIC.Theta)
    d0 = psi_global(PERIODIC, "dihedral", SectionPoint(abs(v), q), l=0)
    d1 = psi_global(PERIODIC, "dihedral", SectionPoint(abs(v), q), l=1)
    assert math.isclose(d0.b, -d1.b)


def test_global_map_argument_checks():
    with pytest.raises(ValueError):
        psi_global(PERIODIC, "linear", SectionPoint(0.1, 0.2))
    with pytest.raises(ValueError):
        psi_global(PERIODIC, "shear", SectionPoint(0.1, 0.2))


def test_escape_angle_bound():
    b = escape_angle_bound(GENERIC)
    assert math.isclose(b.alpha, math.pi / 6)
    assert math.isclose(b.epsilon, 0.5 * math.tan(math.pi / 12))
    with pytest.raises(DegenerateAngleError):
        escape_angle_bound(GENERIC.with_(Theta=math.pi / 3))


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-8, 0.05), st.floats(-0.05, 0.05), st.floats(0.05, 3.0))
def test_generic_rotation_always_leaves(w, q, Theta):
    cd = GENERIC.with_(Theta=Theta)
    try:
        bound = escape_angle_bound(cd)
    except DegenerateAngleError:
        assume(False)
    assume(math.hypot(w, q) < bound.epsilon)
    res = iterate_return_map(InstabilityModel(cd, bound.epsilon), (w, q), 30, rho_max=10.0)
    assert res.exit_reason == "left-section"


def test_periodic_regime_fixed_point():
    r = periodic_regime(PERIODIC, 1e-3)
    assert r.regime == "periodic" and 0 < r.q < 1
    assert r.fixed_point_residual < 1e-14 * max(abs(r.fixed_point[0]), 1e-300) + 1e-20
    model = PeriodicOrbitModel(PERIODIC.with_(e2=1e-3), 1e-3, exact_local=False)
    img = model(*r.fixed_point)
    assert np.allclose(img, r.fixed_point, rtol=1e-12)
    assert periodic_regime(PERIODIC, 0.0).fixed_point == (0.0, 0.0)


def test_exact_and_closed_form_maps_converge_as_mu_shrinks():
    gaps = []
    for mu in (1e-2, 1e-3, 1e-4):
        a = periodic_regime(PERIODIC, mu, exact_local=False).fixed_point[0]
        b = periodic_regime(PERIODIC, mu, exact_local=True).fixed_point[0]
        gaps.append(abs(a / b - 1))
    assert gaps[-1] < gaps[0] and gaps[-1] < 0.01


def test_regimes_split_at_three_c1_equal_e1():
    assert periodic_regime(PERIODIC.with_(c1=0.05), 1e-3).regime == "escape"
    assert periodic_regime(PERIODIC.with_(c1=PERIODIC.e1 / 3), 1e-3).regime == "degenerate"
    with pytest.raises(DomainError):
        periodic_regime(PERIODIC, -1.0)


def test_reflection_cycle_contracts():
    rates = cycle_rates(d3_tilde_cubic(CoeffsD3.reference_tilde()))
    cd = cycle_data_from_rates(rates, B22=0.7)
    rep = reflection_contraction(cd, rho=0.1, theta=0.2)
    assert rep.rho_contracts and rep.theta_contracts and math.isclose(rep.h, 2.3179, abs_tol=1e-4)
    res = iterate_return_map(ReflectionModel(cd), (0.05, 0.3), 12)
    assert res.exit_reason == "completed"
    assert res.points[-1][0] < 1e-12
    with pytest.raises(DomainError):
        reflection_contraction(cd.with_(Theta=0.1))


def test_reflection_cycle_with_small_h_is_not_contracting():
    cd = CycleData(0.5, 0.3, 0.1, 0.6, B12=0.0, B21=0.0, B22=0.7)
    assert not reflection_contraction(cd).rho_contracts


def test_iteration_accepts_section_points():
    res = iterate_return_map(ReflectionModel(CycleData(0.5, 0.3, 0.6, 0.2, B12=0.0, B21=0.0)),
                             SectionPoint(0.05, 0.3), 3)
    assert res.n == 3 and res.points.shape == (4, 2)
