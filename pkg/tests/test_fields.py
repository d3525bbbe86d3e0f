import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudosimple import quaternions as qt
from pseudosimple.errors import InvarianceViolationError, NoEquilibriumError
from pseudosimple.fields import (CoeffsD3, CoeffsGL, GLParametrization, PlanarParams, analytic_values, axis_restriction,
                                 cycle_rates, d3_axis_direction, d3_cubic, d3_tilde_cubic, equilibria_on_axes,
                                 eval_field, existence_report, gl23_cubic, jacobian, planar_d3, restrict,
                                 verify_equivariance)

FAMILIES = {
    "d3": lambda: d3_cubic(CoeffsD3.reference()),
    "tilde": lambda: d3_tilde_cubic(CoeffsD3.reference_tilde()),
    "gl": lambda: gl23_cubic(GLParametrization(0.8, 0.001)),
    "planar": lambda: planar_d3(PlanarParams(0.1, 1.0)),
}

points = st.lists(st.floats(-1.5, 1.5, allow_nan=False), min_size=4, max_size=4).map(np.array)
gl_params = st.tuples(st.floats(0.55, 0.97), st.floats(1e-4, 0.02))


@pytest.mark.parametrize("name", FAMILIES)
def test_equivariance(name):
    assert verify_equivariance(FAMILIES[name](), samples=50, seed=3, scale=2.0) <= 1e-9


@pytest.mark.parametrize("name", ["d3", "tilde", "gl"])
@settings(max_examples=25, deadline=None)
@given(x=points)
def test_jacobian_matches_finite_differences(name, x):
    spec = FAMILIES[name]()
    h = 1e-6
    J = np.column_stack([(eval_field(spec, x + h * e) - eval_field(spec, x - h * e)) / (2 * h) for e in np.eye(4)])
    assert np.allclose(jacobian(spec, x), J, atol=1e-6)


def test_batch_evaluation_matches_pointwise():
    spec = FAMILIES["gl"]()
    X = np.random.default_rng(0).normal(size=(7, 4))
    batch = eval_field(spec, X)
    assert np.allclose(batch, np.array([eval_field(spec, x) for x in X]))
    with pytest.raises(ValueError):
        eval_field(spec, np.zeros(3))


def test_coefficient_constraints():
    ref = CoeffsD3.reference()
    assert math.isclose(ref.alpha, 0.3) and math.isclose(ref.alpha_prime, 0.2)
    with pytest.raises(ValueError):
        replace(ref, a5=0.0)
    with pytest.raises(ValueError):
        replace(ref, a7=-0.5)
    with pytest.raises(ValueError):
        replace(ref, tilde=True)  # a9 != a10 in the reference table
    assert d3_tilde_cubic(replace(ref, a10=ref.a9, b3=ref.b2)).coeffs.tilde
    with pytest.raises(ValueError):
        GLParametrization(1.2, 0.001)
    with pytest.raises(ValueError):
        GLParametrization(0.8, 0.0)
    with pytest.raises(ValueError):
        PlanarParams(-0.1, 1.0)


@pytest.mark.parametrize("name", ["d3", "tilde", "gl"])
def test_numeric_and_closed_form_spectra_agree(name):
    spec = FAMILIES[name]()
    for rep in equilibria_on_axes(spec):
        assert rep.residual < 1e-12
        assert np.allclose(rep.values(), analytic_values(spec, rep.label), atol=1e-9)


@settings(max_examples=15, deadline=None)
@given(gl_params)
def test_gl_spectra_over_the_parameter_plane(hp):
    spec = gl23_cubic(GLParametrization(*hp))
    for rep in equilibria_on_axes(spec):
        assert np.allclose(rep.values(), analytic_values(spec, rep.label), atol=1e-8)
        # equilibria are fixed points of the flow
        assert np.linalg.norm(eval_field(spec, rep.position)) < 1e-10


def test_gl_parametrization_fixes_xi2_radius():
    for h1, h2 in [(0.7, 0.001), (0.92, 0.0028)]:
        spec = gl23_cubic(GLParametrization(h1, h2))
        xi2 = equilibria_on_axes(spec)[1].position
        assert math.isclose(0.5 * xi2 @ xi2, 0.5, rel_tol=1e-10)


def test_existence_reports():
    assert existence_report(FAMILIES["d3"]()).passed
    assert existence_report(FAMILIES["gl"]()).passed
    rep = existence_report(FAMILIES["tilde"]())
    assert rep.get("h>1").passed
    bad = gl23_cubic(CoeffsGL(mu=1.0, b=1.0, c=0.0, d=1.0, e=0.0))
    r = existence_report(bad)
    assert not r.passed
    missing = [c.name.split("-")[0] for c in r.failures() if c.name.startswith("xi")]
    assert missing
    with pytest.raises(NoEquilibriumError):
        analytic_values(bad, missing[0])


def test_negative_alpha_has_no_equilibria():
    cf = CoeffsD3.from_rates(-0.1, 0.2, 0.3, -0.05, a6=0.6, a9=0.1, a10=0.15, b1=0.2, b2=-0.1, b3=-0.09, b4=-0.1,
                             b5=-1.0, b6=-1.0)
    assert not existence_report(d3_cubic(cf)).passed


def test_reference_rates():
    r = cycle_rates(FAMILIES["d3"]())
    assert r.double_at_xi1 == "contracting"
    assert math.isclose(r.c1, 0.204, abs_tol=5e-4) and math.isclose(r.e2, 0.0041, abs_tol=5e-4)
    assert math.isclose(cycle_rates(FAMILIES["tilde"]()).h, 2.3179, abs_tol=1e-4)


def test_axis_restriction_is_pitchfork():
    spec = FAMILIES["d3"]()
    m, q, K = axis_restriction(spec, d3_axis_direction())
    assert math.isclose(m, spec.coeffs.alpha, rel_tol=1e-10)
    assert abs(q) < 1e-12 and K < 0
    assert math.isclose(math.sqrt(-m / K), math.sqrt(spec.coeffs.alpha), rel_tol=1e-10)


def test_restriction_to_fixed_planes():
    spec = FAMILIES["d3"]()
    plane = qt.fixed_subspace(qt.cyclic_closure(qt.d3_kappa()))
    red = restrict(spec, plane)
    assert red.dim == 2 and red.residual < 1e-12
    u = np.array([0.3, -0.2])
    assert np.allclose(red(u) @ plane.basis, eval_field(spec, u @ plane.basis), atol=1e-12)
    generic = qt.LinearSubspace.from_vectors([[1, 1, 1, 0], [0, 1, 0, 1]])
    with pytest.raises(InvarianceViolationError):
        restrict(spec, generic)
