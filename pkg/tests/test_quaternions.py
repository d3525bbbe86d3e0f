import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudosimple import quaternions as qt
from pseudosimple.errors import DomainError, InvalidElementError

coord = st.floats(-3, 3, allow_nan=False)
quats = st.tuples(coord, coord, coord, coord).map(lambda c: qt.Quaternion(*c))
units = quats.filter(lambda q: q.norm() > 1e-3).map(lambda q: q.normalized())


def _close(a, b, tol=1e-10):
    return np.allclose(a.as_array(), b.as_array(), atol=tol)


@given(quats, quats, quats)
def test_multiplication_is_associative(a, b, c):
    assert np.allclose(((a * b) * c).as_array(), (a * (b * c)).as_array(), atol=1e-9)


@given(quats, quats)
def test_norm_is_multiplicative(a, b):
    assert math.isclose((a * b).norm(), a.norm() * b.norm(), rel_tol=1e-12, abs_tol=1e-12)


@given(quats, quats)
def test_conjugate_reverses_products(a, b):
    assert _close((a * b).conj(), b.conj() * a.conj(), 1e-9)


@given(quats, quats)
def test_multiplication_matrices(a, b):
    ab = (a * b).as_array()
    assert np.allclose(qt.left_mult_matrix(a) @ b.as_array(), ab, atol=1e-10)
    assert np.allclose(qt.right_mult_matrix(b) @ a.as_array(), ab, atol=1e-10)


def test_basis_products():
    i, j, k = qt.Quaternion(0, 1), qt.Quaternion(0, 0, 1), qt.Quaternion(0, 0, 0, 1)
    assert _close(i * j, k)
    assert _close(j * i, -k)
    assert _close(i * i, qt.Quaternion(-1.0))


def test_zero_quaternion_has_no_inverse():
    with pytest.raises((InvalidElementError, ZeroDivisionError, ValueError)):
        qt.Quaternion(0.0).inverse()


@given(units, units)
def test_pair_action_is_special_orthogonal(l, r):
    M = qt.rotation_matrix(qt.Rotation4(l, r))
    assert np.allclose(M @ M.T, np.eye(4), atol=1e-10)
    assert math.isclose(np.linalg.det(M), 1.0, abs_tol=1e-9)


@given(units, units)
def test_matrix_round_trip_up_to_sign(l, r):
    g = qt.Rotation4(l, r)
    back = qt.rotation_from_matrix(qt.rotation_matrix(g))
    assert np.allclose(qt.rotation_matrix(back), qt.rotation_matrix(g), atol=1e-8)
    # the pair is determined up to the kernel {(1;1), (-1;-1)}
    s = np.sign(np.dot(back.left.as_array(), l.as_array())) or 1.0
    assert np.allclose(back.left.as_array(), s * l.as_array(), atol=1e-7)
    assert np.allclose(back.right.as_array(), s * r.as_array(), atol=1e-7)


@given(units, units, units, units)
def test_composition_matches_matrix_product(l1, r1, l2, r2):
    g, h = qt.Rotation4(l1, r1), qt.Rotation4(l2, r2)
    assert np.allclose(qt.rotation_matrix(g @ h), qt.rotation_matrix(g) @ qt.rotation_matrix(h), atol=1e-9)


def test_non_rotation_rejected():
    with pytest.raises((DomainError, InvalidElementError, ValueError)):
        qt.rotation_from_matrix(np.diag([1.0, 1.0, 1.0, -1.0]))


@pytest.mark.parametrize("build, order", [(qt.gamma_d3, 6), (qt.gamma_d3_tilde, 12), (qt.gl23_group, 48),
                                          (qt.planar_d3_group, 6)])
def test_groups_are_closed(build, order):
    g = build()
    assert g.order == order
    for A in g.elements:
        assert g.contains(A.T)
        for B in g.elements[: min(order, 12)]:
            assert g.contains(A @ B)


def test_gl23_pairs_match_generated_group():
    g = qt.gl23_group()
    pairs = qt.gl23_pairs()
    assert len(pairs) == 48
    idx = {g.index_of(qt.rotation_matrix(p)) for p in pairs}
    assert len(idx) == 48


def test_element_orders_of_gl23():
    g = qt.gl23_group()
    counts = {}
    for i in range(g.order):
        o = g.element_order(i)
        counts[o] = counts.get(o, 0) + 1
    # GL(2,3): 1 identity, 1 central involution plus 12 others, 8 of order 3, 6 of order 4, 8 of 6, 12 of 8
    assert counts == {1: 1, 2: 13, 3: 8, 4: 6, 6: 8, 8: 12}


def test_subgroups_are_recognised():
    g = qt.gamma_d3_tilde()
    rho = g.index_of(qt.d3_rho())
    sub = g.generated_by([rho])
    assert len(sub) == 3 and g.is_subgroup(sub)


def test_fixed_subspace_of_d3():
    g = qt.gamma_d3()
    assert qt.fixed_subspace(g.elements).dim == 1
    kappa_fix = qt.fixed_subspace(qt.cyclic_closure(qt.d3_kappa()))
    assert kappa_fix.dim == 2
    assert kappa_fix.contains(np.array([1.0, 0.0, 2.0, 0.0]))


def test_linear_subspace_operations():
    a = qt.LinearSubspace.from_vectors([[1, 0, 0, 0], [0, 1, 0, 0]])
    b = qt.LinearSubspace.from_vectors([[0, 1, 0, 0], [0, 0, 1, 0]])
    c = a.intersect(b)
    assert c.dim == 1 and c.contains(np.array([0.0, 3.0, 0.0, 0.0]))
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert math.isclose(a.distance(x), 5.0)
    assert np.allclose(a.project(x), [1, 2, 0, 0])
    R = qt.rotation_matrix(qt.Rotation4(qt.Quaternion(0, 0, 0, 1), qt.Quaternion(1.0)))
    assert a.transformed(R).dim == 2
    assert a.same_as(qt.LinearSubspace.from_vectors([[1, 1, 0, 0], [1, -1, 0, 0]]))


def test_plane_pair_geometry():
    p1 = qt.kappa_element(0, 0, 0)
    p2 = qt.kappa_element(0, 1, 0)
    assert qt.dim_fix_two_predicate(p1)
    ang = qt.plane_pair_geometry(p1, p1)
    assert ang is not None and ang < 1e-6
    out = qt.plane_pair_geometry(p1, p2)
    assert out is None or 0 <= out <= math.pi / 2
    with pytest.raises(DomainError):
        qt.plane_pair_geometry(qt.epsilon_element(0, 0), p1)


def test_identity_is_not_a_plane_fixer():
    e = qt.Rotation4(qt.Quaternion(1.0), qt.Quaternion(1.0))
    assert not qt.dim_fix_two_predicate(e)


def test_isotropy_inventory():
    inv = qt.enumerate_isotropy_gl23(qt.gl23_group())
    labels = [lab for lab, _ in inv]
    assert sum(lab.startswith("P1") for lab in labels) == 4
    assert sum(lab.startswith("P2") for lab in labels) == 12
    for lab, sub in inv:
        assert sub.dim == (1 if lab.startswith("L") else 2)
    axes = qt.gl23_axis_planes(inv)
    assert all(len(planes) >= 2 for planes in axes.values())
    with pytest.raises(DomainError):
        qt.enumerate_isotropy_gl23(qt.gamma_d3())


def test_group_text_is_stable():
    assert qt.gamma_d3().to_text() == qt.gamma_d3().to_text()


@settings(max_examples=30)
@given(st.integers(0, 47))
def test_predicate_matches_fixed_dimension(i):
    g = qt.gl23_group()
    M = g[i]
    dim = qt.fixed_subspace(qt.cyclic_closure(M)).dim
    assert qt.dim_fix_two_predicate(qt.rotation_from_matrix(M)) == (dim == 2)
