import io
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudosimple.dynamics import (ClassificationVerdict, ClassifierSettings, IntegratorConfig, SweepProtocol,
                                   classify_attractor, distance_to_cycle, escape_census, initial_state, integrate,
                                   invariant_planes, precision_horizon, sweep, write_csv)
from pseudosimple.fields import CoeffsD3, GLParametrization, d3_cubic, eval_field, gl23_cubic
from pseudosimple.integrator import Solution

LONG_RUN = IntegratorConfig(t_max=20000.0)


@pytest.fixture(scope="module")
def d3_orbit_verdict(d3_spec, d3_geometry, d3_start):
    return classify_attractor(d3_spec, d3_start, d3_geometry, LONG_RUN, keep_trajectory=True)


def _segment_distance(x, a, b):
    d = b - a
    s = np.clip(np.dot(x - a, d) / np.dot(d, d), 0.0, 1.0) if np.dot(d, d) > 0 else 0.0
    return np.linalg.norm(x - a - s * d)


def test_connections_are_saddle_sink_orbits(d3_spec, d3_geometry):
    g = d3_geometry
    assert sorted(set(g.eq_type.tolist())) == [1, 2]
    for c in g.representatives:
        assert np.max([c.plane.distance(p) for p in c.points]) < 1e-8
        assert np.linalg.norm(c.points[0] - g.equilibria[c.source]) < 1e-5
        assert np.linalg.norm(c.points[-1] - g.equilibria[c.target]) < 1e-5
        # the orbit lies on a trajectory: the field is tangent to the polyline
        mid = c.points[len(c.points) // 2]
        f = eval_field(d3_spec, mid)
        step = c.points[len(c.points) // 2 + 1] - mid
        assert abs(np.dot(f, step)) / (np.linalg.norm(f) * np.linalg.norm(step)) > 0.99
    assert {c.label for c in g.representatives} == {"kappa1", "kappa2"}
    # every orbit copy is the image of a representative under the group
    for c in g.orbit:
        assert any(r.points.shape == c.points.shape and np.allclose(c.points, r.points @ M.T, atol=1e-12)
                   for r in g.representatives for M in d3_spec.group.elements)


def test_invariant_planes_of_d3(d3_spec):
    from pseudosimple.quaternions import LinearSubspace
    planes = invariant_planes(d3_spec.group)
    # three reflection planes plus the (x1, y1) plane fixed by the rotation of order 3
    assert len(planes) == 4 and all(p.dim == 2 for p in planes)
    z1_plane = LinearSubspace.from_vectors([[1, 0, 0, 0], [0, 1, 0, 0]])
    assert sum(p.same_as(z1_plane) for p in planes) == 1


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_cycle_distance_matches_brute_force(d3_geometry, x):
    x = np.array(x)
    A, B = d3_geometry.segments()
    brute = min(min(_segment_distance(x, a, b) for a, b in zip(A, B)),
                np.linalg.norm(d3_geometry.equilibria - x, axis=1).min())
    fast = distance_to_cycle(x, d3_geometry)
    # the fast query only inspects segments next to the nearest vertex, an upper bound within the sampling
    assert fast >= brute - 1e-12
    assert fast <= brute + 0.05


def test_cycle_distance_on_the_cycle(d3_geometry):
    pts = d3_geometry.vertices[::97]
    assert np.max(d3_geometry.distances(pts)) < 1e-12


def test_periodic_orbit_closes_after_one_period(d3_spec, d3_orbit_verdict):
    v = d3_orbit_verdict
    assert v.kind == "PeriodicOrbit"
    sol = v.record.solution
    t0 = float(v.return_times[-1])
    x0 = sol.exact_state(t0)
    rec = integrate(d3_spec, x0, IntegratorConfig(rtol=1e-12, atol=1e-14, t_max=v.period))
    assert np.linalg.norm(rec.x[-1] - x0) < 1e-5


def test_verdict_summary_and_text(d3_orbit_verdict):
    s = d3_orbit_verdict.summary()
    assert s["kind"] == "PeriodicOrbit" and s["planes_per_period"] == {"kappa1": 2, "kappa2": 1}
    text = d3_orbit_verdict.to_text()
    assert text.startswith("kind: PeriodicOrbit") and "kappa1=2" in text


def test_small_tube_counts_as_escape(d3_spec, d3_geometry, d3_start):
    v = classify_attractor(d3_spec, d3_start, d3_geometry, LONG_RUN, ClassifierSettings(delta_escape=0.005))
    assert v.kind == "EscapesNeighborhood"


def test_reflection_cycle_attracts(tilde_spec, tilde_geometry, d3_start):
    v = classify_attractor(tilde_spec, d3_start, tilde_geometry, IntegratorConfig(atol=1e-300, t_max=20000.0),
                           ClassifierSettings(transient=0.05))
    assert v.kind == "ConvergesToCycle"
    assert all(r > 1 for r in v.dwell_ratios)


def test_precision_horizon():
    t = np.arange(4.0)
    x = np.array([[1.0, 1.0], [1.0, 1e-200], [1.0, 1e-290], [1.0, 0.0]])
    sol = Solution(t, x, np.zeros_like(x), 3, 0, "max-time")
    assert precision_horizon(sol) == 2
    assert precision_horizon(sol, floor=1e-300) is None


def test_census_is_ordered_and_thread_independent(d3_spec, d3_geometry):
    cfg = IntegratorConfig(t_max=3000.0)
    a = escape_census(d3_spec, d3_geometry, delta=0.1, n_samples=4, seed=5, config=cfg)
    b = escape_census(d3_spec, d3_geometry, delta=0.1, n_samples=4, seed=5, config=cfg, threads=2)
    assert a.outcomes == b.outcomes and np.array_equal(a.starts, b.starts)
    assert np.all(d3_geometry.distances(a.starts) < 0.1)
    assert a.fraction == a.n_escaped / a.n_samples


def test_census_rejects_reflections(tilde_spec, tilde_geometry):
    with pytest.raises(ValueError):
        escape_census(tilde_spec, tilde_geometry, n_samples=1)


def test_initial_states(d3_geometry):
    xi1 = initial_state(d3_geometry, "xi1")
    assert np.linalg.norm(eval_field(d3_geometry.spec, xi1)) < 1e-12
    mid = initial_state(d3_geometry, "kappa2_mid")
    assert distance_to_cycle(mid, d3_geometry) < 1e-9
    a = initial_state(d3_geometry, "kappa2_mid", scale=0.01, rng=np.random.default_rng(1))
    b = initial_state(d3_geometry, "kappa2_mid", scale=0.01, rng=np.random.default_rng(1))
    assert np.array_equal(a, b) and not np.array_equal(a, mid)
    with pytest.raises(ValueError):
        initial_state(d3_geometry, "nowhere")


def test_sweep_rows_keep_grid_order(warm):
    grid = [{"h1": 0.8, "h2": 0.001}, {"h1": 1.5, "h2": 0.001}, {"h1": 0.7, "h2": 0.001}]
    proto = SweepProtocol(config=IntegratorConfig(t_max=500.0))

    def build(g):
        try:
            return gl23_cubic(GLParametrization(g["h1"], g["h2"]))
        except ValueError as exc:
            from pseudosimple.errors import DomainError
            raise DomainError(str(exc)) from exc

    serial = sweep(build, grid, proto)
    threaded = sweep(build, grid, proto, threads=2)
    assert [r["h1"] for r in serial] == [0.8, 1.5, 0.7]
    assert serial == threaded
    assert serial[1]["kind"] == "Error" and serial[1]["error"].startswith("DomainError")


def test_trajectory_output(d3_spec):
    rec = integrate(d3_spec, np.array([0.1, 0.05, 0.02, 0.01]), IntegratorConfig(t_max=5.0))
    text = rec.to_csv(dt=1.0)
    rows = text.strip().splitlines()
    assert rows[0] == "t,x1,y1,x2,y2" and len(rows) == 7
    back = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    t, x = rec.sample(1.0)
    assert np.array_equal(back[:, 0], t) and np.array_equal(back[:, 1:], x)
    with pytest.raises(ValueError):
        replace(rec, solution=None).sample(1.0)
    with pytest.raises(ValueError):
        integrate(d3_spec, np.zeros(3))


def test_converged_reason_at_an_equilibrium(d3_spec):
    rec = integrate(d3_spec, np.array([-math.sqrt(0.3), 0, 0, 0]), IntegratorConfig(t_max=1.0))
    assert rec.reason == "converged"


def test_write_csv_round_trips():
    buf = io.StringIO()
    vals = np.array([[0.1, 1 / 3, -2e-300]])
    write_csv(buf, "a,b,c", vals)
    line = buf.getvalue().splitlines()[1]
    assert np.array_equal(np.array([float(v) for v in line.split(",")]), vals[0])


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(t_max=-1.0)
    with pytest.raises(ValueError):
        ClassifierSettings(transient=1.0)
    assert ClassificationVerdict("Inconclusive").summary()["period"] is None
