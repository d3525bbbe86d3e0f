"""Trajectories of the full systems: connections, distances, attractor classification and sweeps."""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numba
import numpy as np
from scipy.linalg import null_space
from scipy.spatial import cKDTree

from . import quaternions as qt
from .errors import DomainError, IntegrationError, NoConnectionError, PseudoSimpleError
from .fields import Family, VectorFieldSpec, equilibria_on_axes, eval_field, jacobian
from .integrator import Solution, locate_crossings, solve

__all__ = [
    "IntegratorConfig", "TrajectoryRecord", "integrate", "Connection", "CycleGeometry", "compute_connections",
    "invariant_planes", "distance_to_cycle", "ClassifierSettings", "ClassificationVerdict", "classify_attractor",
    "CensusResult", "escape_census", "SweepProtocol", "sweep", "initial_state", "write_csv",
]

KINDS = ("EscapesNeighborhood", "PeriodicOrbit", "ConvergesToCycle", "NonPeriodicBounded", "Inconclusive")


# ---------------------------------------------------------------------------
# integration


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = math.inf
    t_max: float = 1000.0
    dense: bool = True

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        if not (math.isfinite(self.t_max) and self.t_max > 0):
            raise ValueError("t_max must be finite and positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")


def _header(dim: int) -> str:
    return "t,x1,y1,x2,y2" if dim == 4 else "t,x,y"


def write_csv(stream, header: str, rows: np.ndarray) -> None:
    """Rows of floats at 17 significant digits, so that values round-trip exactly."""
    stream.write(header + "\n")
    for row in rows:
        stream.write(",".join(f"{v:.17g}" for v in row) + "\n")


@dataclass
class TrajectoryRecord:
    t: np.ndarray
    x: np.ndarray
    n_accepted: int
    n_rejected: int
    reason: str  # max-time | escape-radius | converged | buffer-full | step-underflow | non-finite
    solution: Solution | None = field(default=None, repr=False)

    def sample(self, dt: float) -> tuple[np.ndarray, np.ndarray]:
        """States on a uniform time grid (dense output)."""
        if self.solution is None:
            raise ValueError("the record was created without dense output")
        ts = np.arange(self.t[0], self.t[-1] + 0.5 * dt, dt)
        ts = ts[ts <= self.t[-1]]
        return ts, self.solution(ts)

    def to_csv(self, dt: float | None = None) -> str:
        if dt is None:
            t, x = self.t, self.x
        else:
            t, x = self.sample(dt)
        buf = io.StringIO()
        write_csv(buf, _header(x.shape[1]), np.column_stack([t, x]))
        return buf.getvalue()


def integrate(spec: VectorFieldSpec, x0, config: IntegratorConfig = IntegratorConfig(),
              projector: np.ndarray | None = None, escape_radius: float = math.inf) -> TrajectoryRecord:
    """Adaptive Dormand-Prince integration of the field from x0 over [0, t_max]."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.dim,):
        raise ValueError(f"x0 must have shape ({spec.dim},)")
    sol = solve(spec.rhs, spec.params, x0, (0.0, config.t_max), rtol=config.rtol, atol=config.atol,
                max_step=config.max_step, projector=projector, escape_radius=escape_radius, strict=False)
    reason = sol.status
    if reason == "max-time":
        xf = sol.x_final
        if np.linalg.norm(eval_field(spec, xf)) <= 1e-13 * (1.0 + np.linalg.norm(xf)):
            reason = "converged"
    return TrajectoryRecord(sol.t, sol.x, sol.n_accepted, sol.n_rejected, reason, sol if config.dense else None)


# ---------------------------------------------------------------------------
# heteroclinic connections


@dataclass(frozen=True)
class Connection:
    label: str  # kappa1 (leaves a xi1 copy) or kappa2 (leaves a xi2 copy)
    source: int  # index into CycleGeometry.equilibria
    target: int
    plane: qt.LinearSubspace
    points: np.ndarray = field(repr=False)
    times: np.ndarray = field(repr=False)

    @property
    def length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))

    def midpoint(self) -> np.ndarray:
        """Point halfway along the polyline by arc length."""
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        s = np.concatenate([[0.0], np.cumsum(seg)])
        half = 0.5 * s[-1]
        k = int(np.searchsorted(s, half) - 1)
        k = min(max(k, 0), len(seg) - 1)
        w = (half - s[k]) / seg[k] if seg[k] > 0 else 0.0
        return self.points[k] + w * (self.points[k + 1] - self.points[k])

    def transformed(self, M: np.ndarray, source: int, target: int) -> "Connection":
        return Connection(self.label, source, target, self.plane.transformed(M), self.points @ M.T, self.times)


def invariant_planes(group: qt.GroupTable) -> list[qt.LinearSubspace]:
    """Distinct two-dimensional subspaces Fix(<g>) for g in the group."""
    planes: list[qt.LinearSubspace] = []
    n = group[0].shape[0]
    for M in group.elements:
        ns = null_space(M - np.eye(n), rcond=1e-9)
        if ns.shape[1] != 2:
            continue
        P = qt.LinearSubspace.from_vectors(ns.T, n)
        if not any(P.same_as(Q) for Q in planes):
            planes.append(P)
    return planes


def _orbit_points(group: qt.GroupTable, x: np.ndarray, tol: float = 1e-9) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for M in group.elements:
        y = M @ x
        if not any(np.linalg.norm(y - z) <= tol for z in out):
            out.append(y)
    return out


def _densify(sol: Solution, max_seg: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes of the solution with Hermite points inserted so that no segment exceeds max_seg."""
    t, x = sol.t, sol.x
    seg = np.linalg.norm(np.diff(x, axis=0), axis=1)
    extra = np.ceil(seg / max_seg).astype(int)
    parts = []
    for k in range(len(t) - 1):
        m = max(extra[k], 1)
        parts.append(t[k] + (t[k + 1] - t[k]) * np.arange(m) / m)
    parts.append(t[-1:])
    ts = np.concatenate(parts)
    return ts, sol(ts)


@dataclass
class CycleGeometry:
    """Equilibria of the cycle, its representative connections and their group orbit X."""

    spec: VectorFieldSpec = field(repr=False)
    equilibria: np.ndarray  # (m, n) every group copy of xi1 and xi2
    eq_type: np.ndarray  # 1 or 2 per row of equilibria
    representatives: list
    orbit: list = field(repr=False)
    _tree: cKDTree | None = field(default=None, repr=False)
    _eq_tree: cKDTree | None = field(default=None, repr=False)

    def __post_init__(self):
        pts = [c.points for c in self.orbit]
        self._vertices = np.vstack(pts)
        sizes = np.array([len(p) for p in pts])
        ends = np.cumsum(sizes)
        nxt = np.arange(1, len(self._vertices) + 1)
        nxt[ends - 1] = -1
        prv = np.arange(-1, len(self._vertices) - 1)
        prv[ends - sizes] = -1
        self._next, self._prev = nxt, prv
        self._ends = ends
        self._tree = cKDTree(self._vertices)
        self._eq_tree = cKDTree(self.equilibria)

    @property
    def vertices(self) -> np.ndarray:
        return self._vertices

    def representative(self, label: str) -> Connection:
        for c in self.representatives:
            if c.label == label:
                return c
        raise KeyError(label)

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        k = np.nonzero(self._next >= 0)[0]
        return self._vertices[k], self._vertices[self._next[k]]

    def nearest_equilibrium(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self._eq_tree.query(np.atleast_2d(X))

    def distances(self, X: np.ndarray) -> np.ndarray:
        """Distance of many points to X, using the nearest vertex and its two segments."""
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
        d0, i = self._tree.query(X)
        de, _ = self._eq_tree.query(X)
        return _refine_distances(X, self._vertices, i, self._next, self._prev, np.minimum(d0, de))

    def plane_of(self, x: np.ndarray) -> int:
        """Index of the orbit connection nearest to x."""
        _, i = self._tree.query(x)
        return int(np.searchsorted(self._ends, i, side="right"))


@numba.njit(cache=True)
def _refine_distances(X, V, idx, nxt, prv, best):
    n = X.shape[1]
    out = best.copy()
    for k in range(X.shape[0]):
        i = idx[k]
        for j in (nxt[i], prv[i]):
            if j < 0:
                continue
            dd = 0.0
            sd = 0.0
            for c in range(n):
                d = V[j, c] - V[i, c]
                dd += d * d
                sd += (X[k, c] - V[i, c]) * d
            s = min(max(sd / dd, 0.0), 1.0) if dd > 0 else 0.0
            r2 = 0.0
            for c in range(n):
                r = X[k, c] - V[i, c] - s * (V[j, c] - V[i, c])
                r2 += r * r
            out[k] = min(out[k], math.sqrt(r2))
    return out


def _point_segment_distance(X: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    d = B - A
    dd = np.einsum("ij,ij->i", d, d)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(dd > 0, np.einsum("ij,ij->i", X - A, d) / dd, 0.0)
    s = np.clip(s, 0.0, 1.0)
    r = X - A - s[:, None] * d
    return np.sqrt(np.einsum("ij,ij->i", r, r))


def distance_to_cycle(x, geometry: CycleGeometry) -> float:
    """Exact minimum distance from x to every segment and equilibrium of X."""
    x = np.asarray(x, dtype=float)
    A, B = geometry.segments()
    d = _point_segment_distance(np.broadcast_to(x, A.shape), A, B)
    de = np.linalg.norm(geometry.equilibria - x, axis=1)
    return float(min(d.min(), de.min()))


def _unstable_direction(J: np.ndarray, plane: qt.LinearSubspace, axis: np.ndarray) -> tuple[float, np.ndarray]:
    """Eigenvalue and 4-D eigenvector of J restricted to the plane, transverse to the axis."""
    B = plane.basis
    Jr = B @ J @ B.T
    w, v = np.linalg.eig(Jr)
    vecs = (B.T @ v.real).T
    vecs /= np.linalg.norm(vecs, axis=1)[:, None]
    k = int(np.argmin(np.abs(vecs @ axis)))
    return float(w[k].real), vecs[k]


def _shoot(spec: VectorFieldSpec, start: np.ndarray, plane: qt.LinearSubspace, sinks: np.ndarray,
           capture: float, t_limit: float, rtol: float) -> tuple[Solution, int, int] | None:
    """Integrate inside the plane until within ``capture`` of a sink; returns (solution, sink, node)."""
    P = plane.projector()
    tree = cKDTree(sinks)
    T = 250.0
    while True:
        sol = solve(spec.rhs, spec.params, start, (0.0, T), rtol=rtol, atol=1e-300, projector=P,
                    escape_radius=1e3)
        d, j = tree.query(sol.x)
        hit = np.nonzero(d <= capture)[0]
        if hit.size:
            return sol, int(j[hit[0]]), int(hit[0])
        if sol.status != "max-time" or T >= t_limit:
            return None
        T *= 2


def compute_connections(spec: VectorFieldSpec, eta: float = 1e-7, capture: float = 1e-6,
                        t_limit: float = 2e5, max_seg: float = 2e-3, rtol: float = 1e-11) -> CycleGeometry:
    """Saddle-sink connections between the axis equilibria, found by shooting inside invariant planes."""
    if spec.family is Family.PLANAR_D3:
        raise DomainError("connections are defined for the 4-D families")
    reps = equilibria_on_axes(spec)
    group = spec.group
    eqs, types = [], []
    for j, rep in enumerate(reps, start=1):
        for y in _orbit_points(group, rep.position):
            eqs.append(y)
            types.append(j)
    eqs = np.array(eqs)
    types = np.array(types)
    planes = invariant_planes(group)
    found: list[Connection] = []
    for j, rep in enumerate(reps, start=1):
        xi = rep.position
        axis = xi / np.linalg.norm(xi)
        J = jacobian(spec, xi)
        src = int(np.argmin(np.linalg.norm(eqs - xi, axis=1)))
        others = np.nonzero(types != j)[0]
        for plane in planes:
            if not plane.contains(xi, 1e-9):
                continue
            lam, v = _unstable_direction(J, plane, axis)
            if lam <= 0:
                continue
            for sign in (1.0, -1.0):
                shot = _shoot(spec, xi + sign * eta * v, plane, eqs[others], capture, t_limit, rtol)
                if shot is None:
                    continue
                sol, k, node = shot
                tgt = int(others[k])
                cut = Solution(sol.t[: node + 1], sol.x[: node + 1], sol.f[: node + 1], 0, 0, sol.status)
                if _passes_other_equilibrium(spec, cut.x, xi, eqs[tgt]):
                    continue
                ts, pts = _densify(cut, max_seg)
                pts = np.vstack([xi, pts, eqs[tgt]])
                ts = np.concatenate([[ts[0]], ts, [ts[-1]]])
                conn = Connection(f"kappa{j}", src, tgt, plane, pts, ts)
                if not any(_same_orbit(conn, c, group) for c in found):
                    found.append(conn)
    labels = {c.label for c in found}
    for need in ("kappa1", "kappa2"):
        if need not in labels:
            raise NoConnectionError(f"no {need} connection: the unstable manifolds miss every sink copy")
    orbit = _connection_orbit(found, group, eqs)
    return CycleGeometry(spec, eqs, types, found, orbit)


def _passes_other_equilibrium(spec: VectorFieldSpec, X: np.ndarray, a: np.ndarray, b: np.ndarray,
                              margin: float = 1e-3, slow: float = 1e-8) -> bool:
    """True when the orbit stalls away from both ends, i.e. it shadows an intermediate equilibrium."""
    inner = (np.linalg.norm(X - a, axis=1) > margin) & (np.linalg.norm(X - b, axis=1) > margin)
    if not np.any(inner):
        return False
    return bool(np.min(np.linalg.norm(eval_field(spec, X[inner]), axis=1)) < slow)


def _same_orbit(a: Connection, b: Connection, group: qt.GroupTable, tol: float = 1e-6) -> bool:
    if a.label != b.label:
        return False
    ma = a.midpoint()
    ends = np.array([b.points[0], b.points[-1], b.midpoint()])
    for M in group.elements:
        if np.linalg.norm(M @ a.points[0] - ends[0]) <= tol and np.linalg.norm(M @ a.points[-1] - ends[1]) <= tol \
                and np.linalg.norm(M @ ma - ends[2]) <= 1e-4:
            return True
    return False


def _connection_orbit(reps: list[Connection], group: qt.GroupTable, eqs: np.ndarray) -> list[Connection]:
    tree = cKDTree(eqs)
    out: list[Connection] = []
    keys: list[np.ndarray] = []
    for c in reps:
        mid = c.midpoint()
        for M in group.elements:
            key = M @ mid
            if any(np.linalg.norm(key - k) <= 1e-7 for k in keys):
                continue
            keys.append(key)
            _, s = tree.query(M @ c.points[0])
            _, t = tree.query(M @ c.points[-1])
            out.append(c.transformed(M, int(s), int(t)))
    return out


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class ClassifierSettings:
    delta_escape: float = 0.5
    transient: float = 0.2  # fraction of t_max skipped before classifying
    visit_radius: float = 0.05
    converge_distance: float = 1e-3
    min_visits: int = 5
    min_growth: float = 1.05  # consecutive dwell-time ratio required for cycle convergence
    return_tol: float = 1e-6
    min_returns: int = 6
    max_lag: int = 24
    section_radius: float | None = None

    def __post_init__(self):
        if not 0 <= self.transient < 1:
            raise ValueError("transient must lie in [0, 1)")
        if self.delta_escape <= 0 or self.visit_radius <= 0:
            raise ValueError("radii must be positive")


@dataclass
class ClassificationVerdict:
    kind: str
    period: float | None = None
    min_dist: float | None = None
    max_dist: float | None = None
    final_dist: float | None = None
    dwell_times: tuple = ()
    dwell_ratios: tuple = ()
    n_returns: int = 0
    return_lag: int | None = None
    return_mismatch: float | None = None
    return_dispersion: float | None = None
    planes_per_period: dict | None = None
    seed: int | None = None
    message: str = ""
    returns: np.ndarray | None = field(default=None, repr=False)
    return_times: np.ndarray | None = field(default=None, repr=False)
    record: TrajectoryRecord | None = field(default=None, repr=False)

    def summary(self) -> dict:
        def num(v):
            return None if v is None else float(v)

        return {
            "kind": self.kind,
            "period": num(self.period),
            "min_dist": num(self.min_dist),
            "max_dist": num(self.max_dist),
            "final_dist": num(self.final_dist),
            "dwell_times": [float(d) for d in self.dwell_times],
            "n_returns": self.n_returns,
            "return_lag": self.return_lag,
            "return_mismatch": num(self.return_mismatch),
            "return_dispersion": num(self.return_dispersion),
            "planes_per_period": dict(self.planes_per_period) if self.planes_per_period else None,
            "seed": self.seed,
        }

    def to_text(self) -> str:
        lines = []
        for k, v in self.summary().items():
            if isinstance(v, float):
                v = f"{v:.12g}"
            elif isinstance(v, list):
                v = "[" + ", ".join(f"{d:.8g}" for d in v) + "]"
            elif isinstance(v, dict):
                v = ", ".join(f"{a}={b}" for a, b in v.items())
            lines.append(f"{k}: {v}")
        if self.message:
            lines.append(f"message: {self.message}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class _Section:
    points: np.ndarray  # (m, n) copies of the base point
    normals: np.ndarray  # (m, n)
    mats: tuple  # group element carrying the base section to each copy
    radius: float


def _section(geometry: CycleGeometry, radius: float | None) -> _Section:
    c = geometry.representative("kappa2")
    m = c.midpoint()
    f = eval_field(geometry.spec, m)
    nrm = f / np.linalg.norm(f)
    pts, nms, mats = [], [], []
    for M in geometry.spec.group.elements:
        p = M @ m
        if any(np.linalg.norm(p - q) <= 1e-9 for q in pts):
            continue
        pts.append(p)
        nms.append(M @ nrm)
        mats.append(M)
    pts = np.array(pts)
    if radius is None:
        sep = [np.linalg.norm(pts[i] - pts[j]) for i in range(len(pts)) for j in range(i)]
        d_eq = float(np.min(np.linalg.norm(geometry.equilibria - m, axis=1)))
        radius = 0.3 * min([d_eq] + sep)
    return _Section(pts, np.array(nms), tuple(mats), radius)


def _section_returns(sol: Solution, sec: _Section, t_from: float, n_exact: int = 64):
    """Upward crossings of every section copy near its base point, mapped back to the base section."""
    times, which = [], []
    after = sol.t[:-1] >= t_from
    r2 = sec.radius**2
    for k, (p, n) in enumerate(zip(sec.points, sec.normals)):
        r = sol.x - p
        near = np.einsum("ij,ij->i", r, r) <= r2

        def mask(idx, near=near):
            return after[idx] & (near[idx] | near[idx + 1])

        tc, _ = locate_crossings(sol, lambda X, p=p, n=n: (X - p) @ n, direction=1, mask=mask)
        times.extend(float(t) for t in tc)
        which.extend([k] * len(tc))
    n = sol.x.shape[1]
    if not times:
        return np.empty(0), np.empty((0, n)), np.empty((0, n)), np.empty(0, dtype=int)
    order = np.argsort(times)
    times = np.array(times)[order]
    which = np.array(which)[order]
    full = np.atleast_2d(sol(times)).reshape(len(times), n)
    # the returns that decide periodicity are re-integrated from the nearest node
    for i in range(max(0, len(times) - n_exact), len(times)):
        full[i] = sol.exact_state(float(times[i]))
    reduced = np.array([sec.mats[k].T @ x for k, x in zip(which, full)])
    return times, full, reduced, which


def _visits(sol: Solution, geometry: CycleGeometry, radius: float, t_from: float):
    """(entry times, exit times, equilibrium index) for passages through radius-balls around equilibria.

    A visit still in progress at the end of the run gets exit time t_end.
    """
    d, j = geometry.nearest_equilibrium(sol.x)
    inside = d < radius
    t = sol.t
    edges = np.diff(inside.astype(int))
    ent = list(np.nonzero(edges == 1)[0] + 1)
    ext = list(np.nonzero(edges == -1)[0] + 1)
    if inside[0]:
        ent = [0] + ent
    if len(ext) < len(ent):
        ext.append(len(t) - 1)
    entries = np.array([t[i] for i in ent])
    exits = np.array([t[i] for i in ext])
    labels = np.array([j[i] for i in ent], dtype=int)
    keep = entries >= t_from
    return entries[keep], exits[keep], labels[keep]


def _converges(dwell: np.ndarray, final_dist: float, st: ClassifierSettings) -> bool:
    if len(dwell) < st.min_visits or final_dist >= st.converge_distance:
        return False
    tail = dwell[-st.min_visits:]
    return bool(np.all(tail[1:] >= st.min_growth * tail[:-1]))


def _match_lag(full: np.ndarray, st: ClassifierSettings) -> tuple[int | None, float]:
    """Smallest lag p at which the last returns repeat within return_tol (checked on the last two returns)."""
    n = len(full)
    best = math.inf
    for p in range(1, min(st.max_lag, n - 2) + 1):
        err = max(np.linalg.norm(full[-1] - full[-1 - p]), np.linalg.norm(full[-2] - full[-2 - p]))
        best = min(best, err)
        if err <= st.return_tol:
            return p, err
    return None, best


def classify_attractor(spec: VectorFieldSpec, x0, geometry: CycleGeometry,
                       config: IntegratorConfig = IntegratorConfig(t_max=20000.0),
                       settings: ClassifierSettings = ClassifierSettings(), seed: int | None = None,
                       keep_trajectory: bool = False) -> ClassificationVerdict:
    """Integrate from x0 and decide which kind of attractor the trajectory settles on."""
    st = settings
    escape_r = 10.0 * float(np.max(np.linalg.norm(geometry.vertices, axis=1))) + 10 * st.delta_escape
    try:
        rec = integrate(spec, x0, replace(config, dense=True), escape_radius=escape_r)
    except IntegrationError as exc:
        return ClassificationVerdict("Inconclusive", seed=seed, message=str(exc))
    sol = rec.solution
    verdict = _classify_solution(sol, geometry, config.t_max, st)
    verdict.seed = seed
    if keep_trajectory:
        verdict.record = rec
    if rec.reason == "escape-radius" and verdict.kind != "EscapesNeighborhood":
        verdict = ClassificationVerdict("EscapesNeighborhood", seed=seed, message="left the escape radius")
    return verdict


FLOOR = 1e-280


def precision_horizon(sol: Solution, floor: float = FLOOR) -> int | None:
    """First node at which a non-zero coordinate drops below ``floor``.

    Past this point the approach to an invariant subspace is no longer resolved
    in double precision (the coordinate soon underflows), so the run is cut there.
    """
    a = np.abs(sol.x)
    tiny = (a > 0) & (a < floor)
    rows = np.nonzero(tiny.any(axis=1))[0]
    return int(rows[0]) if rows.size else None


def _truncate(sol: Solution, k: int) -> Solution:
    return Solution(sol.t[: k + 1], sol.x[: k + 1], sol.f[: k + 1], sol.n_accepted, sol.n_rejected, sol.status,
                    sol.rhs, sol.params, sol.projector)


def _classify_solution(sol: Solution, geometry: CycleGeometry, t_max: float, st: ClassifierSettings) -> ClassificationVerdict:
    note = ""
    k = precision_horizon(sol)
    if k is not None and k > 1:
        sol = _truncate(sol, k)
        t_max = float(sol.t[-1])
        note = f"analysis stops at t = {t_max:.6g} where a coordinate falls below {FLOOR:g}"
    v = _classify_core(sol, geometry, t_max, st)
    if note:
        v.message = f"{v.message}; {note}" if v.message else note
    return v


def _classify_core(sol: Solution, geometry: CycleGeometry, t_max: float, st: ClassifierSettings) -> ClassificationVerdict:
    t_from = st.transient * t_max
    late = sol.t >= t_from
    if not np.any(late):
        return ClassificationVerdict("Inconclusive", message="trajectory ended before the transient")
    dl = geometry.distances(sol.x[late])
    base = dict(min_dist=float(dl.min()), max_dist=float(dl.max()), final_dist=None)
    if sol.status == "escape-radius" or dl.max() > st.delta_escape:
        i = int(np.argmax(dl > st.delta_escape)) if dl.max() > st.delta_escape else len(dl) - 1
        return ClassificationVerdict("EscapesNeighborhood", message=f"distance {dl[i]:.3g} at t = {sol.t[late][i]:.6g}",
                                     **base)

    ent, ext, lab = _visits(sol, geometry, st.visit_radius, t_from)
    ongoing = len(ext) > 0 and ext[-1] == sol.t[-1]
    dwell = (ext - ent)[:-1] if ongoing else ext - ent  # an unfinished visit is only a lower bound
    ratios = dwell[1:] / dwell[:-1] if len(dwell) > 1 else np.empty(0)
    # distance over the last tenth of the run
    tail = sol.t[late] >= sol.t[-1] - 0.1 * (sol.t[-1] - sol.t[0])
    final = float(dl[tail].max())
    base["final_dist"] = final
    evid = dict(dwell_times=tuple(dwell), dwell_ratios=tuple(ratios), **base)
    if _converges(dwell, final, st):
        return ClassificationVerdict("ConvergesToCycle", **evid)
    if ongoing and ent[-1] < sol.t[-1] - 0.5 * (sol.t[-1] - t_from):
        d_eq, _ = geometry.nearest_equilibrium(sol.x[-1])
        if d_eq[0] < st.converge_distance and final < st.converge_distance:
            return ClassificationVerdict("ConvergesToCycle", message="settles on an equilibrium of the cycle", **evid)

    sec = _section(geometry, st.section_radius)
    times, full, reduced, which = _section_returns(sol, sec, t_from, n_exact=2 * st.max_lag + 2)
    n = len(times)
    disp = float(np.sqrt(np.mean(np.sum((reduced - reduced.mean(axis=0)) ** 2, axis=1)))) if n else None
    evid.update(n_returns=n, return_dispersion=disp, returns=reduced, return_times=times)
    if n >= st.min_returns:
        lag, err = _match_lag(full, st)
        evid["return_mismatch"] = err
        if lag is not None:
            period = float(times[-1] - times[-1 - lag])
            return ClassificationVerdict("PeriodicOrbit", period=period, return_lag=lag,
                                         planes_per_period=_planes_visited(sol, geometry, times[-1] - period, times[-1]),
                                         **evid)
        return ClassificationVerdict("NonPeriodicBounded", message=f"no return repeats within {st.return_tol:g}", **evid)
    return ClassificationVerdict("Inconclusive", message=f"only {n} section returns after the transient", **evid)


def _planes_visited(sol: Solution, geometry: CycleGeometry, t0: float, t1: float) -> dict:
    """Distinct orbit connections followed during [t0, t1], counted by label."""
    ts = np.linspace(t0, t1, 4000)
    X = sol(ts)
    d = geometry.distances(X)
    dq, _ = geometry.nearest_equilibrium(X)
    # only points clearly away from the equilibria identify a connection
    scale = float(np.min([c.length for c in geometry.representatives]))
    far = dq > 0.1 * scale
    seen: dict[str, set] = {}
    for x, ok, dd in zip(X, far, d):
        if not ok or dd > 0.25 * scale:
            continue
        k = geometry.plane_of(x)
        seen.setdefault(geometry.orbit[k].label, set()).add(k)
    return {lab: len(v) for lab, v in sorted(seen.items())}


# ---------------------------------------------------------------------------
# escape census


@dataclass
class CensusResult:
    fraction: float
    n_escaped: int
    n_samples: int
    delta: float
    seed: int
    outcomes: list  # per sample: 'left-tube' | 'not-converging' | 'converges'
    starts: np.ndarray = field(repr=False)


def _tube_samples(geometry: CycleGeometry, delta: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Points at distance < delta from X: a uniformly chosen point of X plus a uniform ball offset."""
    A, B = geometry.segments()
    w = np.linalg.norm(B - A, axis=1)
    cum = np.cumsum(w) / w.sum()
    dim = A.shape[1]
    out = []
    while len(out) < n:
        k = int(np.searchsorted(cum, rng.random()))
        base = A[k] + rng.random() * (B[k] - A[k])
        d = rng.normal(size=dim)
        d *= delta * rng.random() ** (1 / dim) / np.linalg.norm(d)
        x = base + d
        if geometry.distances(x)[0] < delta and not _on_invariant_subspace(geometry.spec.group, x):
            out.append(x)
    return np.array(out)


def _on_invariant_subspace(group: qt.GroupTable, x: np.ndarray, tol: float = 1e-9) -> bool:
    return any(np.linalg.norm(M @ x - x) <= tol for M in group.elements[1:])


def _census_outcome(spec, x0, geometry, config, settings, delta) -> str:
    rec = integrate(spec, x0, replace(config, dense=True), escape_radius=100.0)
    sol = rec.solution
    t_max = config.t_max
    k = precision_horizon(sol)
    if k is not None and k > 1:
        # beyond this node the motion is an artefact of underflowed coordinates
        sol = _truncate(sol, k)
        t_max = float(sol.t[-1])
    elif rec.reason == "escape-radius":
        return "left-tube"
    if geometry.distances(sol.x).max() >= delta:
        return "left-tube"
    v = _classify_core(sol, geometry, t_max, replace(settings, delta_escape=delta))
    return "converges" if v.kind == "ConvergesToCycle" else "not-converging"


def escape_census(spec: VectorFieldSpec, geometry: CycleGeometry, delta: float = 0.1, n_samples: int = 200,
                  seed: int = 0, config: IntegratorConfig = IntegratorConfig(t_max=20000.0),
                  settings: ClassifierSettings = ClassifierSettings(), threads: int = 1,
                  allow_reflections: bool = False, starts: np.ndarray | None = None) -> CensusResult:
    """Fraction of tube samples that are not in the delta-basin of attraction of X.

    A sample is in the basin when its trajectory never leaves the delta-tube and
    converges to X; everything else counts as escaping.
    """
    if not allow_reflections and any(np.linalg.det(M) < 0 for M in spec.group.elements):
        raise DomainError("the census assumes an orientation-preserving symmetry group")
    if starts is None:
        starts = _tube_samples(geometry, delta, n_samples, np.random.default_rng(seed))
    starts = np.atleast_2d(np.asarray(starts, dtype=float))

    def job(x):
        return _census_outcome(spec, x, geometry, config, settings, delta)

    outcomes = _ordered_map(job, list(starts), threads)
    esc = sum(o != "converges" for o in outcomes)
    return CensusResult(esc / len(starts), esc, len(starts), delta, seed, outcomes, starts)


def _ordered_map(fn: Callable, items: list, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# initial conditions and sweeps


def initial_state(geometry: CycleGeometry, anchor: str = "kappa2_mid", offset=None, scale: float = 0.0,
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """A start near a named point of the cycle: xi1, xi2 or the arc-length midpoint of kappa1/kappa2."""
    if anchor in ("xi1", "xi2"):
        reps = equilibria_on_axes(geometry.spec)
        base = reps[int(anchor[-1]) - 1].position
    elif anchor in ("kappa1_mid", "kappa2_mid"):
        base = geometry.representative(anchor.split("_")[0]).midpoint()
    else:
        raise ValueError(f"unknown anchor {anchor!r}")
    x = np.array(base, dtype=float)
    if offset is not None:
        x = x + np.asarray(offset, dtype=float)
    if scale:
        rng = rng or np.random.default_rng(0)
        x = x + scale * rng.normal(size=x.shape)
    return x


@dataclass(frozen=True)
class SweepProtocol:
    config: IntegratorConfig = IntegratorConfig(t_max=20000.0)
    settings: ClassifierSettings = ClassifierSettings()
    anchor: str = "kappa2_mid"
    scale: float = 0.02
    seed: int = 0


def sweep(build: Callable[[dict], VectorFieldSpec], grid: Iterable[dict], protocol: SweepProtocol = SweepProtocol(),
          threads: int = 1) -> list[dict]:
    """classify_attractor at every grid point; rows come back in grid order whatever the thread count."""
    grid = list(grid)

    def row(item):
        i, params = item
        out = dict(params)
        try:
            spec = build(params)
            geo = compute_connections(spec)
            rng = np.random.default_rng([protocol.seed, i])
            x0 = initial_state(geo, protocol.anchor, scale=protocol.scale, rng=rng)
            v = classify_attractor(spec, x0, geo, protocol.config, protocol.settings, seed=protocol.seed)
            out.update(v.summary())
            out["error"] = ""
        except PseudoSimpleError as exc:
            out.update(kind="Error", error=f"{type(exc).__name__}: {exc}")
        return out

    return _ordered_map(row, list(enumerate(grid)), threads)
