"""Equivariant cubic vector fields, their Jacobians, on-axis equilibria and existence criteria.

Four families are provided:

* ``D3_CUBIC``: the cubic system with the order-6 dihedral symmetry,
* ``D3_TILDE_CUBIC``: the same polynomial with a9 = a10, b2 = b3 and the
  order-12 symmetry that adds z2 -> conj(z2),
* ``GL23_CUBIC``: the general cubic equivariant of the order-48 group,
* ``PLANAR_D3``: the planar normal form z' = alpha z + beta conj(z)^2.

The D3 polynomials are evaluated in real coordinates.  Written that way the
coordinate subspaces y1 = 0 and y2 = 0 stay exactly invariant in floating
point, which matters when a trajectory converges to a cycle and the
transverse coordinates shrink by hundreds of orders of magnitude.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields as dc_fields, replace
from itertools import combinations_with_replacement

import numba
import numpy as np

from . import quaternions as qt
from .errors import DomainError, InvarianceViolationError, NoEquilibriumError

SQRT2, SQRT3, SQRT6 = math.sqrt(2.0), math.sqrt(3.0), math.sqrt(6.0)


class Family(str, enum.Enum):
    D3_CUBIC = "D3Cubic"
    D3_TILDE_CUBIC = "D3TildeCubic"
    GL23_CUBIC = "GL23Cubic"
    PLANAR_D3 = "PlanarD3"


# ---------------------------------------------------------------------------
# coefficient records


@dataclass(frozen=True)
class CoeffsD3:
    """Coefficients of the D3-equivariant cubic; alpha = a1 + a2, alpha' = a1 - a2."""

    a1: float
    a2: float
    a3: float
    a4: float
    a5: float
    a6: float
    a9: float
    a10: float
    b1: float
    b2: float
    b3: float
    b4: float
    b5: float
    b6: float
    a7: float = -1.0
    a8: float = -1.0
    tilde: bool = False

    def __post_init__(self):
        if self.a7 != -1.0 or self.a8 != -1.0:
            raise ValueError(f"a7 and a8 are fixed to -1 (got a7={self.a7}, a8={self.a8})")
        s = self.a3 + self.a4 + self.a5
        if abs(s) > 1e-12:
            raise ValueError(f"a3 + a4 + a5 must vanish (got {s:.3e})")
        if self.tilde and (self.a9 != self.a10 or self.b2 != self.b3):
            raise ValueError("the reflection-symmetric variant requires a9 == a10 and b2 == b3")

    @classmethod
    def from_rates(cls, alpha: float, alpha_prime: float, a3: float, a4: float, **kw) -> "CoeffsD3":
        """Build from alpha, alpha' with a5 = -(a3 + a4)."""
        return cls(a1=0.5 * (alpha + alpha_prime), a2=0.5 * (alpha - alpha_prime),
                   a3=a3, a4=a4, a5=-(a3 + a4), **kw)

    @classmethod
    def reference(cls) -> "CoeffsD3":
        """Coefficient table of the periodic-orbit example."""
        return cls.from_rates(0.3, 0.2, 0.3, -0.05, a6=0.6, a9=0.1, a10=0.15,
                              b1=0.2, b2=-0.1, b3=-0.09, b4=-0.1, b5=-1.0, b6=-1.0)

    @classmethod
    def reference_tilde(cls) -> "CoeffsD3":
        """Same table with a9 = a10 = 0.1 and b2 = b3 = -0.6 (reflection-symmetric)."""
        return replace(cls.reference(), a10=0.1, b2=-0.6, b3=-0.6, tilde=True)

    @property
    def alpha(self) -> float:
        return self.a1 + self.a2

    @property
    def alpha_prime(self) -> float:
        return self.a1 - self.a2

    def as_array(self) -> np.ndarray:
        return np.array([self.a1, self.a2, self.a3, self.a4, self.a5, self.a6, self.a7, self.a8,
                         self.a9, self.a10, self.b1, self.b2, self.b3, self.b4, self.b5, self.b6])

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dc_fields(self)}


@dataclass(frozen=True)
class CoeffsGL:
    """Coefficients of the GL(2,3)-equivariant cubic; A..D are derived on demand."""

    mu: float
    b: float
    c: float
    d: float
    e: float

    @property
    def A(self) -> complex:
        return complex(-3 * SQRT3 * self.e, -self.c / 2)

    @property
    def B(self) -> complex:
        return complex(self.d, self.e)

    @property
    def C(self) -> complex:
        return complex(-3 * self.d + SQRT3 * self.c, 3 * self.e)

    @property
    def D(self) -> complex:
        return SQRT3 * complex(-self.e, 2 * self.d - SQRT3 / 2 * self.c)

    @property
    def K1(self) -> float:
        """Cubic coefficient of the radial dynamics on the L1 axes."""
        return 2 * self.b + 2 * SQRT2 * self.c - 8 * SQRT2 / SQRT3 * self.d - 4 / SQRT3 * self.e

    @property
    def K2(self) -> float:
        return 2 * self.b - 2 * SQRT2 * self.c + 8 * SQRT2 / SQRT3 * self.d - 4 / SQRT3 * self.e

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.b, self.c, self.d, self.e])

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dc_fields(self)}


@dataclass(frozen=True)
class GLParametrization:
    """Two-parameter family with d = 1, mu = 1 placing the cycle at its existence boundary."""

    h1: float
    h2: float

    def __post_init__(self):
        if not -1.0 < self.h1 < 1.0:
            raise ValueError(f"h1 must lie in (-1, 1), got {self.h1}")
        if not self.h2 > 0.0:
            raise ValueError(f"h2 must be positive, got {self.h2}")

    def coeffs(self) -> CoeffsGL:
        d = 1.0
        e = (d - self.h1) / (2 * SQRT2)
        c = (10 * SQRT3 * d + 2 * SQRT6 * e) / 9 + self.h2
        b = (3 * SQRT2 * c - 4 * SQRT6 * d + 2 * SQRT3 * e) / 3 - 1
        return CoeffsGL(mu=1.0, b=b, c=c, d=d, e=e)


@dataclass(frozen=True)
class PlanarParams:
    """Rates of the planar normal form z' = alpha z + beta conj(z)^2."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"alpha and beta must be positive (got {self.alpha}, {self.beta})")

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta])


# ---------------------------------------------------------------------------
# polynomial evaluation (plain arithmetic: works on floats, numpy arrays and inside numba)


def _d3_components(X, Y, U, V, p):
    a1, a2, a3, a4, a5, a6, a7, a8, a9, a10, b1, b2, b3, b4, b5, b6 = (
        p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8], p[9], p[10], p[11], p[12], p[13], p[14], p[15])
    R1 = X * X + Y * Y
    R2 = U * U + V * V
    f1 = ((a1 + a2) * X + (a3 + a4) * (X * X - Y * Y) + a5 * R1 + a6 * R2 + a7 * X * R1 + a8 * X * R2
          + (a9 + a10) * (U * U * U - 3.0 * U * V * V))
    f2 = ((a1 - a2) * Y + 2.0 * (a3 - a4) * X * Y + a7 * Y * R1 + a8 * Y * R2
          + (a9 - a10) * (3.0 * U * U * V - V * V * V))
    f3 = (b1 * U + (b2 + b3) * X * U + (b3 - b2) * Y * V + b4 * (U * U - V * V)
          + b5 * U * R1 + b6 * U * R2)
    f4 = (b1 * V + (b2 + b3) * X * V + (b2 - b3) * Y * U - 2.0 * b4 * U * V
          + b5 * V * R1 + b6 * V * R2)
    return f1, f2, f3, f4


def _gl_components(z1, z2, p):
    mu, b, c, d, e = p[0], p[1], p[2], p[3], p[4]
    A = -3.0 * SQRT3 * e - 0.5j * c
    B = d + 1j * e
    C = -3.0 * d + SQRT3 * c + 3j * e
    D = SQRT3 * (-e + 1j * (2.0 * d - 0.5 * SQRT3 * c))
    w1 = z1.conjugate()
    w2 = z2.conjugate()
    n = (z1 * w1 + z2 * w2).real
    s = mu + b * n
    F1 = s * z1 + A * z1 * z1 * w1 + 1j * c * z1 * z2 * w2 + B * z2 * z2 * z2 + C * w1 * w1 * z2 + D * w1 * w2 * w2
    F2 = s * z2 + A * z2 * z2 * w2 + 1j * c * z1 * w1 * z2 - B * z1 * z1 * z1 - C * z1 * w2 * w2 + D * w1 * w1 * w2
    return F1, F2


def _planar_components(X, Y, p):
    alpha, beta = p[0], p[1]
    return alpha * X + beta * (X * X - Y * Y), alpha * Y - 2.0 * beta * X * Y


_d3_nb = numba.njit(cache=True)(_d3_components)
_gl_nb = numba.njit(cache=True)(_gl_components)
_planar_nb = numba.njit(cache=True)(_planar_components)


@numba.njit(cache=True)
def d3_rhs(x, p, out):
    f1, f2, f3, f4 = _d3_nb(x[0], x[1], x[2], x[3], p)
    out[0] = f1
    out[1] = f2
    out[2] = f3
    out[3] = f4


@numba.njit(cache=True)
def gl_rhs(x, p, out):
    F1, F2 = _gl_nb(complex(x[0], x[1]), complex(x[2], x[3]), p)
    out[0] = F1.real
    out[1] = F1.imag
    out[2] = F2.real
    out[3] = F2.imag


@numba.njit(cache=True)
def planar_rhs(x, p, out):
    f1, f2 = _planar_nb(x[0], x[1], p)
    out[0] = f1
    out[1] = f2


@numba.njit(cache=True)
def planar_polar_rhs(x, p, out):
    """(r, theta)' = (alpha r + beta r^2 cos 3theta, -beta r sin 3theta)."""
    r, th = x[0], x[1]
    out[0] = p[0] * r + p[1] * r * r * math.cos(3.0 * th)
    out[1] = -p[1] * r * math.sin(3.0 * th)


_KERNELS = (d3_rhs, gl_rhs, planar_rhs, planar_polar_rhs)


@numba.njit(cache=True)
def rhs_dispatch(code, x, p, out):
    """Call a registered kernel by integer code (keeps compiled integrators cacheable on disk)."""
    if code == 0:
        d3_rhs(x, p, out)
    elif code == 1:
        gl_rhs(x, p, out)
    elif code == 2:
        planar_rhs(x, p, out)
    else:
        planar_polar_rhs(x, p, out)


def kernel_code(rhs) -> int:
    for i, k in enumerate(_KERNELS):
        if rhs is k:
            return i
    raise ValueError("right-hand side is not a registered kernel")


# ---------------------------------------------------------------------------
# field specification


@dataclass(frozen=True)
class VectorFieldSpec:
    """A polynomial family, its coefficients and the symmetry group attached to it.

    Construct through :func:`d3_cubic`, :func:`d3_tilde_cubic`, :func:`gl23_cubic`
    or :func:`planar_d3`, which check the coefficient constraints.  The bare
    constructor does not validate, so deliberately broken combinations can be
    built for testing.
    """

    family: Family
    coeffs: object
    group: qt.GroupTable = field(repr=False)

    @property
    def dim(self) -> int:
        return 2 if self.family is Family.PLANAR_D3 else 4

    @property
    def params(self) -> np.ndarray:
        return self.coeffs.as_array()

    @property
    def rhs(self):
        """numba-compiled right-hand side with signature rhs(x, params, out)."""
        if self.family in (Family.D3_CUBIC, Family.D3_TILDE_CUBIC):
            return d3_rhs
        if self.family is Family.GL23_CUBIC:
            return gl_rhs
        return planar_rhs


_GROUP_CACHE: dict[str, qt.GroupTable] = {}


def _cached_group(name: str) -> qt.GroupTable:
    if name not in _GROUP_CACHE:
        _GROUP_CACHE[name] = {
            "d3": qt.gamma_d3, "d3tilde": qt.gamma_d3_tilde, "gl23": qt.gl23_group, "planar": qt.planar_d3_group,
        }[name]()
    return _GROUP_CACHE[name]


def d3_cubic(coeffs: CoeffsD3) -> VectorFieldSpec:
    return VectorFieldSpec(Family.D3_CUBIC, coeffs, _cached_group("d3"))


def d3_tilde_cubic(coeffs: CoeffsD3) -> VectorFieldSpec:
    if not coeffs.tilde:
        coeffs = replace(coeffs, tilde=True)  # re-runs the a9 == a10, b2 == b3 check
    return VectorFieldSpec(Family.D3_TILDE_CUBIC, coeffs, _cached_group("d3tilde"))


def gl23_cubic(coeffs: CoeffsGL | GLParametrization) -> VectorFieldSpec:
    if isinstance(coeffs, GLParametrization):
        coeffs = coeffs.coeffs()
    return VectorFieldSpec(Family.GL23_CUBIC, coeffs, _cached_group("gl23"))


def planar_d3(params: PlanarParams) -> VectorFieldSpec:
    return VectorFieldSpec(Family.PLANAR_D3, params, _cached_group("planar"))


def _as_points(spec: VectorFieldSpec, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[-1] != spec.dim:
        raise ValueError(f"{spec.family.value} expects {spec.dim}-vectors, got trailing dimension {pts.shape[-1]}")
    return pts, single


def eval_field(spec: VectorFieldSpec, x) -> np.ndarray:
    """Evaluate the vector field at one point (shape (n,)) or many points (shape (m, n))."""
    pts, single = _as_points(spec, x)
    p = spec.params
    if spec.family is Family.GL23_CUBIC:
        F1, F2 = _gl_components(pts[:, 0] + 1j * pts[:, 1], pts[:, 2] + 1j * pts[:, 3], p)
        out = np.column_stack([F1.real, F1.imag, F2.real, F2.imag])
    elif spec.family is Family.PLANAR_D3:
        out = np.column_stack(_planar_components(pts[:, 0], pts[:, 1], p))
    else:
        out = np.column_stack(_d3_components(pts[:, 0], pts[:, 1], pts[:, 2], pts[:, 3], p))
    return out[0] if single else out


def _wirtinger_block(P: complex, Q: complex) -> np.ndarray:
    """Real 2x2 derivative of F(z, conj z) given dF/dz = P and dF/dconj(z) = Q."""
    s, d = P + Q, P - Q
    return np.array([[s.real, -d.imag], [s.imag, d.real]])


def jacobian(spec: VectorFieldSpec, x) -> np.ndarray:
    """Analytic Jacobian matrix at a single point."""
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.dim,):
        raise ValueError(f"{spec.family.value} expects a {spec.dim}-vector, got shape {x.shape}")
    p = spec.params
    if spec.family is Family.PLANAR_D3:
        a, b = p
        X, Y = x
        return np.array([[a + 2 * b * X, -2 * b * Y], [-2 * b * Y, a - 2 * b * X]])
    if spec.family is Family.GL23_CUBIC:
        return _gl_jacobian(x, spec.coeffs)
    return _d3_jacobian(x, p)


def _d3_jacobian(x, p) -> np.ndarray:
    a1, a2, a3, a4, a5, a6, a7, a8, a9, a10, b1, b2, b3, b4, b5, b6 = p
    X, Y, U, V = x
    R1, R2 = X * X + Y * Y, U * U + V * V
    A, Ap, sp, sm = a1 + a2, a1 - a2, a3 + a4, a3 - a4
    s9, d9 = a9 + a10, a9 - a10
    bp, bm = b2 + b3, b3 - b2
    return np.array([
        [A + 2 * sp * X + 2 * a5 * X + a7 * (R1 + 2 * X * X) + a8 * R2,
         -2 * sp * Y + 2 * a5 * Y + 2 * a7 * X * Y,
         2 * a6 * U + 2 * a8 * X * U + 3 * s9 * (U * U - V * V),
         2 * a6 * V + 2 * a8 * X * V - 6 * s9 * U * V],
        [2 * sm * Y + 2 * a7 * X * Y,
         Ap + 2 * sm * X + a7 * (R1 + 2 * Y * Y) + a8 * R2,
         2 * a8 * Y * U + 6 * d9 * U * V,
         2 * a8 * Y * V + 3 * d9 * (U * U - V * V)],
        [bp * U + 2 * b5 * U * X,
         bm * V + 2 * b5 * U * Y,
         b1 + bp * X + 2 * b4 * U + b5 * R1 + b6 * (R2 + 2 * U * U),
         bm * Y - 2 * b4 * V + 2 * b6 * U * V],
        [bp * V + 2 * b5 * V * X,
         -bm * U + 2 * b5 * V * Y,
         -bm * Y - 2 * b4 * V + 2 * b6 * U * V,
         b1 + bp * X - 2 * b4 * U + b5 * R1 + b6 * (R2 + 2 * V * V)],
    ])


def _gl_jacobian(x, cf: CoeffsGL) -> np.ndarray:
    mu, b, c = cf.mu, cf.b, cf.c
    A, B, C, D = cf.A, cf.B, cf.C, cf.D
    z1, z2 = complex(x[0], x[1]), complex(x[2], x[3])
    w1, w2 = z1.conjugate(), z2.conjugate()
    n1, n2 = (z1 * w1).real, (z2 * w2).real
    s = mu + b * (n1 + n2)
    ic = 1j * c
    P11 = s + b * n1 + 2 * A * n1 + ic * n2
    Q11 = (b + A) * z1 * z1 + 2 * C * w1 * z2 + D * w2 * w2
    P12 = b * w2 * z1 + ic * z1 * w2 + 3 * B * z2 * z2 + C * w1 * w1
    Q12 = b * z2 * z1 + ic * z1 * z2 + 2 * D * w1 * w2
    P21 = b * w1 * z2 + ic * w1 * z2 - 3 * B * z1 * z1 - C * w2 * w2
    Q21 = b * z1 * z2 + ic * z1 * z2 + 2 * D * w1 * w2
    P22 = s + b * n2 + 2 * A * n2 + ic * n1
    Q22 = (b + A) * z2 * z2 - 2 * C * z1 * w2 + D * w1 * w1
    J = np.empty((4, 4))
    J[0:2, 0:2] = _wirtinger_block(P11, Q11)
    J[0:2, 2:4] = _wirtinger_block(P12, Q12)
    J[2:4, 0:2] = _wirtinger_block(P21, Q21)
    J[2:4, 2:4] = _wirtinger_block(P22, Q22)
    return J


# ---------------------------------------------------------------------------
# equivariance


def verify_equivariance(spec: VectorFieldSpec, samples: int = 100, seed: int = 0, scale: float = 1.0) -> float:
    """max over group elements and random points of |f(g x) - g f(x)| / (1 + |f(x)|)."""
    rng = np.random.default_rng(seed)
    x = scale * rng.standard_normal((samples, spec.dim))
    fx = eval_field(spec, x)
    denom = 1.0 + np.linalg.norm(fx, axis=1)
    worst = 0.0
    for g in spec.group:
        res = np.linalg.norm(eval_field(spec, x @ g.T) - fx @ g.T, axis=1) / denom
        worst = max(worst, float(res.max()))
    return worst


# ---------------------------------------------------------------------------
# equilibria and eigenvalues


@dataclass(frozen=True)
class EigenEntry:
    value: float
    multiplicity: int
    basis: np.ndarray  # (multiplicity, dim) orthonormal rows
    role: str  # radial | contracting | expanding | neutral


@dataclass(frozen=True)
class EquilibriumReport:
    label: str
    position: np.ndarray
    radial_eigenvalue: float
    eigen: tuple
    residual: float

    def values(self) -> np.ndarray:
        return np.sort(np.concatenate([[e.value] * e.multiplicity for e in self.eigen]))

    def by_role(self, role: str) -> list[EigenEntry]:
        return [e for e in self.eigen if e.role == role]


def d3_axis_direction() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


_GL_AXES: dict[str, np.ndarray] = {}


def gl23_axis_directions() -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors spanning L1(0,0) and L2(0,0)."""
    if not _GL_AXES:
        inv = dict(qt.enumerate_isotropy_gl23(_cached_group("gl23")))
        for k in ("L1(0,0)", "L2(0,0)"):
            v = inv[k].basis[0].copy()
            v.setflags(write=False)
            _GL_AXES[k] = v
    return _GL_AXES["L1(0,0)"], _GL_AXES["L2(0,0)"]


def _newton_on_axis(spec: VectorFieldSpec, u: np.ndarray, R0: float) -> float:
    """Polish a zero of g(R) = <f(R u), u> by 1-D Newton."""
    R = R0
    for _ in range(60):
        x = R * u
        g = float(eval_field(spec, x) @ u)
        dg = float(u @ jacobian(spec, x) @ u)
        step = g / dg
        R -= step
        if abs(step) <= 1e-16 * max(1.0, abs(R)):
            break
    return R


def _numeric_eigen(J: np.ndarray, position: np.ndarray, group_tol: float = 1e-6) -> tuple:
    from scipy.linalg import null_space

    w = np.linalg.eigvals(J)
    vals = np.sort(w.real)
    groups: list[list[float]] = []
    for v in vals:
        if groups and abs(v - groups[-1][-1]) <= group_tol * max(1.0, abs(v)):
            groups[-1].append(v)
        else:
            groups.append([v])
    unit_pos = position / np.linalg.norm(position)
    entries = []
    for gvals in groups:
        lam = float(np.mean(gvals))
        k = len(gvals)
        ns = null_space(J - lam * np.eye(J.shape[0]), rcond=1e-7)
        if ns.shape[1] != k:
            # fall back on the eigenvectors returned by the solver
            wv, vv = np.linalg.eig(J)
            idx = np.argsort(np.abs(wv - lam))[:k]
            ns, _ = np.linalg.qr(vv[:, idx].real)
        basis = ns.T
        if k == 1 and abs(basis[0] @ unit_pos) > 0.99:
            role = "radial"
        elif lam < 0:
            role = "contracting"
        elif lam > 0:
            role = "expanding"
        else:
            role = "neutral"
        entries.append(EigenEntry(lam, k, basis, role))
    radial = [e.value for e in entries if e.role == "radial"]
    return tuple(entries), (radial[0] if radial else float("nan"))


def equilibria_on_axes(spec: VectorFieldSpec) -> list[EquilibriumReport]:
    """The two cycle equilibria xi1, xi2 with their spectra."""
    if spec.family is Family.PLANAR_D3:
        raise DomainError("the planar family has no on-axis cycle equilibria")
    rep = existence_report(spec)
    if spec.family is Family.GL23_CUBIC:
        for cond in rep.conditions:
            if cond.name.split(":")[0] in ("xi1-exists", "xi2-exists") and not cond.passed:
                raise NoEquilibriumError(cond.message)
        cf = spec.coeffs
        u1, u2 = gl23_axis_directions()
        starts = [("xi1", u1, SQRT2 * math.sqrt(cf.mu / -cf.K1)), ("xi2", u2, SQRT2 * math.sqrt(cf.mu / -cf.K2))]
    else:
        alpha = spec.coeffs.alpha
        if not alpha > 0:
            raise NoEquilibriumError(f"(alpha > 0) violated: alpha = {alpha:g} <= 0")
        u = d3_axis_direction()
        starts = [("xi1", u, math.sqrt(alpha)), ("xi2", u, -math.sqrt(alpha))]
    out = []
    for label, u, R0 in starts:
        R = _newton_on_axis(spec, u, R0)
        x = R * u
        x.setflags(write=False)
        J = jacobian(spec, x)
        eig, radial = _numeric_eigen(J, x)
        res = float(np.linalg.norm(eval_field(spec, x)))
        out.append(EquilibriumReport(label, x, radial, eig, res))
    return out


@dataclass(frozen=True)
class AnalyticEigenvalue:
    name: str  # conventional symbol of the eigenvalue
    value: float
    multiplicity: int
    direction: str
    role: str  # from the sign and geometry, which may differ from the symbol


def analytic_eigenvalues(spec: VectorFieldSpec, which: str) -> list[AnalyticEigenvalue]:
    """Closed-form spectrum at xi1 or xi2."""
    if which not in ("xi1", "xi2"):
        raise ValueError("which must be 'xi1' or 'xi2'")
    first = which == "xi1"

    def role(v):
        return "contracting" if v < 0 else "expanding"

    if spec.family in (Family.D3_CUBIC, Family.D3_TILDE_CUBIC):
        cf = spec.coeffs
        alpha = cf.alpha
        if not alpha > 0:
            raise NoEquilibriumError(f"(alpha > 0) violated: alpha = {alpha:g} <= 0")
        sa = math.sqrt(alpha) * (1 if first else -1)
        y1 = cf.alpha_prime + 2 * (cf.a3 - cf.a4) * sa - alpha
        z2 = cf.b1 + (cf.b2 + cf.b3) * sa + cf.b5 * alpha
        return [
            AnalyticEigenvalue("r", -2 * alpha, 1, "x1", "radial"),
            AnalyticEigenvalue("-c1" if first else "e2", y1, 1, "y1", role(y1)),
            AnalyticEigenvalue("e1" if first else "-c2", z2, 2, "x2,y2", role(z2)),
        ]
    if spec.family is Family.GL23_CUBIC:
        cf = spec.coeffs
        b, c, d, e, mu = cf.b, cf.c, cf.d, cf.e, cf.mu
        K = cf.K1 if first else cf.K2
        if not K < 0:
            raise NoEquilibriumError(f"(xi{1 if first else 2}-exists) violated: K{1 if first else 2} = {K:.6g} >= 0")
        r2 = mu / -K
        if first:
            mlt = 2 * SQRT2 * r2 / 3 * (-9 * c + 10 * SQRT3 * d - 2 * SQRT6 * e)
            sgl = r2 * (-32 / SQRT3 * e + 8 * SQRT2 / SQRT3 * d)
        else:
            mlt = 2 * SQRT2 * r2 / 3 * (9 * c - 10 * SQRT3 * d - 2 * SQRT6 * e)
            sgl = r2 * (-32 / SQRT3 * e - 8 * SQRT2 / SQRT3 * d)
        k = 1 if first else 2
        return [
            AnalyticEigenvalue("r", -2 * mu, 1, "axis", "radial"),
            AnalyticEigenvalue(f"lambda{k}_mlt", mlt, 2, "invariant plane of the reflection", role(mlt)),
            AnalyticEigenvalue(f"lambda{k}_sgl", sgl, 1, "P1 complement of the axis", role(sgl)),
        ]
    raise DomainError("closed-form eigenvalues are only available for the 4-D families")


def analytic_values(spec: VectorFieldSpec, which: str) -> np.ndarray:
    return np.sort(np.concatenate([[a.value] * a.multiplicity for a in analytic_eigenvalues(spec, which)]))


@dataclass(frozen=True)
class CycleRates:
    """Magnitudes of the contracting and expanding eigenvalues along the cycle."""

    c1: float
    e1: float
    c2: float
    e2: float
    double_at_xi1: str  # 'contracting' or 'expanding'

    @property
    def h(self) -> float:
        return self.c1 * self.c2 / (self.e1 * self.e2)


def cycle_rates(spec: VectorFieldSpec) -> CycleRates:
    """c_j, e_j taken by sign from the closed-form spectra at xi1 and xi2."""
    rates = {}
    dbl = ""
    for j, which in ((1, "xi1"), (2, "xi2")):
        for a in analytic_eigenvalues(spec, which):
            if a.role == "radial":
                continue
            if a.value < 0:
                rates[f"c{j}"] = -a.value
            else:
                rates[f"e{j}"] = a.value
            if j == 1 and a.multiplicity == 2:
                dbl = a.role
    missing = [k for k in ("c1", "e1", "c2", "e2") if k not in rates]
    if missing:
        raise NoEquilibriumError(f"equilibria are not saddles of the required type (missing {', '.join(missing)})")
    return CycleRates(rates["c1"], rates["e1"], rates["c2"], rates["e2"], dbl)


# ---------------------------------------------------------------------------
# existence conditions


@dataclass(frozen=True)
class Condition:
    name: str
    lhs: float
    rhs: float
    relation: str  # '<' or '>'
    passed: bool
    message: str
    kind: str = "required"  # required | sufficient | regime


def _cond(name: str, lhs: float, rel: str, rhs: float, text: str, kind: str = "required") -> Condition:
    ok = lhs < rhs if rel == "<" else lhs > rhs
    neg = ">=" if rel == "<" else "<="
    msg = f"({name}) {'holds' if ok else 'violated'}: {text} = {lhs:.6g} {rel if ok else neg} {rhs:.6g}"
    return Condition(name, float(lhs), float(rhs), rel, bool(ok), msg, kind)


@dataclass(frozen=True)
class ExistenceReport:
    family: Family
    conditions: tuple

    @property
    def passed(self) -> bool:
        """True when every required condition holds (sufficient and regime predicates are informative)."""
        return all(c.passed for c in self.conditions if c.kind == "required")

    def failures(self, kind: str | None = "required") -> list[Condition]:
        return [c for c in self.conditions if not c.passed and (kind is None or c.kind == kind)]

    def get(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)


def existence_report(spec: VectorFieldSpec) -> ExistenceReport:
    conds: list[Condition] = []
    if spec.family in (Family.D3_CUBIC, Family.D3_TILDE_CUBIC):
        cf = spec.coeffs
        alpha, ap = cf.alpha, cf.alpha_prime
        conds.append(_cond("alpha>0", alpha, ">", 0.0, "alpha"))
        conds.append(_cond("plane-connection:a3+a4", cf.a3 + cf.a4, ">", 0.0, "a3+a4", "sufficient"))
        conds.append(_cond("plane-connection:a3-a4", cf.a3 - cf.a4, ">", 0.0, "a3-a4", "sufficient"))
        disc = (cf.a3 - cf.a4) ** 2 + ap
        if alpha > 0 and disc >= 0:
            conds.append(_cond("plane-connection:root", cf.a3 - cf.a4 + math.sqrt(disc), "<", math.sqrt(alpha),
                               "a3-a4+sqrt((a3-a4)^2+alpha')", "sufficient"))
        else:
            conds.append(Condition("plane-connection:root", float("nan"), float("nan"), "<", False,
                                   "(plane-connection:root) violated: square roots undefined", "sufficient"))
        if alpha > 0:
            ev1 = {a.direction: a.value for a in analytic_eigenvalues(spec, "xi1")}
            ev2 = {a.direction: a.value for a in analytic_eigenvalues(spec, "xi2")}
            conds.append(_cond("xi1:y1-expanding", ev1["y1"], ">", 0.0, "eigenvalue along y1 at xi1"))
            conds.append(_cond("xi1:z2-contracting", ev1["x2,y2"], "<", 0.0, "double eigenvalue at xi1"))
            conds.append(_cond("xi2:y1-contracting", ev2["y1"], "<", 0.0, "eigenvalue along y1 at xi2"))
            conds.append(_cond("xi2:z2-expanding", ev2["x2,y2"], ">", 0.0, "double eigenvalue at xi2"))
            if all(c.passed for c in conds[-4:]):
                r = cycle_rates(spec)
                conds.append(_cond("3c1>e1", 3 * r.c1, ">", r.e1, "3c1", "regime"))
                conds.append(_cond("h>1", r.h, ">", 1.0, "c1c2/(e1e2)", "regime"))
    elif spec.family is Family.GL23_CUBIC:
        cf = spec.coeffs
        b, c, d, e = cf.b, cf.c, cf.d, cf.e
        conds.append(_cond("xi1-exists:K1", cf.K1, "<", 0.0, "2b+2sqrt2c-(8sqrt2/sqrt3)d-(4/sqrt3)e"))
        conds.append(_cond("xi2-exists:K2", cf.K2, "<", 0.0, "2b-2sqrt2c+(8sqrt2/sqrt3)d-(4/sqrt3)e"))
        if cf.K1 < 0 and cf.K2 < 0:
            ev = {}
            for which in ("xi1", "xi2"):
                for a in analytic_eigenvalues(spec, which):
                    ev[a.name] = a.value
            conds.append(_cond("cycle-signs:l1sgl", ev["lambda1_sgl"], ">", 0.0, "lambda1_sgl"))
            conds.append(_cond("cycle-signs:l2sgl", ev["lambda2_sgl"], "<", 0.0, "lambda2_sgl"))
            conds.append(_cond("cycle-signs:l1mlt", ev["lambda1_mlt"], "<", 0.0, "lambda1_mlt"))
            conds.append(_cond("cycle-signs:l2mlt", ev["lambda2_mlt"], ">", 0.0, "lambda2_mlt"))
        conds.append(_cond("coef:-d<2sqrt2e", -d, "<", 2 * SQRT2 * e, "-d"))
        conds.append(_cond("coef:2sqrt2e<d", 2 * SQRT2 * e, "<", d, "2sqrt2e"))
        cmin = max(10 * SQRT3 * d + 2 * SQRT6 * e, 10 * SQRT3 * d - 2 * SQRT6 * e) / 9
        conds.append(_cond("coef:c", c, ">", cmin, "c"))
        bmax = min(3 * SQRT2 * c - 4 * SQRT6 * d + 2 * SQRT3 * e, -3 * SQRT2 * c + 4 * SQRT6 * d + 2 * SQRT3 * e) / 3
        conds.append(_cond("coef:b", b, "<", bmax, "b"))
        if all(x.passed for x in conds):
            r = cycle_rates(spec)
            conds.append(_cond("3c1>e1", 3 * r.c1, ">", r.e1, "3c1", "regime"))
    else:
        cf = spec.coeffs
        conds.append(_cond("alpha>0", cf.alpha, ">", 0.0, "alpha"))
        conds.append(_cond("beta>0", cf.beta, ">", 0.0, "beta"))
    return ExistenceReport(spec.family, tuple(conds))


# ---------------------------------------------------------------------------
# restriction to invariant subspaces


def _monomials(k: int, degree: int = 3) -> list[tuple[int, ...]]:
    out = []
    for deg in range(1, degree + 1):
        for combo in combinations_with_replacement(range(k), deg):
            e = [0] * k
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return out


@dataclass(frozen=True)
class ReducedField:
    """Polynomial field in the coordinates u of a subspace x = basis^T u."""

    basis: np.ndarray  # (k, n)
    exponents: tuple  # monomial exponent tuples
    coefficients: np.ndarray  # (k, n_monomials)
    residual: float

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def __call__(self, u) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        mons = np.column_stack([np.prod(u ** np.array(e), axis=1) for e in self.exponents])
        out = mons @ self.coefficients.T
        return out[0] if out.shape[0] == 1 else out

    def coefficient(self, component: int, exponent: tuple, tol: float = 1e-12) -> float:
        c = float(self.coefficients[component, self.exponents.index(tuple(exponent))])
        return 0.0 if abs(c) < tol else c

    def terms(self, tol: float = 1e-12) -> list[dict]:
        return [{e: float(c) for e, c in zip(self.exponents, row) if abs(c) > tol} for row in self.coefficients]


def restrict(spec: VectorFieldSpec, subspace: qt.LinearSubspace, samples: int = 64, seed: int = 0,
             tol: float = 1e-10) -> ReducedField:
    """Restrict the field to a flow-invariant subspace and recover the reduced polynomial."""
    B = subspace.basis
    k = B.shape[0]
    if k == 0:
        raise DomainError("cannot restrict to the zero subspace")
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1.0, 1.0, size=(samples, k))
    x = u @ B
    fx = eval_field(spec, x)
    off = fx - (fx @ B.T) @ B
    res = float(np.abs(off).max() / (1.0 + np.abs(fx).max()))
    if res > tol:
        raise InvarianceViolationError("subspace is not flow-invariant", res)
    exps = _monomials(k)
    mons = np.column_stack([np.prod(u ** np.array(e), axis=1) for e in exps])
    coef, *_ = np.linalg.lstsq(mons, fx @ B.T, rcond=None)
    coef = coef.T
    coef[np.abs(coef) < 1e-13] = 0.0
    return ReducedField(B, tuple(exps), coef, res)


def axis_restriction(spec: VectorFieldSpec, direction) -> tuple[float, float, float]:
    """Coefficients (m, q, K) of R' = m R + q R^2 + K R^3 on the line spanned by ``direction``."""
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    red = restrict(spec, qt.LinearSubspace(u[None, :]))
    return red.coefficient(0, (1,)), red.coefficient(0, (2,)), red.coefficient(0, (3,))
