"""Quaternion algebra, finite groups of 4x4 orthogonal matrices and their fixed subspaces.

Coordinates are (x1, y1, x2, y2) and a quaternion q = (q1, q2, q3, q4) is
identified with the point (x1, y1, x2, y2) = (q1, q2, q3, q4), i.e.
z1 = q1 + i q2 and z2 = q3 + i q4.  A pair of unit quaternions (l; r) acts by
q -> l q r^-1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space, subspace_angles

from .errors import DomainError, GroupGrowthError, InvalidElementError

UNIT_TOL = 1e-12
DEDUPE_TOL = 1e-6
CLOSURE_TOL = 1e-9

SQRT2 = math.sqrt(2.0)
SQRT3 = math.sqrt(3.0)


# ---------------------------------------------------------------------------
# quaternions


@dataclass(frozen=True)
class Quaternion:
    q1: float
    q2: float = 0.0
    q3: float = 0.0
    q4: float = 0.0

    @classmethod
    def from_array(cls, a) -> "Quaternion":
        a = np.asarray(a, dtype=float).ravel()
        if a.shape != (4,):
            raise ValueError(f"quaternion needs 4 components, got shape {a.shape}")
        return cls(*(float(v) for v in a))

    def as_array(self) -> np.ndarray:
        return np.array([self.q1, self.q2, self.q3, self.q4])

    def __iter__(self):
        return iter((self.q1, self.q2, self.q3, self.q4))

    def __mul__(self, other: "Quaternion") -> "Quaternion":
        return quat_mul(self, other)

    def __neg__(self) -> "Quaternion":
        return Quaternion(-self.q1, -self.q2, -self.q3, -self.q4)

    def conj(self) -> "Quaternion":
        return Quaternion(self.q1, -self.q2, -self.q3, -self.q4)

    def norm2(self) -> float:
        return self.q1**2 + self.q2**2 + self.q3**2 + self.q4**2

    def norm(self) -> float:
        return math.sqrt(self.norm2())

    def normalized(self) -> "Quaternion":
        n = self.norm()
        if n == 0.0 or not math.isfinite(n):
            raise InvalidElementError("cannot normalize a zero or non-finite quaternion")
        return Quaternion(self.q1 / n, self.q2 / n, self.q3 / n, self.q4 / n)

    def inverse(self) -> "Quaternion":
        n2 = self.norm2()
        if n2 == 0.0:
            raise InvalidElementError("zero quaternion has no inverse")
        c = self.conj()
        return Quaternion(c.q1 / n2, c.q2 / n2, c.q3 / n2, c.q4 / n2)

    def is_unit(self, tol: float = UNIT_TOL) -> bool:
        return abs(self.norm() - 1.0) <= tol


def _qmul_arrays(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a1, a2, a3, a4 = a
    b1, b2, b3, b4 = b
    return np.array([
        a1 * b1 - a2 * b2 - a3 * b3 - a4 * b4,
        a1 * b2 + a2 * b1 + a3 * b4 - a4 * b3,
        a1 * b3 - a2 * b4 + a3 * b1 + a4 * b2,
        a1 * b4 + a2 * b3 - a3 * b2 + a4 * b1,
    ])


def quat_mul(a: Quaternion, b: Quaternion) -> Quaternion:
    """Hamilton product (ij = k, jk = i, ki = j)."""
    return Quaternion.from_array(_qmul_arrays(a.as_array(), b.as_array()))


def left_mult_matrix(q: Quaternion) -> np.ndarray:
    """Matrix of x -> q x."""
    a = q.as_array()
    return np.column_stack([_qmul_arrays(a, e) for e in np.eye(4)])


def right_mult_matrix(q: Quaternion) -> np.ndarray:
    """Matrix of x -> x q."""
    a = q.as_array()
    return np.column_stack([_qmul_arrays(e, a) for e in np.eye(4)])


# ---------------------------------------------------------------------------
# rotations as quaternion pairs


def _canonical_sign(left: Quaternion, right: Quaternion) -> tuple[Quaternion, Quaternion]:
    for v in left:
        if abs(v) > 1e-14:
            if v < 0:
                return -left, -right
            break
    return left, right


@dataclass(frozen=True)
class Rotation4:
    """SO(4) element q -> l q r~, stored with a canonical overall sign."""

    left: Quaternion
    right: Quaternion

    def __post_init__(self):
        for name, q in (("left", self.left), ("right", self.right)):
            if not q.is_unit(1e-10):
                raise InvalidElementError(f"{name} quaternion has norm {q.norm():.15g}, expected 1")
        l, r = _canonical_sign(self.left, self.right)
        object.__setattr__(self, "left", l)
        object.__setattr__(self, "right", r)

    @classmethod
    def from_arrays(cls, left, right, normalize: bool = False) -> "Rotation4":
        l = Quaternion.from_array(left)
        r = Quaternion.from_array(right)
        if normalize:
            l, r = l.normalized(), r.normalized()
        return cls(l, r)

    def compose(self, other: "Rotation4") -> "Rotation4":
        """self after other: matrix(self) @ matrix(other)."""
        return Rotation4(quat_mul(self.left, other.left), quat_mul(self.right, other.right))

    def __matmul__(self, other: "Rotation4") -> "Rotation4":
        return self.compose(other)

    def matrix(self) -> np.ndarray:
        return rotation_matrix(self)

    def inverse(self) -> "Rotation4":
        return Rotation4(self.left.conj(), self.right.conj())


def rotation_matrix(g: Rotation4) -> np.ndarray:
    """Orthogonal 4x4 matrix M with M q = l q r~."""
    for name, q in (("left", g.left), ("right", g.right)):
        if not q.is_unit(UNIT_TOL * 100):
            raise InvalidElementError(f"{name} quaternion is not unit (norm {q.norm():.15g})")
    return left_mult_matrix(g.left) @ right_mult_matrix(g.right.conj())


def _quat_from_rotation3(R: np.ndarray) -> np.ndarray:
    """Unit quaternion r with r v r~ = R v for pure quaternions v (Shepperd's method)."""
    tr = np.trace(R)
    diag = np.diag(R)
    k = int(np.argmax([tr, *diag]))
    if k == 0:
        w = 0.5 * math.sqrt(max(1.0 + tr, 0.0))
        x = (R[2, 1] - R[1, 2]) / (4 * w)
        y = (R[0, 2] - R[2, 0]) / (4 * w)
        z = (R[1, 0] - R[0, 1]) / (4 * w)
    elif k == 1:
        x = 0.5 * math.sqrt(max(1.0 + R[0, 0] - R[1, 1] - R[2, 2], 0.0))
        w = (R[2, 1] - R[1, 2]) / (4 * x)
        y = (R[0, 1] + R[1, 0]) / (4 * x)
        z = (R[0, 2] + R[2, 0]) / (4 * x)
    elif k == 2:
        y = 0.5 * math.sqrt(max(1.0 - R[0, 0] + R[1, 1] - R[2, 2], 0.0))
        w = (R[0, 2] - R[2, 0]) / (4 * y)
        x = (R[0, 1] + R[1, 0]) / (4 * y)
        z = (R[1, 2] + R[2, 1]) / (4 * y)
    else:
        z = 0.5 * math.sqrt(max(1.0 - R[0, 0] - R[1, 1] + R[2, 2], 0.0))
        w = (R[1, 0] - R[0, 1]) / (4 * z)
        x = (R[0, 2] + R[2, 0]) / (4 * z)
        y = (R[1, 2] + R[2, 1]) / (4 * z)
    q = np.array([w, x, y, z])
    return q / np.linalg.norm(q)


def rotation_from_matrix(M: np.ndarray, tol: float = 1e-9) -> Rotation4:
    """Recover the quaternion pair of a matrix in SO(4)."""
    M = np.asarray(M, dtype=float)
    if M.shape != (4, 4) or np.abs(M.T @ M - np.eye(4)).max() > tol:
        raise InvalidElementError("matrix is not orthogonal 4x4")
    if np.linalg.det(M) < 0:
        raise InvalidElementError("orientation-reversing matrix has no quaternion pair")
    a = M[:, 0]  # image of 1 equals l r~
    abar = a * np.array([1, -1, -1, -1])
    # r e_k r~ = a~ M e_k for the pure units e_k
    R = np.column_stack([_qmul_arrays(abar, M[:, k])[1:] for k in (1, 2, 3)])
    r = _quat_from_rotation3(R)
    l = _qmul_arrays(a, r)
    g = Rotation4.from_arrays(l, r, normalize=True)
    if np.abs(rotation_matrix(g) - M).max() > 1e3 * tol:
        raise InvalidElementError("matrix could not be factored as a quaternion pair")
    return g


# ---------------------------------------------------------------------------
# groups


def _check_orthogonal(M: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidElementError(f"expected a square matrix, got shape {M.shape}")
    err = np.abs(M.T @ M - np.eye(M.shape[0])).max()
    if err > tol:
        raise InvalidElementError(f"matrix is not orthogonal (|M^T M - I| = {err:.2e})")
    return M


def _sort_key(M: np.ndarray) -> tuple:
    # identity first, then lexicographic on rounded entries
    r = np.round(M, 9) + 0.0
    return (0 if np.allclose(M, np.eye(M.shape[0]), atol=1e-9) else 1, tuple(r.ravel()))


@dataclass(frozen=True)
class GroupTable:
    elements: tuple
    product: np.ndarray = field(repr=False)
    inverse: np.ndarray = field(repr=False)

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.elements[i]

    def index_of(self, M: np.ndarray, tol: float = CLOSURE_TOL) -> int:
        M = np.asarray(M, dtype=float)
        for i, g in enumerate(self.elements):
            if np.linalg.norm(g - M) <= tol:
                return i
        raise KeyError("matrix is not an element of the group")

    def contains(self, M: np.ndarray, tol: float = CLOSURE_TOL) -> bool:
        try:
            self.index_of(M, tol)
        except KeyError:
            return False
        return True

    def generated_by(self, indices) -> list[int]:
        """Indices of the subgroup generated by the given element indices."""
        found = {0}
        frontier = list(indices)
        while frontier:
            i = frontier.pop()
            if i in found:
                continue
            found.add(i)
            for j in list(found):
                for k in (int(self.product[i, j]), int(self.product[j, i])):
                    if k not in found:
                        frontier.append(k)
        return sorted(found)

    def is_subgroup(self, indices) -> bool:
        s = set(indices)
        if 0 not in s:
            return False
        return all(int(self.product[i, j]) in s for i in s for j in s)

    def element_order(self, i: int) -> int:
        k, n = i, 1
        while k != 0:
            k = int(self.product[k, i])
            n += 1
        return n

    def to_text(self, digits: int = 12) -> str:
        lines = [f"order {self.order}", f"dim {self.dim}"]
        for n, M in enumerate(self.elements):
            lines.append(f"element {n}")
            for row in M:
                lines.append(" ".join(f"{v + 0.0:.{digits}g}" for v in row))
        return "\n".join(lines) + "\n"


def generate_group(generators, max_order: int = 512) -> GroupTable:
    """Close a set of orthogonal matrices under multiplication."""
    gens = [_check_orthogonal(g) for g in generators]
    if not gens:
        raise ValueError("at least one generator is required")
    n = gens[0].shape[0]
    if any(g.shape != (n, n) for g in gens):
        raise InvalidElementError("generators have inconsistent dimensions")

    def find(M, pool):
        for P in pool:
            if np.linalg.norm(P - M) <= DEDUPE_TOL:
                return True
        return False

    elements = [np.eye(n)]
    for g in gens:
        if not find(g, elements):
            elements.append(g.copy())
    frontier = list(elements)
    while frontier:
        new = []
        for a in frontier:
            for g in gens:
                c = g @ a
                if not find(c, elements):
                    elements.append(c)
                    new.append(c)
                    if len(elements) > max_order:
                        raise GroupGrowthError(f"closure exceeds max_order={max_order}")
        frontier = new

    elements.sort(key=_sort_key)
    for M in elements:
        M.setflags(write=False)
    order = len(elements)
    stack = np.stack(elements)

    def locate(M):
        d = np.linalg.norm((stack - M).reshape(order, -1), axis=1)
        i = int(np.argmin(d))
        if d[i] > CLOSURE_TOL:
            raise GroupGrowthError(f"product not matched within {CLOSURE_TOL} (distance {d[i]:.2e})")
        return i

    product = np.empty((order, order), dtype=np.int64)
    for i, a in enumerate(elements):
        for j, b in enumerate(elements):
            product[i, j] = locate(a @ b)
    inverse = np.array([int(np.where(product[i] == 0)[0][0]) for i in range(order)], dtype=np.int64)
    product.setflags(write=False)
    inverse.setflags(write=False)
    return GroupTable(tuple(elements), product, inverse)


# ---------------------------------------------------------------------------
# subspaces


@dataclass(frozen=True)
class LinearSubspace:
    basis: np.ndarray  # shape (dim, n), orthonormal rows
    ambient: int = 4

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float).reshape(-1, self.ambient)
        if b.shape[0]:
            gram = b @ b.T
            if np.abs(gram - np.eye(b.shape[0])).max() > 1e-10:
                raise ValueError("basis is not orthonormal")
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @classmethod
    def from_vectors(cls, vectors, ambient: int = 4, tol: float = 1e-10) -> "LinearSubspace":
        """Orthonormalize a spanning set (rank decided by singular values)."""
        v = np.asarray(vectors, dtype=float).reshape(-1, ambient)
        if v.shape[0] == 0:
            return cls(np.zeros((0, ambient)), ambient)
        u, s, vt = np.linalg.svd(v, full_matrices=False)
        k = int(np.sum(s > tol * max(1.0, s[0])))
        return cls(_canonical_basis(vt[:k]), ambient)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def projector(self) -> np.ndarray:
        return self.basis.T @ self.basis

    def project(self, x: np.ndarray) -> np.ndarray:
        return self.projector() @ np.asarray(x, dtype=float)

    def distance(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.project(x)))

    def contains(self, x: np.ndarray, tol: float = 1e-10) -> bool:
        return self.distance(x) <= tol * max(1.0, float(np.linalg.norm(x)))

    def intersect(self, other: "LinearSubspace") -> "LinearSubspace":
        n = self.ambient
        A = np.vstack([np.eye(n) - self.projector(), np.eye(n) - other.projector()])
        ns = null_space(A, rcond=1e-9)
        return LinearSubspace(_canonical_basis(ns.T), n)

    def same_as(self, other: "LinearSubspace", tol: float = 1e-8) -> bool:
        if self.dim != other.dim:
            return False
        if self.dim == 0:
            return True
        return float(np.max(subspace_angles(self.basis.T, other.basis.T))) <= tol

    def transformed(self, M: np.ndarray) -> "LinearSubspace":
        return LinearSubspace.from_vectors(self.basis @ np.asarray(M).T, self.ambient)


def _canonical_basis(b: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis: reduced echelon-like rotation of the span."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] == 0:
        return b
    q, _ = np.linalg.qr(b.T)
    q = q[:, : b.shape[0]].T
    # rotate within the span so the basis is independent of solver details
    P = q.T @ q
    cols = []
    for e in np.eye(b.shape[1]):
        v = P @ e
        for c in cols:
            v = v - (c @ v) * c
        nv = np.linalg.norm(v)
        if nv > 1e-8:
            cols.append(v / nv)
        if len(cols) == b.shape[0]:
            break
    return np.array(cols)


def fixed_subspace(elements, group: GroupTable | None = None) -> LinearSubspace:
    """Common 1-eigenspace of a subgroup given as matrices or as indices into ``group``."""
    if group is not None:
        idx = list(elements)
        if not group.is_subgroup(idx):
            raise DomainError("element subset is not closed under multiplication")
        mats = [group[i] for i in idx]
    else:
        mats = [np.asarray(m, dtype=float) for m in elements]
        _check_closed(mats)
    n = mats[0].shape[0]
    P = sum(mats) / len(mats)
    if np.abs(P @ P - P).max() > 1e-10:
        raise DomainError("averaging operator is not idempotent; input is not a group")
    w, v = np.linalg.eigh(0.5 * (P + P.T))
    basis = v[:, w > 0.5].T
    return LinearSubspace(_canonical_basis(basis) if basis.shape[0] else np.zeros((0, n)), n)


def _check_closed(mats) -> None:
    n = mats[0].shape[0]
    if not any(np.abs(m - np.eye(n)).max() < CLOSURE_TOL for m in mats):
        raise DomainError("subset does not contain the identity")
    for a in mats:
        for b in mats:
            c = a @ b
            if not any(np.linalg.norm(c - m) <= CLOSURE_TOL for m in mats):
                raise DomainError("subset is not closed under multiplication")


def cyclic_closure(M: np.ndarray, max_order: int = 512) -> list[np.ndarray]:
    """All powers of a finite-order matrix."""
    M = np.asarray(M, dtype=float)
    out = [np.eye(M.shape[0])]
    P = M.copy()
    while np.abs(P - out[0]).max() > CLOSURE_TOL:
        out.append(P)
        P = P @ M
        if len(out) > max_order:
            raise GroupGrowthError("element has no finite order below max_order")
    return out


# ---------------------------------------------------------------------------
# plane reflections and the fixed-plane criterion


def _is_plane_reflection(g: Rotation4) -> bool:
    M = rotation_matrix(g)
    if np.abs(M @ M - np.eye(4)).max() > 1e-10:
        return False
    return fixed_subspace([np.eye(4), M]).dim == 2


def plane_pair_geometry(p1: Rotation4, p2: Rotation4, tol: float = 1e-10) -> float | None:
    """Angle between the fixed planes of two plane reflections, or None if they share no line.

    The planes meet along a line exactly when the scalar parts of l1 l2 and
    r1 r2 coincide; their common value is cos of the angle.  The overall sign
    of each pair is immaterial because it flips both scalar parts together.
    """
    for g in (p1, p2):
        if not _is_plane_reflection(g):
            raise DomainError("input is not a plane reflection")
    a = quat_mul(p1.left, p2.left).q1
    b = quat_mul(p1.right, p2.right).q1
    if abs(a - b) > tol:
        return None
    return math.acos(min(1.0, abs(a)))


def dim_fix_two_predicate(g: Rotation4, tol: float = 1e-10) -> bool:
    """True when the rotation fixes exactly a plane (scalar parts of l and r agree).

    The identity also satisfies cos(a) = cos(b) but fixes all of R^4, so it is
    excluded explicitly.
    """
    if abs(g.left.q1 - 1.0) <= tol and abs(g.right.q1 - 1.0) <= tol:
        return False
    return abs(g.left.q1 - g.right.q1) <= tol


# ---------------------------------------------------------------------------
# the groups used by the example systems


def d3_rho() -> np.ndarray:
    c, s = math.cos(2 * math.pi / 3), math.sin(2 * math.pi / 3)
    M = np.eye(4)
    M[2:, 2:] = [[c, -s], [s, c]]
    return M


def d3_kappa() -> np.ndarray:
    return np.diag([1.0, -1.0, 1.0, -1.0])


def d3_sigma() -> np.ndarray:
    return np.diag([1.0, 1.0, 1.0, -1.0])


def gamma_d3() -> GroupTable:
    """The order-6 dihedral group acting on (z1, z2)."""
    return generate_group([d3_rho(), d3_kappa()])


def gamma_d3_tilde() -> GroupTable:
    """The order-12 extension by the reflection z2 -> conj(z2)."""
    return generate_group([d3_rho(), d3_kappa(), d3_sigma()])


def planar_d3_group() -> GroupTable:
    c, s = math.cos(2 * math.pi / 3), math.sin(2 * math.pi / 3)
    return generate_group([np.array([[c, -s], [s, c]]), np.diag([1.0, -1.0])])


_C3, _S3 = math.cos(math.pi / 3), math.sin(math.pi / 3)

# left/right factors whose products with the right-hand V = {±1,±i,±j,±k} give the 48 elements
GL23_ROWS = (
    ((1.0, 0.0, 0.0, 0.0), (1.0, 0.0, 0.0, 0.0)),
    ((_C3, 0.0, 0.0, _S3), (0.5, 0.5, 0.5, 0.5)),
    ((-0.5, 0.0, 0.0, _S3), (-0.5, 0.5, 0.5, 0.5)),
    ((0.0, 1.0, 0.0, 0.0), (1 / SQRT2, 1 / SQRT2, 0.0, 0.0)),
    ((0.0, _C3, _S3, 0.0), (1 / SQRT2, 0.0, 0.0, 1 / SQRT2)),
    ((0.0, math.cos(2 * math.pi / 3), math.sin(2 * math.pi / 3), 0.0), (1 / SQRT2, 0.0, 1 / SQRT2, 0.0)),
)


def gl23_pairs() -> list[Rotation4]:
    """All 48 quaternion pairs (l; r v) of the GL(2,3) representation."""
    V = []
    for i in range(4):
        for sg in (1.0, -1.0):
            v = np.zeros(4)
            v[i] = sg
            V.append(v)
    out = []
    for l, r in GL23_ROWS:
        for v in V:
            out.append(Rotation4.from_arrays(l, _qmul_arrays(np.array(r), v), normalize=True))
    return out


def gl23_generators() -> list[np.ndarray]:
    gens = [Rotation4.from_arrays(l, r, normalize=True) for l, r in GL23_ROWS[1:]]
    gens += [Rotation4.from_arrays((1, 0, 0, 0), (0, 1, 0, 0)), Rotation4.from_arrays((1, 0, 0, 0), (0, 0, 1, 0))]
    return [rotation_matrix(g) for g in gens]


def gl23_group() -> GroupTable:
    return generate_group(gl23_generators())


def epsilon_element(s: int, r: int) -> Rotation4:
    """Order-3 element ((1/2,0,0,sqrt3/2); (1,(-1)^s,(-1)^r,(-1)^(s+r))/2)."""
    right = np.array([1.0, (-1) ** s, (-1) ** r, (-1) ** (s + r)]) / 2
    return Rotation4.from_arrays((0.5, 0.0, 0.0, _S3), right)


def kappa_element(q: int, n: int, t: int) -> Rotation4:
    """Plane reflection ((-1)^q (0, cos n pi/3, sin n pi/3, 0); p^n (0,0,(-1)^t,1)/sqrt2)."""
    left = (-1) ** q * np.array([0.0, math.cos(n * math.pi / 3), math.sin(n * math.pi / 3), 0.0])
    right = np.array([0.0, 0.0, (-1) ** t, 1.0]) / SQRT2
    for _ in range(n):
        right = right[[0, 2, 3, 1]]
    return Rotation4.from_arrays(left, right, normalize=True)


def _fix_of(g: Rotation4) -> LinearSubspace:
    return fixed_subspace(cyclic_closure(rotation_matrix(g)))


def enumerate_isotropy_gl23(group: GroupTable) -> list[tuple[str, LinearSubspace]]:
    """Fixed planes P1(s,r), P2(q,n,t) and axes L1(s,r), L2(s,r) of the order-48 group.

    The axes are obtained as P1(s,r) intersected with P2(0,0,s+1) and P2(1,0,s+1);
    ``gl23_axis_planes`` lists every P2 plane containing each axis.
    """
    if group.order != 48 or group.dim != 4:
        raise DomainError(f"expected the order-48 group in dimension 4, got order {group.order}")
    for s, r in itertools.product((0, 1), repeat=2):
        if not group.contains(rotation_matrix(epsilon_element(s, r))):
            raise DomainError("group does not contain the expected order-3 elements")
    out: list[tuple[str, LinearSubspace]] = []
    p1 = {}
    for s, r in itertools.product((0, 1), repeat=2):
        p1[s, r] = _fix_of(epsilon_element(s, r))
        out.append((f"P1({s},{r})", p1[s, r]))
    p2 = {}
    for q, n, t in itertools.product((0, 1), (0, 1, 2), (0, 1)):
        g = kappa_element(q, n, t)
        if not group.contains(rotation_matrix(g)):
            raise DomainError("group does not contain the expected plane reflections")
        p2[q, n, t] = _fix_of(g)
        out.append((f"P2({q},{n},{t})", p2[q, n, t]))
    for s, r in itertools.product((0, 1), repeat=2):
        l1 = p1[s, r].intersect(p2[0, 0, (s + 1) % 2])
        l2 = p1[s, r].intersect(p2[1, 0, (s + 1) % 2])
        out.append((f"L1({s},{r})", l1))
        out.append((f"L2({s},{r})", l2))
    return out


def gl23_axis_planes(inventory: list[tuple[str, LinearSubspace]]) -> dict[str, list[str]]:
    """For each axis label, the labels of all planes that contain it."""
    planes = [(lab, sub) for lab, sub in inventory if lab.startswith("P")]
    out = {}
    for lab, sub in inventory:
        if lab.startswith("L"):
            v = sub.basis[0]
            out[lab] = [pl for pl, ps in planes if ps.contains(v, 1e-9)]
    return out
