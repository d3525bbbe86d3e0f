"""Leading-order Poincare maps near a pseudo-simple heteroclinic cycle xi1 -> xi2 -> xi1.

Local maps phi_j take a trajectory past an equilibrium, global maps psi_j carry it
along a connection.  Section coordinates follow one convention throughout:

* H_out1 polar (rho1, theta1) with v1 = rho1 cos theta1, q1 = rho1 sin theta1
* H_in2 polar (rho2, theta2) with w2 = rho2 cos theta2, q2 = rho2 sin theta2
* H_out2 Cartesian (v2, q2) and H_in1 Cartesian (w1, q1)

The models compose these pieces into first return maps on H_out1 (periodic orbit
and complete instability settings) or on H_in2 (the reflection-symmetric setting).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DegenerateAngleError, DomainError, IntegrationError
from .fields import PlanarParams
from .planar_d3 import SECTOR, s_integral, transit

__all__ = [
    "CycleData", "SectionPoint", "phi1", "phi2_simple", "phi2_d3", "psi_global", "choose_dihedral_shift",
    "escape_angle_bound", "AngleBound", "angular_margin", "periodic_regime", "PeriodicRegime",
    "reflection_contraction", "ContractionReport", "ReturnMapModel", "InstabilityModel", "PeriodicOrbitModel",
    "ReflectionModel", "LeftNeighbourhood", "IterationResult", "iterate_return_map", "cycle_data_from_rates",
]

TWO_PI_3 = 2 * math.pi / 3


@dataclass(frozen=True)
class CycleData:
    """Rates and global-map constants of a two-equilibrium cycle."""

    c1: float
    e1: float
    c2: float
    e2: float
    A: float = 1.0
    Theta: float = 0.0
    B11: float = 1.0
    B12: float = 0.0
    B21: float = 0.0
    B22: float = 1.0
    v01: float = 1.0
    v02: float = 1.0
    beta: float = 1.0
    k: int = 3

    def __post_init__(self):
        for name in ("c1", "e1", "c2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.e2 < 0:
            raise ValueError("e2 must be non-negative")
        if self.k < 3:
            raise ValueError("the dihedral order k must be at least 3")
        for name in ("v01", "v02"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        if not self.A > 0:
            raise ValueError("A must be positive")

    @property
    def h(self) -> float:
        return self.c1 * self.c2 / (self.e1 * self.e2)

    def with_(self, **kw) -> "CycleData":
        return replace(self, **kw)


def cycle_data_from_rates(rates, **kw) -> CycleData:
    """CycleData from a fields.CycleRates record plus geometric constants."""
    return CycleData(c1=rates.c1, e1=rates.e1, c2=rates.c2, e2=rates.e2, **kw)


@dataclass(frozen=True)
class SectionPoint:
    """A point on a section: polar (rho, theta) or Cartesian (first, q)."""

    a: float
    b: float
    polar: bool = True

    def __post_init__(self):
        if self.polar and self.a < 0:
            raise ValueError("rho must be non-negative")

    @property
    def cartesian(self) -> tuple[float, float]:
        if not self.polar:
            return self.a, self.b
        return self.a * math.cos(self.b), self.a * math.sin(self.b)


# ---------------------------------------------------------------------------
# local maps


def phi1(cd: CycleData, w: float, q: float) -> tuple[float, float]:
    """Passage near xi1: H_in1 (w, q) -> H_out1 (rho, theta)."""
    if not w > 0:
        raise DomainError(f"w = {w:g} <= 0: the trajectory is on the wrong side of the invariant plane")
    return cd.v01 * w ** (cd.c1 / cd.e1), math.atan(q / cd.v01)


def phi2_simple(cd: CycleData, rho: float, theta: float) -> tuple[float, float]:
    """Passage near xi2 under the linear flow: H_in2 (rho, theta) -> H_out2 (v, q)."""
    c = rho * math.cos(theta)
    if not c > 0:
        raise DomainError("rho cos(theta) must be positive")
    return cd.v02 * c ** (cd.c2 / cd.e2), math.tan(theta)


def _reduce_to_sector(theta: float) -> tuple[float, float, int]:
    """Write theta = shift + sign * phi with phi in [0, pi/3] and shift a multiple of 2 pi/3."""
    m = round(theta / TWO_PI_3)
    rel = theta - m * TWO_PI_3
    return abs(rel), (1.0 if rel >= 0 else -1.0), m


def _local_transit(cd: CycleData, rho: float, theta: float, mu: float | None) -> tuple[float, float]:
    """(tau, signed exit angle relative to the nearest outgoing ray) for the planar normal form."""
    e2 = cd.e2 if mu is None else mu
    if not e2 > 0:
        raise DomainError("the planar passage needs a positive expanding rate e2")
    if rho < 0:
        raise DomainError("rho must be non-negative")
    phi, sign, _ = _reduce_to_sector(theta)
    if phi >= SECTOR:
        raise DomainError("theta lies on an incoming ray of the planar normal form")
    if rho >= 1.0:
        return 0.0, sign * phi
    if rho == 0.0:
        return math.inf, 0.0
    rec = transit(PlanarParams(e2, cd.beta), rho, phi)
    return rec.tau, sign * rec.theta_exit


def phi2_d3(cd: CycleData, rho: float, theta: float, mu: float | None = None,
            angle: str = "sin") -> tuple[float, float]:
    """Passage near xi2 governed by s' = e2 s + beta conj(s)^2.

    Returns (v02 exp(-c2 tau), sin(exit angle)) or, with angle='tan', the tangent.
    The exit angle is measured from the outgoing ray nearest to theta.
    """
    if angle not in ("sin", "tan"):
        raise ValueError("angle must be 'sin' or 'tan'")
    tau, ex = _local_transit(cd, rho, theta, mu)
    v = 0.0 if math.isinf(tau) else cd.v02 * math.exp(-cd.c2 * tau)
    return v, (math.sin(ex) if angle == "sin" else math.tan(ex))


# ---------------------------------------------------------------------------
# global maps


def _wrap(a: float) -> float:
    return (a + math.pi) % (2 * math.pi) - math.pi


def choose_dihedral_shift(Theta: float) -> int:
    """The s in {0, 1, 2} with Theta + 2 pi s / 3 in (-pi/3, pi/3] after wrapping."""
    for s in range(3):
        t = _wrap(Theta + TWO_PI_3 * s)
        if -SECTOR < t <= SECTOR:
            return s
    raise AssertionError("unreachable")


def psi_global(cd: CycleData, variant: str, point: SectionPoint, l: int = 0, s: int | None = None) -> SectionPoint:
    """Leading-order global map along a connection.

    rotation:   (rho, theta) -> (A rho, theta + Theta)
    dihedral:   (rho, theta) -> (A rho, (-1)^l (theta + Theta')), Theta' = Theta + 2 pi s / 3
    linear:     (v, q) -> (B11 v + B12 q, B21 v + B22 q)
    reflection: (rho, theta) -> (A rho, theta) or (v, q) -> (B11 v, B22 q)
    """
    if variant == "rotation":
        _need(point, True)
        return SectionPoint(cd.A * point.a, point.b + cd.Theta)
    if variant == "dihedral":
        _need(point, True)
        s = choose_dihedral_shift(cd.Theta) if s is None else s
        th = _wrap(point.b + cd.Theta + TWO_PI_3 * s)
        return SectionPoint(cd.A * point.a, (-1) ** l * th)
    if variant == "linear":
        _need(point, False)
        v, q = point.a, point.b
        return SectionPoint(cd.B11 * v + cd.B12 * q, cd.B21 * v + cd.B22 * q, polar=False)
    if variant == "reflection":
        if point.polar:
            return SectionPoint(cd.A * point.a, point.b)
        return SectionPoint(cd.B11 * point.a, cd.B22 * point.b, polar=False)
    raise ValueError(f"unknown global map variant {variant!r}")


def _need(point: SectionPoint, polar: bool) -> None:
    if point.polar != polar:
        raise ValueError(f"expected a {'polar' if polar else 'Cartesian'} section point")


# ---------------------------------------------------------------------------
# complete instability


@dataclass(frozen=True)
class AngleBound:
    alpha: float  # angular distance of Theta to the nearest multiple of pi/k
    epsilon: float  # strict upper bound for admissible neighbourhood radii


def escape_angle_bound(cd: CycleData, tol: float = 1e-12) -> AngleBound:
    """Radius below which no trajectory through H_in1 can land near an outgoing connection at xi2."""
    step = math.pi / cd.k
    alpha = min(abs(cd.Theta % (2 * math.pi) - N * step) for N in range(0, 2 * cd.k + 1))
    if alpha <= tol:
        raise DegenerateAngleError(f"Theta = {cd.Theta:g} is a multiple of pi/{cd.k}")
    t = math.tan(alpha / 2)
    return AngleBound(alpha, min(t, cd.v01 * t))


def angular_margin(cd: CycleData, w: float, q: float) -> float:
    """min over N of |theta2 - N pi / k| for the image of (w, q) under psi1 phi1."""
    rho1, th1 = phi1(cd, w, q)
    th2 = psi_global(cd, "rotation", SectionPoint(rho1, th1)).b
    step = math.pi / cd.k
    r = th2 % step
    return min(r, step - r)


# ---------------------------------------------------------------------------
# periodic orbit for a small expanding rate at xi2


@dataclass(frozen=True)
class PeriodicRegime:
    regime: str  # escape | periodic | degenerate
    exponent: float  # 3 c1 / e1
    l: int
    s: int
    theta_tilde: float
    C1: float
    C2: float
    fixed_point: tuple[float, float] | None
    q: float | None
    fixed_point_residual: float | None


def _dihedral_choice(cd: CycleData) -> tuple[int, int, float]:
    """(l, s, |Theta'|) with l chosen so that w1 = B12 q2 is positive."""
    s = choose_dihedral_shift(cd.Theta)
    tp = _wrap(cd.Theta + TWO_PI_3 * s)
    if cd.B12 == 0.0 or tp == 0.0:
        raise DegenerateAngleError("B12 and Theta' must be non-zero for the periodic-orbit map")
    # sign(q2) = sign(theta2) = (-1)^l sign(Theta')
    l = 0 if cd.B12 * tp > 0 else 1
    return l, s, abs(tp)


@dataclass(frozen=True)
class PeriodicOrbitModel:
    """g = phi1 psi2 phi2 psi1 on H_out1 with e2 = mu.

    With ``exact_local=True`` the passage near xi2 integrates the planar normal
    form; otherwise the closed-form leading-order map is used.
    """

    cd: CycleData
    mu: float
    exact_local: bool = True
    base: str = "H_out1"

    def __post_init__(self):
        if self.mu < 0:
            raise DomainError("mu must be non-negative")

    def choice(self) -> tuple[int, int, float]:
        return _dihedral_choice(self.cd)

    def constants(self) -> tuple[float, float]:
        """C1, C2 of the closed form g = (C1 X^(3c1/e1), C2 X^3)."""
        cd = self.cd
        l, _, _ = self.choice()
        p = cd.c1 / cd.e1
        den = 3 * cd.beta**3
        C1 = cd.v01 * abs(cd.B12) ** p * den ** (-p)
        C2 = (-1) ** l * cd.B22 / (cd.v01 * den)
        return C1, C2

    def X(self, rho1: float) -> float:
        cd = self.cd
        _, _, tt = self.choice()
        return rho1 * cd.A * cd.beta * np.cbrt(math.sin(3 * tt)) + self.mu * s_integral(tt)

    def closed_form(self, rho1: float, theta1: float) -> tuple[float, float]:
        C1, C2 = self.constants()
        X = self.X(rho1)
        return C1 * X ** (3 * self.cd.c1 / self.cd.e1), C2 * X**3

    def __call__(self, rho1: float, theta1: float) -> tuple[float, float]:
        if not self.exact_local:
            return self.closed_form(rho1, theta1)
        cd = self.cd
        l, s, _ = self.choice()
        p2 = psi_global(cd, "dihedral", SectionPoint(rho1, theta1), l=l, s=s)
        if p2.a >= 1.0:
            raise DomainError("rho2 left the section")
        v2, q2 = phi2_d3(cd, p2.a, p2.b, mu=self.mu, angle="sin")
        w1, q1 = psi_global(cd, "linear", SectionPoint(v2, q2, polar=False)).cartesian
        return phi1(cd, w1, q1)


def _fixed_point(g: Callable, start: tuple[float, float], tol: float = 1e-14, n_max: int = 500):
    x = start
    for _ in range(n_max):
        y = g(*x)
        if abs(y[0] - x[0]) <= tol * max(abs(y[0]), 1e-300) and abs(y[1] - x[1]) <= tol * max(abs(y[1]), 1e-300):
            return y
        x = y
    return x


def periodic_regime(cd: CycleData, mu: float, exact_local: bool = False, tie_tol: float = 1e-12) -> PeriodicRegime:
    """Regime, fixed point and contraction exponent of the return map when e2 = mu is small."""
    if mu < 0:
        raise DomainError("mu must be non-negative")
    cd = cd.with_(e2=mu)
    model = PeriodicOrbitModel(cd, mu, exact_local=exact_local)
    l, s, tt = model.choice()
    C1, C2 = model.constants()
    expo = 3 * cd.c1 / cd.e1
    d = 3 * cd.c1 - cd.e1
    if abs(d) <= tie_tol * cd.e1:
        return PeriodicRegime("degenerate", expo, l, s, tt, C1, C2, None, None, None)
    if d < 0:
        return PeriodicRegime("escape", expo, l, s, tt, C1, C2, None, None, None)
    q = min(d / (2 * cd.e1), 1.0)
    if mu == 0:
        return PeriodicRegime("periodic", expo, l, s, tt, C1, C2, (0.0, 0.0), q, 0.0)
    X0 = mu * s_integral(tt)
    guess = (C1 * X0**expo, C2 * X0**3)
    fp = _fixed_point(model, guess)
    img = model(*fp)
    res = math.hypot(img[0] - fp[0], img[1] - fp[1])
    return PeriodicRegime("periodic", expo, l, s, tt, C1, C2, (float(fp[0]), float(fp[1])), q, res)


# ---------------------------------------------------------------------------
# reflection-symmetric cycle


@dataclass(frozen=True)
class ContractionReport:
    h: float
    rho_contracts: bool
    theta_factor: float | None
    theta_contracts: bool | None


def reflection_contraction(cd: CycleData, rho: float | None = None, theta: float | None = None) -> ContractionReport:
    """h = c1 c2 / (e1 e2) and the angular multiplier B22 ((rho beta cos3t + e2)/(beta cos3t + e2))^3."""
    if cd.Theta != 0.0 or cd.B12 != 0.0 or cd.B21 != 0.0:
        raise DomainError("reflection-constrained cycle data need Theta = B12 = B21 = 0")
    h = cd.h if cd.e2 > 0 else math.inf
    if rho is None or theta is None:
        return ContractionReport(h, h > 1, None, None)
    c3 = math.cos(3 * theta)
    fac = cd.B22 * ((rho * cd.beta * c3 + cd.e2) / (cd.beta * c3 + cd.e2)) ** 3
    return ContractionReport(h, h > 1, fac, abs(fac) < 1)


@dataclass(frozen=True)
class ReflectionModel:
    """g = psi1 phi1 psi2 phi2 on H_in2 when the reflection forces Theta = B12 = B21 = 0."""

    cd: CycleData
    base: str = "H_in2"

    def __post_init__(self):
        reflection_contraction(self.cd)

    def __call__(self, rho2: float, theta2: float) -> tuple[float, float]:
        cd = self.cd
        v2, q2 = phi2_d3(cd, rho2, theta2, angle="tan")
        w1, q1 = psi_global(cd, "reflection", SectionPoint(v2, q2, polar=False)).cartesian
        if w1 == 0.0:
            # exp(-c2 tau) underflowed: the trajectory is on the cycle to double precision
            return 0.0, math.atan(q1 / cd.v01)
        rho1, theta1 = phi1(cd, w1, q1)
        p = psi_global(cd, "reflection", SectionPoint(rho1, theta1))
        return p.a, p.b


# ---------------------------------------------------------------------------
# complete instability model


class LeftNeighbourhood(DomainError):
    """A map image fell outside the section neighbourhood being tracked."""


@dataclass(frozen=True)
class InstabilityModel:
    """psi2 phi2 psi1 phi1 on H_in1 for the generic rotation global map.

    Points are Cartesian (w1, q1).  The passage near xi2 is the linear map,
    measured from the outgoing ray nearest to theta2.  An image (v2, q2) with
    |(v2, q2)| >= epsilon has left the tracked neighbourhood of the cycle.
    """

    cd: CycleData
    epsilon: float
    base: str = "H_in1"
    polar: bool = False

    def __call__(self, w1: float, q1: float) -> tuple[float, float]:
        cd = self.cd
        rho1, th1 = phi1(cd, w1, q1)
        p2 = psi_global(cd, "rotation", SectionPoint(rho1, th1))
        step = math.pi / cd.k
        rel = p2.b - round(p2.b / step) * step
        v2, q2 = phi2_simple(cd, p2.a, rel)
        if math.hypot(v2, q2) >= self.epsilon:
            raise LeftNeighbourhood(f"|(v2, q2)| = {math.hypot(v2, q2):.3g} >= epsilon = {self.epsilon:.3g}")
        return psi_global(cd, "linear", SectionPoint(v2, q2, polar=False)).cartesian


ReturnMapModel = PeriodicOrbitModel | ReflectionModel | InstabilityModel


# ---------------------------------------------------------------------------
# iteration


@dataclass
class IterationResult:
    points: np.ndarray  # (n+1, 2) iterates including the start
    exit_reason: str  # completed | left-section | domain-error | integration-error
    message: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.points) - 1


def iterate_return_map(model: Callable, start: SectionPoint | tuple[float, float], n: int,
                       rho_max: float = 1.0) -> IterationResult:
    """Iterate a return map, stopping early when the radius leaves [0, rho_max].

    The radius is the first coordinate for polar models and the Euclidean norm
    for Cartesian ones (``model.polar`` is False).
    """
    polar = getattr(model, "polar", True)
    x = (start.a, start.b) if isinstance(start, SectionPoint) else tuple(map(float, start))
    pts = [x]
    for _ in range(n):
        try:
            x = tuple(map(float, model(*x)))
        except LeftNeighbourhood as exc:
            return IterationResult(np.array(pts), "left-section", str(exc))
        except DomainError as exc:
            return IterationResult(np.array(pts), "domain-error", str(exc))
        except IntegrationError as exc:
            return IterationResult(np.array(pts), "integration-error", str(exc))
        pts.append(x)
        r = x[0] if polar else math.hypot(*x)
        if not math.isfinite(r) or not (0.0 <= r <= rho_max):
            return IterationResult(np.array(pts), "left-section")
    return IterationResult(np.array(pts), "completed")
