"""The planar normal form z' = alpha z + beta conj(z)^2 in the sector 0 <= theta < pi/3.

In polar coordinates

    r'     = alpha r + beta r^2 cos 3theta
    theta' = -beta r sin 3theta

Trajectories satisfy r sin^(1/3) 3theta + (alpha/beta) S(theta) = const with
S(theta) = int_0^theta sin^(-2/3) 3t dt, and r^6 sin^2 3theta grows like e^(6 alpha t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, IntegrationError
from .fields import PlanarParams, planar_polar_rhs
from .integrator import Solution, hermite, refine_terminal, solve

__all__ = [
    "PlanarParams", "SectorState", "s_integral", "s_integral_closed_form", "transit_time_axis", "transit",
    "TransitRecord", "conserved_quantity", "exit_angle_implicit", "angle_drift_check", "exit_bound_check",
    "AngleDriftReport", "ExitBoundReport", "log_exit_ratio",
]

SECTOR = math.pi / 3


@dataclass(frozen=True)
class SectorState:
    r: float
    theta: float

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("r must be non-negative")
        object.__setattr__(self, "theta", min(max(self.theta, 0.0), SECTOR))


# ---------------------------------------------------------------------------
# the singular integral

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(40)
_PANELS = 4


def _integral_to_half_pi(Phi: np.ndarray) -> np.ndarray:
    """int_0^Phi sin(phi)^(-2/3) dphi for 0 <= Phi <= pi/2 via phi = v^3."""
    Phi = np.asarray(Phi, dtype=float)
    V = np.cbrt(Phi)
    total = np.zeros_like(V)
    for k in range(_PANELS):
        a = V * k / _PANELS
        b = V * (k + 1) / _PANELS
        half = 0.5 * (b - a)
        v = (0.5 * (a + b))[..., None] + half[..., None] * _GL_NODES
        p = v**3
        # 3 v^2 sin(v^3)^(-2/3) = 3 (v^3 / sin v^3)^(2/3), smooth at v = 0
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(p > 0, p / np.sin(np.where(p > 0, p, 1.0)), 1.0)
        total += half * np.sum(_GL_WEIGHTS * 3.0 * ratio ** (2.0 / 3.0), axis=-1)
    return total


def s_integral(theta):
    """S(theta) = int_0^theta sin^(-2/3)(3t) dt for theta in [0, pi/3]."""
    th = np.asarray(theta, dtype=float)
    if np.any(th < 0) or np.any(th > SECTOR * (1 + 1e-15)):
        raise DomainError("theta must lie in [0, pi/3]")
    Phi = np.minimum(3.0 * th, math.pi)
    full_half = _integral_to_half_pi(np.array(math.pi / 2))
    low = _integral_to_half_pi(np.minimum(Phi, math.pi / 2))
    high = 2 * full_half - _integral_to_half_pi(np.minimum(math.pi - Phi, math.pi / 2))
    out = np.where(Phi <= math.pi / 2, low, high) / 3.0
    return float(out) if out.ndim == 0 else out


def s_integral_closed_form() -> float:
    """S(pi/3) = sqrt(pi) Gamma(1/6) / (3 Gamma(2/3))."""
    return math.sqrt(math.pi) * math.gamma(1 / 6) / (3 * math.gamma(2 / 3))


def conserved_quantity(params: PlanarParams, r, theta):
    """r sin^(1/3) 3theta + (alpha/beta) S(theta)."""
    th = np.asarray(theta, dtype=float)
    val = np.asarray(r) * np.cbrt(np.sin(3 * th)) + params.alpha / params.beta * s_integral(th)
    return float(val) if np.ndim(val) == 0 else val


# ---------------------------------------------------------------------------
# transit from radius r0 to the unit circle


def transit_time_axis(params: PlanarParams, r0: float) -> float:
    """Closed-form time from r0 to 1 along the invariant ray theta = 0."""
    if not 0.0 < r0 < 1.0:
        raise DomainError(f"r0 must lie in (0, 1), got {r0}")
    q = params.alpha / params.beta
    return math.log((r0 + q) / (r0 * (1 + q))) / params.alpha


@dataclass
class TransitRecord:
    tau: float
    theta_exit: float
    r0: float
    theta0: float
    solution: Solution | None = None


def transit(params: PlanarParams, r0: float, theta0: float, rtol: float = 1e-12,
            keep_solution: bool = False, t_max: float | None = None) -> TransitRecord:
    """Time tau and exit angle when the trajectory from (r0, theta0) reaches r = 1."""
    if not 0.0 < r0 < 1.0:
        raise DomainError(f"r0 must lie in (0, 1), got {r0}")
    if not 0.0 <= theta0 < SECTOR:
        raise DomainError(f"theta0 must lie in [0, pi/3), got {theta0}")
    if theta0 == 0.0:
        return TransitRecord(transit_time_axis(params, r0), 0.0, r0, 0.0)
    if t_max is None:
        # the axis time is a lower bound; near theta = pi/3 the orbit may linger by the saddle
        t_max = 50.0 * transit_time_axis(params, r0) + 1e4 / params.alpha
    sol = solve(planar_polar_rhs, params.as_array(), np.array([r0, theta0]), (0.0, t_max),
                rtol=rtol, atol=1e-300, stop=(0, 1.0))
    if sol.status != "stop-threshold":
        raise IntegrationError(f"transit did not reach r = 1 ({sol.status})", sol.t_final, sol.x_final)
    tau, x = refine_terminal(sol, lambda y: y[0], 1.0)
    return TransitRecord(tau, float(x[1]), r0, theta0, sol if keep_solution else None)


def exit_angle_implicit(params: PlanarParams, r0: float, theta0: float) -> float:
    """Exit angle solved from the conserved quantity alone (no time integration)."""
    if theta0 == 0.0:
        return 0.0
    target = conserved_quantity(params, r0, theta0)
    q = params.alpha / params.beta

    def f(th):
        return float(np.cbrt(math.sin(3 * th))) + q * s_integral(th) - target

    hi = min(theta0, math.pi / 6) if f(min(theta0, math.pi / 6)) >= 0 else theta0
    if f(hi) < 0:
        raise DomainError("no exit angle satisfies the conserved quantity")
    if target == 0.0:
        return 0.0
    return brentq(f, 0.0, hi, xtol=1e-300, rtol=1e-15)


def log_exit_ratio(params: PlanarParams, r0: float, theta0: float, C: float = 1.0) -> float:
    """log(e^(-C tau) / exit angle), computed in logs so that tiny values do not underflow."""
    rec = transit(params, r0, theta0)
    return -C * rec.tau - math.log(rec.theta_exit)


# ---------------------------------------------------------------------------
# the analytic bounds


@dataclass(frozen=True)
class AngleDriftReport:
    epsilon: float
    alpha0: float
    precondition: bool  # alpha < epsilon beta / 4
    max_r_sin_theta: float
    passed: bool
    turning_point_residual: float  # max |alpha - 2 beta r cos theta| / alpha at interior maxima
    alt_turning_point_residual: float  # same for the relation |2 alpha - beta r cos theta| / alpha
    n_trajectories: int


def _sampled_states(sol: Solution, per_step: int = 4) -> tuple[np.ndarray, np.ndarray]:
    t = sol.t
    frac = np.arange(per_step) / per_step
    tq = (t[:-1, None] + np.diff(t)[:, None] * frac).ravel()
    tq = np.append(tq, t[-1])
    return tq, hermite(sol.t, sol.x, sol.f, tq)


def angle_drift_check(params: PlanarParams, epsilon: float, r0_values=None, theta0_values=None,
                       rtol: float = 1e-11) -> AngleDriftReport:
    """Sampled check that r sin(theta) stays below epsilon for every start with r0 < epsilon."""
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    a, b = params.alpha, params.beta
    alpha0 = epsilon * b / 4
    if r0_values is None:
        r0_values = epsilon * np.array([0.05, 0.25, 0.5, 0.75, 0.99])
    if theta0_values is None:
        theta0_values = SECTOR * np.array([0.02, 0.2, 0.4, 0.6, 0.8, 0.95])
    worst = 0.0
    tp_res, tp_alt = 0.0, 0.0
    n = 0
    for r0 in r0_values:
        for th0 in theta0_values:
            # run until r sin(theta) is provably decreasing: theta < pi/4 and 2 beta r cos(theta) > alpha
            r_stop = max(2.0, 4 * a / b)
            sol = solve(planar_polar_rhs, params.as_array(), np.array([r0, th0]), (0.0, 1e3 / a + 1e3 / b),
                        rtol=rtol, atol=1e-300, stop=(0, r_stop))
            rf, thf = sol.x_final
            if not (thf < math.pi / 4 and 2 * b * rf * math.cos(thf) > a):
                raise IntegrationError("trajectory did not reach the monotone regime", sol.t_final, sol.x_final)
            _, xs = _sampled_states(sol)
            r, th = xs[:, 0], xs[:, 1]
            y = r * np.sin(th)
            worst = max(worst, float(y.max()))
            n += 1
            inner = np.nonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:]))[0] + 1
            for k in inner:
                tp_res = max(tp_res, abs(a - 2 * b * r[k] * math.cos(th[k])) / a)
                tp_alt = max(tp_alt, abs(2 * a - b * r[k] * math.cos(th[k])) / a)
    passed = worst < epsilon
    return AngleDriftReport(epsilon, alpha0, a < alpha0, worst, passed, tp_res, tp_alt, n)


@dataclass(frozen=True)
class ExitBoundReport:
    sin3_exit: float
    sin3_bound: float
    angle_bound_holds: bool
    exp_alpha_tau: float
    exp_alpha_tau_bound: float
    time_bound_holds: bool

    @property
    def passed(self) -> bool:
        return self.angle_bound_holds and self.time_bound_holds


def exit_bound_check(params: PlanarParams, r0: float, theta0: float) -> ExitBoundReport:
    """Compare the integrated exit angle and transit time with their closed-form upper bounds."""
    if not 0.0 < theta0 < math.pi / 6:
        raise DomainError(f"theta0 must lie in (0, pi/6), got {theta0}")
    a, b = params.alpha, params.beta
    rec = transit(params, r0, theta0)
    c3 = math.cos(3 * theta0)
    sin_bound = ((r0 * b * c3 + a) / (b * c3 + a)) ** 3 * math.sin(3 * theta0)
    lhs = math.sin(3 * rec.theta_exit)
    exp_tau = math.exp(a * rec.tau)
    exp_bound = (r0 * b * c3 + a) / (r0 * (b * c3 + a))
    return ExitBoundReport(lhs, sin_bound, lhs < sin_bound, exp_tau, exp_bound, exp_tau < exp_bound)
