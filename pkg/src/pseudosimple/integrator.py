"""Dormand-Prince 5(4) integrator compiled with numba.

Every accepted step is stored as (t, x, f(x)) so that cubic Hermite
interpolation gives dense output between steps.  Right-hand sides are numba
kernels registered in :mod:`fields` with the signature ``rhs(x, params, out)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.optimize import brentq

from .errors import IntegrationError
from .fields import kernel_code, rhs_dispatch

# Butcher tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# difference between 5th and embedded 4th order weights
E1, E3, E4, E5, E6, E7 = 71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0
BETA = 0.04  # PI stabilisation
EXPO1 = 0.2 - BETA * 0.75

STATUS = {0: "max-time", 1: "buffer-full", 2: "escape-radius", 3: "stop-threshold",
          4: "step-underflow", 5: "non-finite"}


@numba.njit(cache=True)
def _stage(code, p, x, h, k1, k2, k3, k4, k5, k6, k7, y, tmp, proj, use_proj, work):
    n = x.shape[0]
    for i in range(n):
        tmp[i] = x[i] + h * A21 * k1[i]
    rhs_dispatch(code, tmp, p, k2)
    if use_proj:
        _apply(proj, k2, work)
    for i in range(n):
        tmp[i] = x[i] + h * (A31 * k1[i] + A32 * k2[i])
    rhs_dispatch(code, tmp, p, k3)
    if use_proj:
        _apply(proj, k3, work)
    for i in range(n):
        tmp[i] = x[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
    rhs_dispatch(code, tmp, p, k4)
    if use_proj:
        _apply(proj, k4, work)
    for i in range(n):
        tmp[i] = x[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
    rhs_dispatch(code, tmp, p, k5)
    if use_proj:
        _apply(proj, k5, work)
    for i in range(n):
        tmp[i] = x[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
    rhs_dispatch(code, tmp, p, k6)
    if use_proj:
        _apply(proj, k6, work)
    for i in range(n):
        y[i] = x[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
    rhs_dispatch(code, y, p, k7)
    if use_proj:
        _apply(proj, k7, work)


@numba.njit(cache=True)
def _apply(P, v, work):
    n = v.shape[0]
    for i in range(n):
        s = 0.0
        for j in range(n):
            s += P[i, j] * v[j]
        work[i] = s
    for i in range(n):
        v[i] = work[i]


@numba.njit(cache=True, nogil=True)
def _run(code, p, t0, x0, f0, t_end, h, rtol, atol, hmax, proj, use_proj, escape_r, stop_comp, stop_val,
         T, X, F, err_old):
    n = x0.shape[0]
    cap = T.shape[0]
    k1 = f0.copy()
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    y = np.empty(n)
    tmp = np.empty(n)
    work = np.empty(n)
    x = x0.copy()
    t = t0
    T[0] = t
    for i in range(n):
        X[0, i] = x[i]
        F[0, i] = k1[i]
    npts = 1
    nacc = 0
    nrej = 0
    rejected_last = False
    while True:
        if t >= t_end:
            return npts, nacc, nrej, 0, h, err_old
        if npts >= cap:
            return npts, nacc, nrej, 1, h, err_old
        if h > hmax:
            h = hmax
        last = False
        if t + h >= t_end:
            h = t_end - t
            last = True
        if h <= 1e-14 * max(1.0, abs(t)):
            return npts, nacc, nrej, 4, h, err_old
        _stage(code, p, x, h, k1, k2, k3, k4, k5, k6, k7, y, tmp, proj, use_proj, work)
        err = 0.0
        for i in range(n):
            sc = atol + rtol * max(abs(x[i]), abs(y[i]))
            e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]) / sc
            err += e * e
        err = math.sqrt(err / n)
        if not math.isfinite(err):
            h *= 0.1
            nrej += 1
            if h <= 1e-14 * max(1.0, abs(t)):
                return npts, nacc, nrej, 5, h, err_old
            continue
        fac11 = err ** EXPO1 if err > 0.0 else 0.0
        if err <= 1.0:
            fac = fac11 / err_old ** BETA
            fac = min(1.0 / FAC_MIN, max(1.0 / FAC_MAX, fac / SAFETY))
            hnew = h / fac
            if rejected_last:
                hnew = min(hnew, h)
            err_old = max(err, 1e-4)
            t = t_end if last else t + h
            nacc += 1
            rejected_last = False
            nrm = 0.0
            for i in range(n):
                x[i] = y[i]
                k1[i] = k7[i]
                nrm += y[i] * y[i]
            T[npts] = t
            for i in range(n):
                X[npts, i] = x[i]
                F[npts, i] = k1[i]
            npts += 1
            h = hnew
            if math.sqrt(nrm) > escape_r:
                return npts, nacc, nrej, 2, h, err_old
            if stop_comp >= 0 and x[stop_comp] >= stop_val:
                return npts, nacc, nrej, 3, h, err_old
        else:
            h = h / min(1.0 / FAC_MIN, fac11 / SAFETY)
            rejected_last = True
            nrej += 1


@numba.njit(cache=True)
def _single_step(code, p, x, f, h, proj, use_proj):
    n = x.shape[0]
    k1 = f.copy()
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    k5 = np.empty(n)
    k6 = np.empty(n)
    k7 = np.empty(n)
    y = np.empty(n)
    tmp = np.empty(n)
    work = np.empty(n)
    _stage(code, p, x, h, k1, k2, k3, k4, k5, k6, k7, y, tmp, proj, use_proj, work)
    return y


@numba.njit(cache=True)
def _eval(code, p, x):
    out = np.empty(x.shape[0])
    rhs_dispatch(code, x, p, out)
    return out


def evaluate_rhs(rhs, params: np.ndarray, x: np.ndarray) -> np.ndarray:
    return _eval(kernel_code(rhs), np.asarray(params, dtype=float), np.ascontiguousarray(x, dtype=float))


# ---------------------------------------------------------------------------


@dataclass
class Solution:
    """Step-resolved trajectory with Hermite dense output."""

    t: np.ndarray
    x: np.ndarray
    f: np.ndarray
    n_accepted: int
    n_rejected: int
    status: str
    rhs: object = field(repr=False, default=None)
    params: np.ndarray = field(repr=False, default=None)
    projector: np.ndarray | None = field(repr=False, default=None)

    def __call__(self, tq) -> np.ndarray:
        return hermite(self.t, self.x, self.f, tq)

    @property
    def t_final(self) -> float:
        return float(self.t[-1])

    @property
    def x_final(self) -> np.ndarray:
        return self.x[-1]

    def exact_state(self, tq: float) -> np.ndarray:
        """State at tq from one full Runge-Kutta step out of the preceding node."""
        k = int(np.searchsorted(self.t, tq, side="right") - 1)
        k = min(max(k, 0), len(self.t) - 1)
        h = tq - self.t[k]
        if h == 0.0:
            return self.x[k].copy()
        P, use = _proj_args(self.projector, self.x.shape[1])
        return _single_step(kernel_code(self.rhs), self.params, self.x[k].copy(), self.f[k].copy(), h, P, use)


def hermite(t: np.ndarray, x: np.ndarray, f: np.ndarray, tq) -> np.ndarray:
    """Cubic Hermite interpolation of (t, x, x') at the query times."""
    tq_arr = np.atleast_1d(np.asarray(tq, dtype=float))
    k = np.clip(np.searchsorted(t, tq_arr, side="right") - 1, 0, len(t) - 2)
    h = t[k + 1] - t[k]
    s = ((tq_arr - t[k]) / h)[:, None]
    h = h[:, None]
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    out = h00 * x[k] + h10 * h * f[k] + h01 * x[k + 1] + h11 * h * f[k + 1]
    return out[0] if np.ndim(tq) == 0 else out


def _proj_args(projector, n):
    if projector is None:
        return np.eye(n), False
    return np.ascontiguousarray(projector, dtype=float), True


def _initial_step(p, x0, f0, rtol, atol, hmax, span):
    sc = atol + rtol * np.abs(x0)
    d0 = np.sqrt(np.mean((x0 / sc) ** 2))
    d1 = np.sqrt(np.mean((f0 / sc) ** 2))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    return float(min(h0, hmax, span))


def solve(rhs, params, x0, t_span, rtol: float = 1e-10, atol: float = 1e-12, max_step: float = np.inf,
          first_step: float | None = None, projector: np.ndarray | None = None,
          escape_radius: float = np.inf, stop: tuple[int, float] | None = None,
          chunk: int = 200_000, max_points: int = 20_000_000, strict: bool = True) -> Solution:
    """Integrate x' = rhs(x) over t_span = (t0, t1).

    ``projector`` (if given) is applied to every stage derivative, which keeps a
    trajectory started in its range inside that linear subspace.  Integration
    stops early when |x| exceeds ``escape_radius`` or when x[stop[0]] reaches
    stop[1].  Step-size underflow or a non-finite state raises IntegrationError
    unless ``strict`` is False, in which case the partial solution is returned
    with that status.
    """
    p = np.ascontiguousarray(params, dtype=float)
    x0 = np.ascontiguousarray(x0, dtype=float).copy()
    n = x0.shape[0]
    if not np.all(np.isfinite(x0)):
        raise IntegrationError("initial state is not finite", float(t_span[0]), x0)
    P, use_proj = _proj_args(projector, n)
    if use_proj:
        x0 = P @ x0
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not (math.isfinite(t1) and t1 >= t0):
        raise ValueError("t_span must be finite and increasing")
    hmax = float(max_step) if max_step and max_step > 0 else np.inf
    code = kernel_code(rhs)
    f0 = _eval(code, p, x0)
    if use_proj:
        f0 = P @ f0
    h = first_step or _initial_step(p, x0, f0, rtol, atol, hmax, max(t1 - t0, 1e-300))
    stop_comp, stop_val = (-1, 0.0) if stop is None else (int(stop[0]), float(stop[1]))
    ts, xs, fs = [], [], []
    nacc = nrej = 0
    t, x, f = t0, x0, f0
    total = 0
    err_old = 1e-4
    while True:
        T = np.empty(chunk)
        X = np.empty((chunk, n))
        F = np.empty((chunk, n))
        # err_old carries the PI controller state so that chunk boundaries do not alter the steps
        npts, a, r, status_code, h, err_old = _run(code, p, t, x, f, t1, h, rtol, atol, hmax, P, use_proj,
                                                   float(escape_radius), stop_comp, stop_val, T, X, F, err_old)
        nacc += a
        nrej += r
        skip = 0 if not ts else 1  # first node repeats the previous chunk's last node
        ts.append(T[skip:npts])
        xs.append(X[skip:npts])
        fs.append(F[skip:npts])
        total += npts - skip
        t, x, f = T[npts - 1], X[npts - 1].copy(), F[npts - 1].copy()
        if status_code != 1:
            break
        if total >= max_points:
            break
    status = STATUS[status_code]
    if status_code in (4, 5) and strict:
        raise IntegrationError(f"integration failed ({status})", float(t), x)
    cat = (lambda a: a[0]) if len(ts) == 1 else np.concatenate
    return Solution(cat(ts), cat(xs), cat(fs), nacc, nrej, status,
                    rhs, p, None if not use_proj else P)


# ---------------------------------------------------------------------------
# events


def locate_crossings(sol: Solution, g, direction: int = 1, t_tol: float = 1e-12,
                     mask=None) -> tuple[np.ndarray, np.ndarray]:
    """Times and states where the scalar function g(states) changes sign.

    ``g`` maps an (m, n) array of states to m values.  ``direction`` selects
    upward (+1), downward (-1) or both (0) crossings; ``mask`` (optional)
    filters candidate intervals given the left-node index array.  Roots are
    refined by bisection on the dense output down to ``t_tol``.
    """
    gv = g(sol.x)
    lo, hi = gv[:-1], gv[1:]
    if direction > 0:
        cand = (lo < 0) & (hi >= 0)
    elif direction < 0:
        cand = (lo > 0) & (hi <= 0)
    else:
        cand = ((lo < 0) & (hi >= 0)) | ((lo > 0) & (hi <= 0))
    idx = np.nonzero(cand)[0]
    if mask is not None and idx.size:
        idx = idx[mask(idx)]
    if idx.size == 0:
        return np.empty(0), np.empty((0, sol.x.shape[1]))
    a = sol.t[idx].copy()
    b = sol.t[idx + 1].copy()
    ga = lo[idx].copy()
    n_iter = int(np.ceil(np.log2(max(np.max(b - a), t_tol) / t_tol))) + 1
    for _ in range(min(n_iter, 200)):
        m = 0.5 * (a + b)
        gm = g(hermite(sol.t, sol.x, sol.f, m))
        left = np.sign(gm) == np.sign(ga)
        a = np.where(left, m, a)
        ga = np.where(left, gm, ga)
        b = np.where(left, b, m)
        if np.max(b - a) <= t_tol:
            break
    tc = 0.5 * (a + b)
    return tc, hermite(sol.t, sol.x, sol.f, tc)


def refine_terminal(sol: Solution, scalar, target: float, xtol: float = 1e-14) -> tuple[float, np.ndarray]:
    """Exact crossing of scalar(x) = target inside the final step, using full RK steps."""
    if len(sol.t) < 2:
        raise IntegrationError("no step available for event refinement")
    k = len(sol.t) - 2
    t0, x0, f0 = sol.t[k], sol.x[k].copy(), sol.f[k].copy()
    P, use = _proj_args(sol.projector, sol.x.shape[1])

    def fun(s):
        if s == 0.0:
            return scalar(x0) - target
        return scalar(_single_step(kernel_code(sol.rhs), sol.params, x0, f0, s, P, use)) - target

    H = sol.t[k + 1] - t0
    g0, g1 = fun(0.0), fun(H)
    if g0 * g1 > 0:
        return float(sol.t[-1]), sol.x[-1].copy()
    s = brentq(fun, 0.0, H, xtol=xtol, rtol=4 * np.finfo(float).eps)
    return float(t0 + s), _single_step(kernel_code(sol.rhs), sol.params, x0, f0, s, P, use)
