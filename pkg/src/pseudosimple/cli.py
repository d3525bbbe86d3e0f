"""Command-line front end: JSON scenarios in, CSV and summary files out.

Every task writes into the output directory and nothing else; outputs carry no
timestamps, so re-running a scenario with the same seed reproduces them byte for
byte.  Exit codes: 0 success, 1 domain failure (conditions violated, connection
not found, failed checks), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, fields as dc_fields, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import quaternions as qt
from .dynamics import (ClassifierSettings, IntegratorConfig, SweepProtocol, classify_attractor, compute_connections,
                       escape_census, initial_state, sweep, write_csv)
from .errors import ConfigError, DomainError, PseudoSimpleError
from .fields import (CoeffsD3, CoeffsGL, Family, GLParametrization, PlanarParams, VectorFieldSpec, analytic_values,
                     cycle_rates, d3_cubic, d3_tilde_cubic, equilibria_on_axes, existence_report, gl23_cubic,
                     planar_d3, verify_equivariance)
from .maps import (CycleData, InstabilityModel, PeriodicOrbitModel, ReflectionModel, SectionPoint,
                   cycle_data_from_rates, iterate_return_map, periodic_regime, reflection_contraction)
from .planar_d3 import (SECTOR, conserved_quantity, exit_angle_implicit, s_integral, s_integral_closed_form,
                        transit, transit_time_axis)

log = logging.getLogger("pseudosimple")

TASKS = ("group", "analyze", "planar", "simulate", "sweep", "returnmap", "census", "verify")
ENV_PREFIX = "PSEUDOSIMPLE_"

# projection planes used by the shipped simulate scenarios
PROJECTION_D3 = ((4.0, 2.0, 4.0, 1.5), (2.0, 4.0, -1.5, 4.0))
PROJECTION_GL = ((1.0, 2.0, 1.0, 1.8), (2.0, -1.0, 1.8, -1.0))


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ScenarioConfig:
    task: str
    name: str = "scenario"
    family: str | None = None
    coefficients: dict = field(default_factory=dict)
    integrator: dict = field(default_factory=dict)
    classifier: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    census: dict = field(default_factory=dict)
    returnmap: dict = field(default_factory=dict)
    planar: dict = field(default_factory=dict)
    description: str = ""
    seed: int = 0
    threads: int = 1


def load_schema() -> dict:
    text = resources.files("pseudosimple").joinpath("scenario.schema.json").read_text()
    return json.loads(text)


def validate_config(data: dict) -> ScenarioConfig:
    """Schema validation (unknown keys are rejected) followed by cross-field checks."""
    try:
        jsonschema.validate(data, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid scenario at {where}: {exc.message}") from None
    cfg = ScenarioConfig(**data)
    needs_family = {"analyze", "simulate", "census", "sweep"}
    if cfg.task in needs_family and cfg.family is None:
        raise ConfigError(f"task {cfg.task!r} needs a 'family'")
    if cfg.task == "sweep" and cfg.family != "GL23Cubic":
        raise ConfigError("sweeps run over the (h1, h2) grid of the GL23Cubic family")
    if cfg.task == "returnmap" and not cfg.returnmap:
        raise ConfigError("task 'returnmap' needs a 'returnmap' block")
    return cfg


def load_config(path: str | os.PathLike) -> ScenarioConfig:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return validate_config(data)


_D3_KEYS = {f"a{i}" for i in range(1, 11)} | {f"b{i}" for i in range(1, 7)}


def build_spec(family: str, coeffs: dict) -> VectorFieldSpec:
    """Vector field from a family tag and its coefficient block (empty block = reference values)."""
    keys = set(coeffs)
    try:
        if family in ("D3Cubic", "D3TildeCubic"):
            extra = keys - _D3_KEYS
            if extra:
                raise ConfigError(f"keys {sorted(extra)} do not belong to {family}")
            tilde = family == "D3TildeCubic"
            base = CoeffsD3.reference_tilde() if tilde else CoeffsD3.reference()
            cf = replace(base, **{k: float(v) for k, v in coeffs.items()})
            return d3_tilde_cubic(cf) if tilde else d3_cubic(cf)
        if family == "GL23Cubic":
            if keys <= {"h1", "h2"}:
                par = GLParametrization(float(coeffs.get("h1", 0.8)), float(coeffs.get("h2", 0.001)))
                return gl23_cubic(par)
            if keys & {"h1", "h2"}:
                raise ConfigError("give either h1, h2 or the raw coefficients b, c, d, e (mu), not both")
            missing = {"b", "c", "d", "e"} - keys
            extra = keys - {"mu", "b", "c", "d", "e"}
            if missing or extra:
                raise ConfigError(f"GL23Cubic raw coefficients: missing {sorted(missing)}, unknown {sorted(extra)}")
            return gl23_cubic(CoeffsGL(mu=float(coeffs.get("mu", 1.0)), **{k: float(coeffs[k]) for k in "bcde"}))
        if family == "PlanarD3":
            extra = keys - {"alpha_planar", "beta_planar"}
            if extra:
                raise ConfigError(f"keys {sorted(extra)} do not belong to PlanarD3")
            return planar_d3(PlanarParams(float(coeffs.get("alpha_planar", 0.1)),
                                          float(coeffs.get("beta_planar", 1.0))))
    except ValueError as exc:
        if isinstance(exc, PseudoSimpleError):
            raise
        raise ConfigError(f"invalid {family} coefficients: {exc}") from None
    raise ConfigError(f"unknown family {family!r}")


def integrator_config(cfg: ScenarioConfig, t_max: float = 20000.0) -> IntegratorConfig:
    kw = dict(cfg.integrator)
    kw.setdefault("t_max", t_max)
    return IntegratorConfig(**kw)


def classifier_settings(cfg: ScenarioConfig) -> ClassifierSettings:
    try:
        return ClassifierSettings(**cfg.classifier)
    except ValueError as exc:
        raise ConfigError(f"invalid classifier block: {exc}") from None


# ---------------------------------------------------------------------------
# output helpers


def fmt(x) -> str:
    """Shortest round-trip text for floats, plain text for everything else."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def write_json(path: Path, data) -> None:
    write_text(path, json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_table(path: Path, rows: list[dict], columns: list[str] | None = None) -> None:
    columns = columns or (list(rows[0]) if rows else [])
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(_cell(r.get(c, "")) for c in columns) + "\n")
    write_text(path, buf.getvalue())


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, dict):
        return ";".join(f"{k}={x}" for k, x in v.items())
    s = fmt(v)
    return f'"{s}"' if "," in s else s


def emit_projection(traj, v1, v2) -> str:
    """CSV with columns t,p1,p2 where p_i = <x, v_i> / |v_i|.

    ``traj`` is a pair (t, X) with X of shape (len(t), 4).
    """
    t, X = traj
    t = np.asarray(t, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    V = np.array([v1, v2], dtype=float)
    if V.shape[1] != X.shape[1]:
        raise DomainError(f"projection vectors must have length {X.shape[1]}")
    if np.linalg.matrix_rank(V, tol=1e-12 * max(1.0, np.abs(V).max())) < 2:
        raise DomainError("projection vectors are linearly dependent")
    P = X @ (V / np.linalg.norm(V, axis=1, keepdims=True)).T
    buf = io.StringIO()
    write_csv(buf, "t,p1,p2", np.column_stack([t, P]))
    return buf.getvalue()


# ---------------------------------------------------------------------------
# tasks


def task_group(cfg: ScenarioConfig, out: Path) -> int:
    groups = {"D3": qt.gamma_d3(), "D3xZ2": qt.gamma_d3_tilde(), "GL23": qt.gl23_group()}
    lines = [f"{name}: order {g.order}" for name, g in groups.items()]
    for name, g in groups.items():
        write_text(out / f"group_{name}.txt", g.to_text())
    inv = qt.enumerate_isotropy_gl23(groups["GL23"])
    rows = [{"label": lab, "dim": sub.dim, "basis": " ".join(fmt(round(float(x), 12) + 0.0)
                                                             for x in sub.basis.ravel())} for lab, sub in inv]
    write_table(out / "subspaces_GL23.csv", rows, ["label", "dim", "basis"])
    axes = qt.gl23_axis_planes(inv)
    lines += [f"{ax} lies in {', '.join(pl)}" for ax, pl in axes.items()]
    write_text(out / "groups.txt", "\n".join(lines) + "\n")
    for line in lines:
        log.info(line)
    return 0


def _analysis(spec: VectorFieldSpec) -> tuple[dict, list[str]]:
    rep = existence_report(spec)
    summary: dict = {"family": spec.family.value, "coefficients": spec.coeffs.as_dict() if hasattr(spec.coeffs, "as_dict")
                     else {"alpha": spec.coeffs.alpha, "beta": spec.coeffs.beta}}
    summary["conditions"] = [{"name": c.name, "kind": c.kind, "passed": c.passed, "message": c.message}
                             for c in rep.conditions]
    problems = [c.message for c in rep.failures("required")]
    if spec.family is not Family.PLANAR_D3 and not problems:
        eqs = []
        for r in equilibria_on_axes(spec):
            eqs.append({"label": r.label, "position": r.position, "residual": r.residual,
                        "eigenvalues": [{"value": e.value, "multiplicity": e.multiplicity, "role": e.role}
                                        for e in r.eigen],
                        "analytic": analytic_values(spec, r.label)})
        summary["equilibria"] = eqs
        rates = cycle_rates(spec)
        summary["rates"] = {"c1": rates.c1, "e1": rates.e1, "c2": rates.c2, "e2": rates.e2}
    return summary, problems


def task_analyze(cfg: ScenarioConfig, out: Path) -> int:
    spec = build_spec(cfg.family, cfg.coefficients)
    summary, problems = _analysis(spec)
    write_json(out / "summary.json", summary)
    lines = [c["message"] for c in summary["conditions"]]
    for e in summary.get("equilibria", []):
        vals = ", ".join(f"{x['value']:.6g} (x{x['multiplicity']}, {x['role']})" for x in e["eigenvalues"])
        lines.append(f"{e['label']}: {vals}")
    write_text(out / "summary.txt", "\n".join(lines) + "\n")
    for msg in problems:
        log.error(msg)
    return 1 if problems else 0


def task_planar(cfg: ScenarioConfig, out: Path) -> int:
    spec = build_spec(cfg.family or "PlanarD3", cfg.coefficients)
    par: PlanarParams = spec.coeffs
    r0s = cfg.planar.get("r0", [0.001, 0.01, 0.1, 0.5])
    th0s = cfg.planar.get("theta0", [0.0, 0.1 * SECTOR, 0.5 * SECTOR, 0.9 * SECTOR])
    rows = []
    for r0 in r0s:
        for th0 in th0s:
            if not (0 < r0 < 1 and 0 <= th0 < SECTOR):
                raise ConfigError(f"planar start ({r0}, {th0}) outside (0,1) x [0, pi/3)")
            rec = transit(par, r0, th0)
            c0 = conserved_quantity(par, r0, th0)
            c1 = conserved_quantity(par, 1.0, rec.theta_exit)
            rows.append({"r0": r0, "theta0": th0, "tau": rec.tau, "theta_exit": rec.theta_exit,
                         "theta_exit_implicit": exit_angle_implicit(par, r0, th0),
                         "tau_axis": transit_time_axis(par, r0),
                         "invariant_drift": abs(c1 - c0) / max(abs(c0), 1e-300)})
    write_table(out / "transits.csv", rows)
    s_num, s_ref = float(s_integral(SECTOR)), s_integral_closed_form()
    write_json(out / "summary.json", {"alpha": par.alpha, "beta": par.beta, "S_sector": s_num,
                                      "S_sector_closed_form": s_ref, "n_transits": len(rows)})
    return 0


def _start(cfg: ScenarioConfig, geometry, rng) -> np.ndarray:
    ini = cfg.initial
    if "x0" in ini:
        return np.asarray(ini["x0"], dtype=float)
    return initial_state(geometry, ini.get("anchor", "kappa2_mid"), ini.get("offset"), ini.get("scale", 0.02), rng)


def task_simulate(cfg: ScenarioConfig, out: Path) -> int:
    spec = build_spec(cfg.family, cfg.coefficients)
    _, problems = _analysis(spec)
    if problems:
        for msg in problems:
            log.error(msg)
        return 1
    geometry = compute_connections(spec)
    rng = np.random.default_rng(cfg.seed)
    x0 = _start(cfg, geometry, rng)
    config = integrator_config(cfg)
    verdict = classify_attractor(spec, x0, geometry, config, classifier_settings(cfg), seed=cfg.seed,
                                 keep_trajectory=True)
    rec = verdict.record
    dt = float(cfg.output.get("dt", 0.5))
    window = float(cfg.output.get("window", verdict.period * 1.02 if verdict.period else 0.1 * rec.t[-1]))
    t_end = float(rec.t[-1])
    ts = np.arange(max(rec.t[0], t_end - window), t_end, dt)
    X = rec.solution(ts)
    buf = io.StringIO()
    write_csv(buf, "t,x1,y1,x2,y2", np.column_stack([ts, X]))
    write_text(out / "trajectory.csv", buf.getvalue())
    default = PROJECTION_GL if spec.family is Family.GL23_CUBIC else PROJECTION_D3
    v1, v2 = cfg.output.get("v1", default[0]), cfg.output.get("v2", default[1])
    write_text(out / "projection.csv", emit_projection((ts, X), v1, v2))
    # the cycle X in the same projection, one block per connection
    V = np.array([v1, v2], dtype=float)
    V /= np.linalg.norm(V, axis=1, keepdims=True)
    buf = io.StringIO()
    buf.write("curve,label,p1,p2\n")
    for k, c in enumerate(geometry.orbit):
        P = c.points[:: max(1, len(c.points) // 400)] @ V.T
        for p in P:
            buf.write(f"{k},{c.label},{p[0]!r},{p[1]!r}\n")
    write_text(out / "cycle_projection.csv", buf.getvalue())
    eq = geometry.equilibria @ V.T
    write_table(out / "equilibria_projection.csv",
                [{"type": int(t), "p1": float(p[0]), "p2": float(p[1])} for t, p in zip(geometry.eq_type, eq)])
    summary = verdict.summary()
    summary.update(message=verdict.message, x0=x0, t_max=config.t_max, n_accepted=rec.n_accepted,
                   n_rejected=rec.n_rejected, integration_end=rec.reason)
    write_json(out / "verdict.json", summary)
    write_text(out / "verdict.txt", verdict.to_text())
    log.info("verdict: %s", verdict.kind)
    return 0


def task_sweep(cfg: ScenarioConfig, out: Path) -> int:
    grid = cfg.sweep["grid"]
    protocol = SweepProtocol(integrator_config(cfg), classifier_settings(cfg), cfg.sweep.get("anchor", "kappa2_mid"),
                             float(cfg.sweep.get("scale", 0.02)), cfg.seed)
    rows = sweep(lambda p: build_spec("GL23Cubic", p), grid, protocol, threads=cfg.threads)
    cols = ["h1", "h2", "kind", "period", "min_dist", "max_dist", "final_dist", "n_returns", "return_lag",
            "return_mismatch", "return_dispersion", "planes_per_period", "seed", "error"]
    write_table(out / "verdicts.csv", rows, cols)
    for r in rows:
        log.info("h1=%s h2=%s -> %s", r["h1"], r["h2"], r["kind"])
    return 1 if any(r.get("error") for r in rows) else 0


def _cycle_data(cfg: ScenarioConfig) -> CycleData:
    rm = cfg.returnmap
    kw = dict(rm.get("cycle", {}))
    try:
        if cfg.family is not None:
            rates = cycle_rates(build_spec(cfg.family, cfg.coefficients))
            return cycle_data_from_rates(rates, **{k: v for k, v in kw.items() if k not in ("c1", "e1", "c2", "e2")})
        return CycleData(**kw)
    except TypeError as exc:
        raise ConfigError(f"invalid cycle block: {exc}") from None
    except ValueError as exc:
        if isinstance(exc, PseudoSimpleError):
            raise
        raise ConfigError(f"invalid cycle block: {exc}") from None


def task_returnmap(cfg: ScenarioConfig, out: Path) -> int:
    rm = cfg.returnmap
    cd = _cycle_data(cfg)
    n = int(rm.get("iterations", 50))
    summary: dict = {"model": rm["model"], "cycle": {f.name: getattr(cd, f.name) for f in dc_fields(cd)}}
    if rm["model"] == "periodic":
        mu = float(rm.get("mu", 1e-3))
        model = PeriodicOrbitModel(cd, mu, exact_local=bool(rm.get("exact_local", True)))
        reg = periodic_regime(cd, mu, exact_local=model.exact_local)
        summary.update(mu=mu, regime=reg.regime, exponent=reg.exponent, fixed_point=reg.fixed_point,
                       contraction=reg.q)
        start = rm.get("start", list(reg.fixed_point) if reg.fixed_point else [0.5 * mu, 0.1])
    elif rm["model"] == "instability":
        model = InstabilityModel(cd, float(rm.get("epsilon", 0.1)))
        start = rm.get("start", [0.01, 0.001])
    else:
        model = ReflectionModel(cd)
        rep = reflection_contraction(cd)
        summary.update(h=rep.h, rho_contracts=rep.rho_contracts)
        start = rm.get("start", [0.05, 0.3])
    res = iterate_return_map(model, SectionPoint(float(start[0]), float(start[1]), polar=getattr(model, "polar", True)),
                             n, float(rm.get("rho_max", 1.0)))
    buf = io.StringIO()
    write_csv(buf, "n,a,b", np.column_stack([np.arange(len(res.points)), res.points]))
    write_text(out / "iterates.csv", buf.getvalue())
    summary.update(start=start, iterations=res.n, exit_reason=res.exit_reason, message=res.message)
    write_json(out / "summary.json", summary)
    return 0


def task_census(cfg: ScenarioConfig, out: Path) -> int:
    spec = build_spec(cfg.family, cfg.coefficients)
    geometry = compute_connections(spec)
    delta = float(cfg.census.get("delta", 0.1))
    n = int(cfg.census.get("n_samples", 200))
    res = escape_census(spec, geometry, delta, n, seed=cfg.seed, config=integrator_config(cfg),
                        settings=classifier_settings(cfg), threads=cfg.threads,
                        allow_reflections=spec.family is Family.D3_TILDE_CUBIC)
    rows = [{"i": i, "x1": x[0], "x2": x[1], "x3": x[2], "x4": x[3], "outcome": o}
            for i, (x, o) in enumerate(zip(res.starts, res.outcomes))]
    write_table(out / "census.csv", rows)
    write_json(out / "summary.json", {"fraction_escaping": res.fraction, "n_escaped": res.n_escaped,
                                      "n_samples": res.n_samples, "delta": delta, "seed": cfg.seed})
    log.info("escape fraction %.4f (%d of %d)", res.fraction, res.n_escaped, res.n_samples)
    return 0


def invariant_checks() -> list[tuple[str, bool, str]]:
    """The self-test suite behind ``verify``: (name, passed, detail) per check."""
    checks = []
    groups = {"D3": (qt.gamma_d3(), 6), "D3xZ2": (qt.gamma_d3_tilde(), 12), "GL23": (qt.gl23_group(), 48)}
    for name, (g, want) in groups.items():
        checks.append((f"order of {name}", g.order == want, f"{g.order} (expected {want})"))
    specs = {"D3Cubic": d3_cubic(CoeffsD3.reference()), "D3TildeCubic": d3_tilde_cubic(CoeffsD3.reference_tilde()),
             "GL23Cubic": gl23_cubic(GLParametrization(0.8, 0.001))}
    for name, spec in specs.items():
        r = verify_equivariance(spec, samples=100)
        checks.append((f"equivariance of {name}", r <= 1e-9, f"residual {r:.3e}"))
    ref = specs["D3Cubic"]
    want = {"xi1": [(-0.2041, 2), (0.2834, 1)], "xi2": [(-0.4834, 1), (0.0041, 2)]}
    for rep in equilibria_on_axes(ref):
        got = [(e.value, e.multiplicity) for e in rep.eigen if e.role != "radial"]
        ok = all(any(abs(v - w) <= 5e-4 and m == mw for v, m in got) for w, mw in want[rep.label])
        checks.append((f"eigenvalues at {rep.label}", ok, ", ".join(f"{v:.5f}(x{m})" for v, m in got)))
    s_num, s_ref = float(s_integral(SECTOR)), s_integral_closed_form()
    checks.append(("S(pi/3) quadrature", abs(s_num - s_ref) <= 1e-8, f"{s_num:.12f} vs {s_ref:.12f}"))
    gl = groups["GL23"][0]
    inv = qt.enumerate_isotropy_gl23(gl)
    planes_ok = all(sub.dim == 2 for lab, sub in inv if lab.startswith("P"))
    checks.append(("fixed planes of the order-48 group", planes_ok, f"{sum(1 for l, _ in inv if l[0] == 'P')} planes"))
    agree = 0
    for M in gl.elements:
        g = qt.rotation_from_matrix(M)
        agree += qt.dim_fix_two_predicate(g) == (qt.fixed_subspace(qt.cyclic_closure(M)).dim == 2)
    checks.append(("two-dimensional fixed space predicate", agree == gl.order, f"{agree}/{gl.order} elements agree"))
    lab = dict(inv)
    dot = float(abs(lab["L1(0,0)"].basis[0] @ lab["L2(0,0)"].basis[0]))
    checks.append(("L1(0,0) orthogonal to L2(0,0)", dot <= 1e-10, f"|<u1,u2>| = {dot:.2e}"))
    # a point of L2 is (e^{3 pi i/4} r2 w, r2 w) with |w| = 1, so |xi2|^2 = 2 r2^2
    xi2 = equilibria_on_axes(specs["GL23Cubic"])[1].position
    r2sq = 0.5 * float(xi2 @ xi2)
    checks.append(("GL reference r2^2 = 1/2", abs(r2sq - 0.5) <= 1e-10, f"{r2sq:.12f}"))
    return checks


def task_verify(cfg: ScenarioConfig, out: Path) -> int:
    checks = invariant_checks()
    lines = [f"{'PASS' if ok else 'FAIL'}  {name}: {detail}" for name, ok, detail in checks]
    write_text(out / "verify.txt", "\n".join(lines) + "\n")
    for line in lines:
        log.info(line)
    return 0 if all(ok for _, ok, _ in checks) else 1


HANDLERS = {"group": task_group, "analyze": task_analyze, "planar": task_planar, "simulate": task_simulate,
            "sweep": task_sweep, "returnmap": task_returnmap, "census": task_census, "verify": task_verify}


def _as_dict(cfg: ScenarioConfig) -> dict:
    # empty blocks are left out: the schema requires keys inside some of them
    return {k: v for k, v in cfg.__dict__.items() if v is not None and v != {}}


def run(cfg: ScenarioConfig, out: str | os.PathLike) -> int:
    """Run one scenario, writing its artifacts below ``out``; returns the exit code."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "scenario.json", _as_dict(cfg))
    return HANDLERS[cfg.task](cfg, out)


# ---------------------------------------------------------------------------
# argument handling


def _add_common(p: argparse.ArgumentParser, default) -> None:
    p.add_argument("--config", default=default, help="scenario JSON file (env PSEUDOSIMPLE_CONFIG)")
    p.add_argument("--out", default=default, help="output directory (env PSEUDOSIMPLE_OUT, default results/<name>)")
    p.add_argument("--seed", type=int, default=default, help="random seed (env PSEUDOSIMPLE_SEED)")
    p.add_argument("--threads", type=int, default=default,
                   help="worker threads for sweeps and censuses (env PSEUDOSIMPLE_THREADS)")
    p.add_argument("--verbose", action="store_true", default=default, help="progress on stderr (env PSEUDOSIMPLE_VERBOSE)")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pseudosimple",
                                description="Equivariant systems with pseudo-simple heteroclinic cycles.")
    _add_common(p, None)
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    # flags may come before or after the command; SUPPRESS keeps the later parser from resetting them
    r = sub.add_parser("run", help="run the task named in the config file")
    _add_common(r, argparse.SUPPRESS)
    for t in TASKS:
        _add_common(sub.add_parser(t, help=f"run the {t} task (overrides the config task)"), argparse.SUPPRESS)
    return p


def _env(name: str):
    return os.environ.get(ENV_PREFIX + name)


def _resolve(args, environ_int) -> dict:
    out = {}
    for key in ("config", "out"):
        out[key] = getattr(args, key) or _env(key.upper())
    for key in ("seed", "threads"):
        v = getattr(args, key)
        out[key] = v if v is not None else environ_int(key.upper())
    v = args.verbose if args.verbose is not None else (_env("VERBOSE") or "").lower() in ("1", "true", "yes", "on")
    out["verbose"] = bool(v)
    return out


def main(argv: list[str] | None = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2

    def environ_int(name):
        v = _env(name)
        if v is None:
            return None
        try:
            return int(v)
        except ValueError:
            raise ConfigError(f"{ENV_PREFIX}{name} must be an integer, got {v!r}") from None

    try:
        opts = _resolve(args, environ_int)
        logging.basicConfig(level=logging.INFO if opts["verbose"] else logging.WARNING,
                            format="%(levelname)s %(message)s", stream=sys.stderr)
        command = args.command or "run"
        if opts["config"]:
            cfg = load_config(opts["config"])
        elif command in ("run", None):
            parser.print_usage(sys.stderr)
            print("pseudosimple: error: 'run' needs --config", file=sys.stderr)
            return 2
        else:
            cfg = validate_config({"task": command, "name": command})
        if command != "run" and command != cfg.task:
            cfg = validate_config({**_as_dict(cfg), "task": command})
        if opts["seed"] is not None:
            cfg.seed = opts["seed"]
        if opts["threads"] is not None:
            if opts["threads"] < 1:
                raise ConfigError("threads must be at least 1")
            cfg.threads = opts["threads"]
        out = opts["out"] or os.path.join("results", cfg.name)
        return run(cfg, out)
    except ConfigError as exc:
        print(f"pseudosimple: configuration error: {exc}", file=sys.stderr)
        return 2
    except PseudoSimpleError as exc:
        print(f"pseudosimple: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
