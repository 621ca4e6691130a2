"""Command-line front end: ``memdiff <command> --config <path> [--out <dir>] [--threads k]``.

Every command reads a JSON config, writes ``summary.json`` (schema version,
resolved config, content hashes, results) and CSV artifacts into the output
directory.  Exit codes: 0 success, 2 invalid input, 3 solver failure,
4 inputs outside the regime where the result is defined.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import integrate
from .eigen import principal_eigenpair, rayleigh_quotient
from .errors import ConfigError, MemdiffError, NoSignChange, RegimeError, SolverError
from .gamma0 import classify_zero_eigenvalue, compute_coefficients
from .gamma1 import analyze_gamma1, classify_gamma1_stability, find_u1_all
from .grid import Field, Grid1D
from .hopf import amplitude_from_lambda, classify_gamma0_stability, crossing_data, hopf_condition
from .model import ModelSpec, check_A0, logistic_heterogeneous, saturating_bistable_boundary
from .spectrum import assemble_linearization, continue_in_sigma, delay_free_spectrum, delayed_spectrum, unstable_count_profile
from .steady import continue_branch_fold, continue_branch_gamma0, continue_branch_gamma1, solve_steady

SCHEMA_VERSION = "1.0"
COMMANDS = ("eigen", "steady", "branch", "coeffs", "gamma1", "hopf", "spectrum", "sweep-sigma", "simulate", "reproduce")
RECIPES = ("hopf-switch", "no-hopf", "gamma1")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_REGIME = 0, 2, 3, 4

DEFAULTS = {
    "model": {"builtin": "logistic_heterogeneous", "m_hat": {"sum": [{"cos": 1}, -0.2]}, "r0": -1.0, "r1": -1.0, "d": 30.0},
    "grid": {"L": 1.0, "N": 128},
    "solver": {"tol": 1e-10, "max_iter": 50, "k": 20, "xtol": 1e-8},
    "task": {},
    "output": {"dir": "out", "formats": ["json", "csv"]},
    "seed": 0,
}

_BUILTINS = {
    "logistic_heterogeneous": (logistic_heterogeneous, {"m_hat", "r0", "r1", "d"}),
    "saturating_bistable_boundary": (saturating_bistable_boundary, {"r_hat", "k_hat", "gamma_hat", "a_hat", "r0", "r1", "d"}),
}


# ----------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    model: ModelSpec
    grid: Grid1D
    tol: float
    max_iter: int
    k: int
    xtol: float
    task: dict
    out_dir: Path
    formats: tuple


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key != "task":
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def _number(block: dict, key: str, path: str, positive=False, integer=False, minimum=None):
    val = block.get(key)
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ConfigError(f"expected a finite number, got {val!r}", f"{path}.{key}")
    if integer and int(val) != val:
        raise ConfigError(f"expected an integer, got {val!r}", f"{path}.{key}")
    if positive and not val > 0:
        raise ConfigError(f"must be positive, got {val!r}", f"{path}.{key}")
    if minimum is not None and val < minimum:
        raise ConfigError(f"must be >= {minimum}, got {val!r}", f"{path}.{key}")
    return int(val) if integer else float(val)


def resolve_config(raw: dict, out_override: str | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a JSON object", "config")
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", "config")
    if "model" in raw and isinstance(raw["model"], dict) and raw["model"].get("builtin", DEFAULTS["model"]["builtin"]) != DEFAULTS["model"]["builtin"]:
        merged = _merge({k: v for k, v in DEFAULTS.items() if k != "model"}, raw)
    else:
        merged = _merge(DEFAULTS, raw)
    if out_override is not None:
        merged["output"]["dir"] = str(out_override)
    for key in ("model", "grid", "solver", "task", "output"):
        if not isinstance(merged.get(key), dict):
            raise ConfigError("must be an object", key)

    g = merged["grid"]
    L = _number(g, "L", "grid", positive=True)
    N = _number(g, "N", "grid", integer=True)
    if N < 16:
        raise ConfigError(f"must be >= 16, got {N}", "grid.N")
    grid = Grid1D(L, N)

    s = merged["solver"]
    tol = _number(s, "tol", "solver", positive=True)
    max_iter = _number(s, "max_iter", "solver", integer=True, minimum=1)
    k = _number(s, "k", "solver", integer=True, minimum=2)
    xtol = _number(s, "xtol", "solver", positive=True)

    m = dict(merged["model"])
    name = m.pop("builtin", None)
    if name not in _BUILTINS:
        raise ConfigError(f"unknown builtin {name!r}; choose from {sorted(_BUILTINS)}", "model.builtin")
    factory, allowed = _BUILTINS[name]
    extra = set(m) - allowed - {"lam", "sigma"}
    if extra:
        raise ConfigError(f"unknown parameters {sorted(extra)}", "model")
    for key in ("r0", "r1", "d"):
        if key in m:
            _number(m, key, "model")
    lam = m.pop("lam", 1.0)
    sigma = m.pop("sigma", 0.0)
    model = factory(**m, lam=lam, sigma=sigma, length=L)

    o = merged["output"]
    formats = tuple(o.get("formats", ("json", "csv")))
    if not set(formats) <= {"json", "csv"}:
        raise ConfigError(f"unsupported formats {formats}", "output.formats")
    out_dir = Path(o.get("dir", "out"))
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory: {exc}", "output.dir") from exc
    if not os.access(out_dir, os.W_OK):
        raise ConfigError("output directory is not writable", "output.dir")
    return RunConfig(merged, model, grid, tol, max_iter, k, xtol, merged["task"], out_dir, formats)


def load_config(path: str, out_override: str | None = None) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError("file not found", "config") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON ({exc})", "config") from exc
    return resolve_config(raw, out_override)


def _task_number(cfg: RunConfig, key: str, default=None, **kw):
    if key not in cfg.task:
        if default is None:
            raise ConfigError("required", f"task.{key}")
        return default
    return _number(cfg.task, key, "task", **kw)


# ----------------------------------------------------------------------------
# output


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not serializable: {type(obj)}")


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


class Writer:
    """Collects artifacts and writes them in a fixed order."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.artifacts: list[str] = []

    def csv(self, name: str, header, rows):
        if "csv" not in self.cfg.formats:
            return
        path = self.cfg.out_dir / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        self.artifacts.append(name)

    def summary(self, result: dict) -> dict:
        config = json.loads(_canonical(self.cfg.raw))
        doc = {
            "schema_version": SCHEMA_VERSION,
            "package_version": __version__,
            "command": self.command,
            "config": config,
            "config_hash": hashlib.sha256(_canonical(config).encode()).hexdigest(),
            "result": json.loads(_canonical(result)),
            "artifacts": sorted(self.artifacts),
        }
        doc["result_hash"] = hashlib.sha256(_canonical(doc["result"]).encode()).hexdigest()
        if "json" in self.cfg.formats:
            with open(self.cfg.out_dir / "summary.json", "w") as fh:
                json.dump(doc, fh, indent=2, sort_keys=True, default=_jsonable)
                fh.write("\n")
        return doc


# ----------------------------------------------------------------------------
# shared steps


def _eigen(cfg):
    return principal_eigenpair(cfg.model, cfg.grid)


def _gamma0_state(cfg, lam, eig=None, coeffs=None, steps=None):
    """Steady state at ``lam`` on the branch born at ``lam1``, reached by continuation."""
    eig = eig or _eigen(cfg)
    coeffs = coeffs or compute_coefficients(cfg.model, eig)
    lam1 = eig.lambda1
    eps = (lam - lam1) / lam1
    if steps is None:
        steps = max(2, min(40, int(math.ceil(abs(eps) / 0.08)) + 1))
    start = lam1 * (1 + math.copysign(min(abs(eps), 0.02), eps))
    branch = continue_branch_gamma0(cfg.model, eig, coeffs, (start, lam), steps=steps, tol=cfg.tol)
    st = min(branch.states, key=lambda s: abs(s.lam - lam))
    if abs(st.lam - lam) > 1e-12 * abs(lam):
        raise SolverError(f"continuation stopped at lam={st.lam:.6g} before reaching {lam:.6g}")
    return eig, coeffs, st


def _lam_from_task(cfg, eig):
    if "lam" in cfg.task:
        return _task_number(cfg, "lam", positive=True)
    if "epsilon" in cfg.task:
        return eig.lambda1 * (1 + _task_number(cfg, "epsilon"))
    raise ConfigError("give lam or epsilon (relative distance from lam1)", "task.lam")


def _sigma_grid(cfg, default_stop=None):
    sg = cfg.task.get("sigma_grid")
    if sg is None:
        if default_stop is None:
            raise ConfigError("required", "task.sigma_grid")
        sg = {"start": 0.0, "stop": default_stop, "num": 41}
    if isinstance(sg, list):
        arr = np.array([float(v) for v in sg])
    elif isinstance(sg, dict):
        start = _number(sg, "start", "task.sigma_grid", minimum=0.0)
        stop = _number(sg, "stop", "task.sigma_grid", positive=True)
        num = _number(sg, "num", "task.sigma_grid", integer=True, minimum=2)
        arr = np.linspace(start, stop, num)
    else:
        raise ConfigError("must be a list or {start, stop, num}", "task.sigma_grid")
    if arr[0] < 0 or np.any(np.diff(arr) <= 0):
        raise ConfigError("must be non-negative and strictly increasing", "task.sigma_grid")
    return arr


def _field_rows(grid, *cols):
    return zip(grid.x, *[np.asarray(c) for c in cols])


def _sweep(cfg, pair, sigmas):
    results = continue_in_sigma(pair, sigmas, k=cfg.k, xtol=cfg.xtol)
    profile = unstable_count_profile(results)
    return results, profile


def _crossing_dicts(crossings):
    return [
        {"sigma": c.sigma, "omega": c.omega, "dmu_dsigma": [c.dmu_dsigma.real, c.dmu_dsigma.imag], "condition": c.condition}
        for c in crossings
    ]


# ----------------------------------------------------------------------------
# commands


def cmd_eigen(cfg, w, threads):
    eig = _eigen(cfg)
    w.csv("eigenfunction.csv", ["x", "phi1"], _field_rows(cfg.grid, eig.phi))
    rq = rayleigh_quotient(cfg.model, eig.phi1)
    return {"lambda1": eig.lambda1, "residual": eig.residual_norm, "rayleigh_quotient": rq, "min_phi1": float(np.min(eig.phi))}


def cmd_steady(cfg, w, threads):
    guess = cfg.task.get("guess", "branch")
    if guess == "branch":
        eig = _eigen(cfg)
        lam = _lam_from_task(cfg, eig)
        _, _, st = _gamma0_state(cfg, lam, eig)
    else:
        lam = _task_number(cfg, "lam", positive=True)
        c = _number({"guess": guess}, "guess", "task")
        st = solve_steady(cfg.model, lam, Field(cfg.grid, np.full(cfg.grid.n_nodes, c)), tol=cfg.tol, max_iter=cfg.max_iter)
    w.csv("steady.csv", ["x", "u"], _field_rows(cfg.grid, st.u))
    a0 = check_A0(cfg.model, (0.0, max(1.0, float(np.max(st.u)))), cfg.grid)
    return {
        "lam": st.lam,
        "residual": st.residual_norm,
        "newton_iterations": st.newton_iterations,
        "max_u": float(np.max(st.u)),
        "min_u": float(np.min(st.u)),
        "mean_u": float(cfg.grid.integrate(st.u) / cfg.grid.length),
        "d_max_u": float(cfg.model.d * np.max(st.u)),
        "A0_passed": a0.passed,
    }


def cmd_branch(cfg, w, threads):
    origin = cfg.task.get("origin", "gamma0")
    if origin == "gamma0":
        eig = _eigen(cfg)
        coeffs = compute_coefficients(cfg.model, eig)
        rng = cfg.task.get("lambda_range")
        if rng is None:
            eps = cfg.task.get("epsilon_range")
            if eps is None:
                raise ConfigError("give lambda_range or epsilon_range", "task.lambda_range")
            rng = [eig.lambda1 * (1 + float(e)) for e in eps]
        steps = int(_task_number(cfg, "steps", 10, integer=True, minimum=1))
        br = continue_branch_gamma0(cfg.model, eig, coeffs, rng, steps=steps, tol=cfg.tol)
        theta = [amplitude_from_lambda(coeffs, s.lam) for s in br]
        ratio = [a / t for a, t in zip(br.amplitudes, theta)]
    elif origin == "fold":
        eig = _eigen(cfg)
        coeffs = compute_coefficients(cfg.model, eig)
        amps = [float(a) for a in cfg.task.get("amplitudes", [])]
        if not amps:
            raise ConfigError("required", "task.amplitudes")
        br = continue_branch_fold(cfg.model, eig, coeffs, amps, tol=cfg.tol)
        theta, ratio = [float("nan")] * len(br), [float("nan")] * len(br)
    elif origin == "gamma1":
        g1 = _gamma1_point(cfg)
        s_values = [float(s) for s in cfg.task.get("s_values", [-1e-2, -5e-3, 5e-3, 1e-2])]
        br = continue_branch_gamma1(cfg.model, g1, s_values, cfg.grid, tol=cfg.tol)
        theta, ratio = [float("nan")] * len(br), [float("nan")] * len(br)
    else:
        raise ConfigError(f"unknown origin {origin!r}", "task.origin")
    rows = [
        (s.lam, a, float(np.max(s.u)), float(np.min(s.u)), s.residual_norm, t, r)
        for s, a, t, r in zip(br.states, br.amplitudes, theta, ratio)
    ]
    w.csv("branch.csv", ["lam", "amplitude", "max_u", "min_u", "residual", "theta_predicted", "ratio"], rows)
    return {"origin": br.origin, "points": len(br), "lam": br.lams.tolist(), "amplitude": list(br.amplitudes), "ratio": ratio}


def cmd_coeffs(cfg, w, threads):
    eig = _eigen(cfg)
    c = compute_coefficients(cfg.model, eig)
    w.csv("sigma_correction.csv", ["x", "phi1", "sigma"], _field_rows(cfg.grid, eig.phi, c.sigma_field))
    out = c.as_dict()
    out["zero_eigenvalue"] = classify_zero_eigenvalue(c).value
    out["hopf_condition"] = hopf_condition(c)
    out["kappa_identity_defect"] = abs(c.kappa - (2 * c.kappa0 + 2 * c.kappa1 + c.kappa2))
    return out


def _u1_roots(cfg):
    bracket = cfg.task.get("bracket")
    if not (isinstance(bracket, list) and len(bracket) == 2):
        raise ConfigError("expected [a, b]", "task.bracket")
    roots = find_u1_all(cfg.model, bracket, n_scan=int(cfg.task.get("n_scan", 200)), grid=cfg.grid)
    if not roots:
        raise NoSignChange(f"no root of the balance function in {bracket}")
    return roots


def _gamma1_point(cfg):
    return analyze_gamma1(cfg.model, _u1_roots(cfg)[0], cfg.grid)


def cmd_gamma1(cfg, w, threads):
    roots = _u1_roots(cfg)
    points = []
    for u1 in roots:
        g1 = analyze_gamma1(cfg.model, u1, cfg.grid)
        d = g1.as_dict()
        try:
            d["stability_s_positive"] = classify_gamma1_stability(cfg.model, u1, 1.0, cfg.grid).value
            d["stability_s_negative"] = classify_gamma1_stability(cfg.model, u1, -1.0, cfg.grid).value
        except RegimeError as exc:
            d["stability_s_positive"] = d["stability_s_negative"] = None
            d["stability_note"] = str(exc)
        points.append((g1, d))
    w.csv("psi_star.csv", ["x"] + [f"psi_star_{i}" for i in range(len(points))], _field_rows(cfg.grid, *[p[0].psi_star for p in points]))
    return {"u1_roots": roots, "points": [p[1] for p in points]}


def _hopf_summary(cfg, eig, coeffs, lam):
    amp = amplitude_from_lambda(coeffs, lam)
    sigma = cfg.model.sigma
    label, count = classify_gamma0_stability(coeffs, lam, eig.lambda1, sigma)
    out = {"lambda1": eig.lambda1, "lam": lam, "amplitude": amp, "coefficients": coeffs.as_dict(), "sigma": sigma}
    out["stability"] = label.value
    out["predicted_unstable_count"] = count
    if hopf_condition(coeffs):
        out["hopf"] = crossing_data(coeffs, amp).as_dict()
    else:
        out["hopf"] = {"hopf_possible": False}
    return out


def cmd_hopf(cfg, w, threads):
    eig = _eigen(cfg)
    coeffs = compute_coefficients(cfg.model, eig)
    lam = _lam_from_task(cfg, eig)
    out = _hopf_summary(cfg, eig, coeffs, lam)
    if out["hopf"].get("hopf_possible"):
        h = out["hopf"]
        w.csv("sigma_ladder.csv", ["n", "sigma", "transversality"], [(n, s, t) for n, (s, t) in enumerate(zip(h["sigma_ladder"], h["transversality"]))])
    return out


def cmd_spectrum(cfg, w, threads):
    eig = _eigen(cfg)
    lam = _lam_from_task(cfg, eig)
    _, _, st = _gamma0_state(cfg, lam, eig)
    sigma = _task_number(cfg, "sigma", cfg.model.sigma, minimum=0.0)
    pair = assemble_linearization(cfg.model, st.u_star, lam)
    res = delayed_spectrum(pair, sigma, k=cfg.k)
    ev = res.all_eigenvalues()
    w.csv("eigenvalues.csv", ["index", "re", "im"], [(i, z.real, z.imag) for i, z in enumerate(ev)])
    return {"lam": lam, "sigma": sigma, "unstable_count": res.unstable_count, "rightmost": [res.rightmost.real, res.rightmost.imag]}


def _sweep_rows(results):
    return [(r.sigma, r.unstable_count, r.rightmost.real, abs(r.rightmost.imag)) for r in results]


def cmd_sweep_sigma(cfg, w, threads):
    eig = _eigen(cfg)
    coeffs = compute_coefficients(cfg.model, eig)
    lam = _lam_from_task(cfg, eig)
    _, _, st = _gamma0_state(cfg, lam, eig, coeffs)
    out = {"lam": lam, "lambda1": eig.lambda1, "d_max_u": float(cfg.model.d * np.max(st.u))}
    stop = None
    if hopf_condition(coeffs) and coeffs.rho * (lam - eig.lambda1) > 0:
        h = crossing_data(coeffs, amplitude_from_lambda(coeffs, lam))
        out["predicted_ladder"] = list(h.sigma_ladder)
        out["predicted_omega"] = h.omega
        stop = 1.3 * h.sigma_ladder[1]
    pair = assemble_linearization(cfg.model, st.u_star, lam)
    sigmas = _sigma_grid(cfg, stop)
    results, profile = _sweep(cfg, pair, sigmas)
    crossings = results[-1].crossings
    w.csv("sweep.csv", ["sigma", "unstable_count", "rightmost_re", "rightmost_im"], _sweep_rows(results))
    w.csv("crossings.csv", ["sigma", "omega", "dmu_dsigma_re", "dmu_dsigma_im"], [(c.sigma, c.omega, c.dmu_dsigma.real, c.dmu_dsigma.imag) for c in crossings])
    out["counts"] = [c for _, c in profile]
    out["crossings"] = _crossing_dicts(crossings)
    return out


def _simulate(cfg, model, st, eig, T, dt, perturbation, snapshot_times=()):
    u0 = st.u + perturbation * eig.phi
    return integrate(model, Field(cfg.grid, u0), T, dt=dt, lam=st.lam, u_star=st.u, audit=True, snapshot_times=snapshot_times)


def _trajectory_rows(tr, every):
    idx = range(0, len(tr.times), max(1, every))
    return [(tr.times[i], tr.mean[i], tr.max[i], *tr.probes[i]) for i in idx]


TRAJ_HEADER = ["t", "mean", "max", "u_x0", "u_mid", "u_xL"]


def cmd_simulate(cfg, w, threads):
    eig = _eigen(cfg)
    lam = _lam_from_task(cfg, eig)
    _, _, st = _gamma0_state(cfg, lam, eig)
    sigma = _task_number(cfg, "sigma", cfg.model.sigma, minimum=0.0)
    T = _task_number(cfg, "T", positive=True)
    dt = cfg.task.get("dt")
    dt = None if dt is None else _task_number(cfg, "dt", positive=True)
    pert = _task_number(cfg, "perturbation", 1e-3)
    snaps = [float(s) for s in cfg.task.get("snapshot_times", [])]
    model = cfg.model.replace(lam=lam, sigma=sigma)
    tr = _simulate(cfg, model, st, eig, T, dt, pert, snaps)
    every = int(_task_number(cfg, "sample_every", 10, integer=True, minimum=1))
    w.csv("trajectory.csv", TRAJ_HEADER, _trajectory_rows(tr, every))
    if snaps:
        keys = sorted(tr.snapshots)
        w.csv("snapshots.csv", ["x"] + [f"t={k!r}" for k in keys], _field_rows(cfg.grid, *[tr.snapshots[k] for k in keys]))
    out = {"lam": lam, "sigma": sigma, "T": T}
    out.update(tr.as_dict())
    return out


def _recipe_hopf_switch(cfg, w, threads):
    eig = _eigen(cfg)
    coeffs = compute_coefficients(cfg.model, eig)
    lam = eig.lambda1 * (1 + _task_number(cfg, "epsilon", 1.0))
    if not (hopf_condition(coeffs) and coeffs.rho * (lam - eig.lambda1) > 0):
        raise RegimeError("the configured model and lam do not satisfy the Hopf clause")
    _, _, st = _gamma0_state(cfg, lam, eig, coeffs)
    pair = assemble_linearization(cfg.model, st.u_star, lam)
    stop = _task_number(cfg, "sigma_max", 4.0, positive=True)
    sigmas = np.linspace(0.0, stop, int(_task_number(cfg, "num", 21, integer=True, minimum=3)))
    results, profile = _sweep(cfg, pair, sigmas)
    crossings = results[-1].crossings
    if not crossings:
        raise SolverError("no crossing found on the sigma grid; raise task.sigma_max")
    c0 = crossings[0]
    w.csv("sweep.csv", ["sigma", "unstable_count", "rightmost_re", "rightmost_im"], _sweep_rows(results))
    w.csv("crossings.csv", ["sigma", "omega", "dmu_dsigma_re", "dmu_dsigma_im"], [(c.sigma, c.omega, c.dmu_dsigma.real, c.dmu_dsigma.imag) for c in crossings])
    T = _task_number(cfg, "T", 1500.0, positive=True)
    pert = _task_number(cfg, "perturbation", 1e-3)
    factors = (0.9, 1.1)

    def run(f):
        return _simulate(cfg, cfg.model.replace(lam=lam, sigma=f * c0.sigma), st, eig, T, None, pert)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=min(threads, 2)) as ex:
            trajs = list(ex.map(run, factors))
    else:
        trajs = [run(f) for f in factors]
    every = int(_task_number(cfg, "sample_every", 10, integer=True, minimum=1))
    sims = []
    for f, tr, tag in zip(factors, trajs, ("below", "above")):
        w.csv(f"trajectory_{tag}.csv", TRAJ_HEADER, _trajectory_rows(tr, every))
        d = tr.as_dict()
        d.update({"sigma": f * c0.sigma, "factor": f})
        d["label"] = {"ConvergedToSteady": "Stable", "SustainedOscillation": "Oscillating"}.get(d["classification"], d["classification"])
        sims.append(d)
    period = trajs[1].period
    return {
        "lam": lam,
        "lambda1": eig.lambda1,
        "counts": [c for _, c in profile],
        "crossings": _crossing_dicts(crossings),
        "sigma_c": c0.sigma,
        "omega_c": c0.omega,
        "predicted_period": 2 * math.pi / c0.omega,
        "measured_period": period,
        "period_relative_error": None if period is None else abs(period * c0.omega / (2 * math.pi) - 1),
        "simulations": sims,
    }


def _recipe_no_hopf(cfg, w, threads):
    eig = _eigen(cfg)
    coeffs = compute_coefficients(cfg.model, eig)
    lam = eig.lambda1 * (1 + _task_number(cfg, "epsilon", 0.05))
    _, _, st = _gamma0_state(cfg, lam, eig, coeffs)
    pair = assemble_linearization(cfg.model, st.u_star, lam)
    stop = _task_number(cfg, "sigma_max", 50.0, positive=True)
    sigmas = np.linspace(0.0, stop, int(_task_number(cfg, "num", 21, integer=True, minimum=3)))
    results, profile = _sweep(cfg, pair, sigmas)
    w.csv("sweep.csv", ["sigma", "unstable_count", "rightmost_re", "rightmost_im"], _sweep_rows(results))
    counts = [c for _, c in profile]
    return {"lam": lam, "hopf_condition": hopf_condition(coeffs), "counts": counts, "constant": len(set(counts)) == 1, "crossings": _crossing_dicts(results[-1].crossings)}


def _recipe_gamma1(cfg, w, threads):
    g1 = _gamma1_point(cfg)
    s_values = [float(s) for s in cfg.task.get("s_values", [-1e-2, -5e-3, -2.5e-3, 2.5e-3, 5e-3, 1e-2])]
    br = continue_branch_gamma1(cfg.model, g1, s_values, cfg.grid, tol=cfg.tol)
    rows = []
    for s in br:
        mu = delay_free_spectrum(assemble_linearization(cfg.model, s.u_star, s.lam), k=4).rightmost
        rows.append((s.lam, mu.real, mu.imag, cfg.grid.length * mu.real / s.lam))
    w.csv("gamma1_branch.csv", ["s", "mu_re", "mu_im", "scaled_mu"], rows)
    return {"gamma1": g1.as_dict(), "points": [dict(zip(("s", "mu_re", "mu_im", "scaled_mu"), r)) for r in rows]}


_COMMANDS = {
    "eigen": cmd_eigen,
    "steady": cmd_steady,
    "branch": cmd_branch,
    "coeffs": cmd_coeffs,
    "gamma1": cmd_gamma1,
    "hopf": cmd_hopf,
    "spectrum": cmd_spectrum,
    "sweep-sigma": cmd_sweep_sigma,
    "simulate": cmd_simulate,
}
_RECIPES = {"hopf-switch": _recipe_hopf_switch, "no-hopf": _recipe_no_hopf, "gamma1": _recipe_gamma1}


def run(command: str, config_path: str, out_dir: str | None = None, threads: int = 1, recipe: str | None = None) -> dict:
    """Execute one command; raises ``MemdiffError`` subclasses on failure."""
    cfg = load_config(config_path, out_dir)
    if command == "reproduce":
        if recipe not in _RECIPES:
            raise ConfigError(f"unknown recipe {recipe!r}; choose from {list(RECIPES)}", "recipe")
        w = Writer(cfg, f"reproduce {recipe}")
        result = _RECIPES[recipe](cfg, w, threads)
    else:
        w = Writer(cfg, command)
        result = _COMMANDS[command](cfg, w, threads)
    return w.summary(result)


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, RegimeError):
        return EXIT_REGIME
    if isinstance(exc, SolverError):
        return EXIT_SOLVER
    if isinstance(exc, (ValueError, TypeError, KeyError)):
        return EXIT_CONFIG
    return EXIT_SOLVER


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="memdiff", description="Steady states, bifurcations and delay-induced oscillations of memory-diffusion models.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("recipe", nargs="?", help=f"recipe name for 'reproduce': {', '.join(RECIPES)}")
    p.add_argument("--config", required=True, help="JSON configuration file")
    p.add_argument("--out", default=None, help="output directory (overrides output.dir)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for independent runs")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.command != "reproduce" and args.recipe is not None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    if args.threads < 1:
        _report(ConfigError("must be >= 1", "--threads"))
        return EXIT_CONFIG
    try:
        doc = run(args.command, args.config, args.out, args.threads, args.recipe)
    except (MemdiffError, ValueError, TypeError, KeyError, np.linalg.LinAlgError) as exc:
        _report(exc)
        return exit_code_for(exc)
    print(json.dumps({"command": doc["command"], "result_hash": doc["result_hash"], "artifacts": doc["artifacts"]}, sort_keys=True))
    return EXIT_OK


def _report(exc):
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": exit_code_for(exc)}
    if getattr(exc, "path", None):
        err["path"] = exc.path
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")


if __name__ == "__main__":
    sys.exit(main())
