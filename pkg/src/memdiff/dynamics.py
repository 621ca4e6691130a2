"""Method-of-lines integration of the delayed memory-diffusion equation.

One step from ``t_n`` to ``t_{n+1}`` (linearly implicit, second order):

* diffusion by Crank-Nicolson;
* the boundary law ``d_n u = lam r g(u)`` linearised about ``u^n`` and
  imposed at the midpoint, so its stiff ``2/h`` corner terms are implicit;
* the memory flux ``d div(u grad u_sigma)``: the remembered field is known
  history and enters as the average of ``u(t_n - sigma)`` and
  ``u(t_{n+1} - sigma)``; the transported density ``u`` is Crank-Nicolson;
* the reaction ``lam u f`` by second-order Adams-Bashforth.

With ``sigma = 0`` the remembered field is the unknown itself; the transport
coefficient is then extrapolated and the gradient is Crank-Nicolson.  The
first step has no back value for the extrapolations and is taken as a
predictor-corrector pair.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
from scipy.signal import find_peaks

from .errors import ConfigError, HistoryUnderrun, StepUnstable
from .grid import Field, Grid1D
from .model import ModelSpec

__all__ = [
    "Classification",
    "HistoryBuffer",
    "Trajectory",
    "default_dt",
    "integrate",
    "mass_balance_check",
    "classify",
]

_gttrf, _gttrs = la.get_lapack_funcs(("gttrf", "gttrs"), dtype=np.float64)


class Classification(enum.Enum):
    ConvergedToSteady = "ConvergedToSteady"
    SustainedOscillation = "SustainedOscillation"
    Diverged = "Diverged"
    Undetermined = "Undetermined"


class HistoryBuffer:
    """Ring of snapshots covering ``[t - sigma, t]`` with linear interpolation.

    Before ``t = 0`` the history is the constant initial field.
    """

    def __init__(self, initial: np.ndarray, sigma: float, dt: float):
        self.sigma = float(sigma)
        self.dt = float(dt)
        self.size = int(math.ceil(sigma / dt)) + 3
        self.initial = np.array(initial, dtype=float)
        self.values = np.empty((self.size, len(initial)))
        self.count = 0  # snapshots pushed; snapshot k lives at time k * dt

    def push(self, u: np.ndarray):
        self.values[self.count % self.size] = u
        self.count += 1

    @property
    def t_last(self) -> float:
        return (self.count - 1) * self.dt

    def lookup(self, t: float) -> np.ndarray:
        if t <= 0:
            return self.initial
        s = t / self.dt
        k = int(math.floor(s + 1e-9))
        frac = s - k
        if frac < 1e-9:
            frac = 0.0
        oldest = self.count - self.size
        if k < max(oldest, 0) or k > self.count - 1 or (frac > 0 and k + 1 > self.count - 1):
            raise HistoryUnderrun(f"history lookup at t={t:.6g} outside the stored window")
        a = self.values[k % self.size]
        if frac == 0.0:
            return a
        return (1 - frac) * a + frac * self.values[(k + 1) % self.size]


@dataclass
class Trajectory:
    times: np.ndarray
    mean: np.ndarray
    max: np.ndarray
    probes: np.ndarray  # columns: x = 0, L/2, L
    probe_x: tuple
    final: Field
    classification: Classification = Classification.Undetermined
    period: float | None = None
    amplitude: float | None = None
    deviation: np.ndarray | None = None  # ||u(t) - u*||_inf when u* is known
    mass_defect: np.ndarray | None = None
    min_value: float = float("nan")
    dt: float = 0.0
    snapshots: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "classification": self.classification.value,
            "period": self.period,
            "amplitude": self.amplitude,
            "final_deviation": None if self.deviation is None else float(self.deviation[-1]),
            "min_value": self.min_value,
            "max_mass_defect": None if self.mass_defect is None else float(np.max(self.mass_defect, initial=0.0)),
            "dt": self.dt,
            "steps": len(self.times) - 1,
        }


def default_dt(model: ModelSpec, grid: Grid1D, T: float) -> float:
    """``min(sigma / 64, 0.05, T / 1000)``, then shrunk so that ``sigma / dt`` is an integer."""
    dt = min(0.05, 1e-3 * T)
    if model.sigma > 0:
        dt = min(dt, model.sigma / 64)
        dt = model.sigma / math.ceil(model.sigma / dt - 1e-9)
    return dt


def _lap_parts(grid):
    """Tridiagonal ``K0`` as (lower, diag, upper)."""
    n, h2 = grid.n_nodes, grid.h**2
    lo = np.full(n - 1, 1.0 / h2)
    up = np.full(n - 1, 1.0 / h2)
    up[0] = lo[-1] = 2.0 / h2
    return lo, np.full(n, -2.0 / h2), up


def _apply_tri(lo, dg, up, v):
    out = dg * v
    out[:-1] += up * v[1:]
    out[1:] += lo * v[:-1]
    return out


def _div_u_tri(w, h):
    """Tridiagonal of ``u -> div(u grad w)`` without boundary terms."""
    g = 0.5 * (w[1:] - w[:-1]) / (h * h)
    lo = np.empty_like(g)
    up = g.copy()
    dg = np.zeros_like(w)
    dg[:-1] += g
    dg[1:] -= g
    lo[:] = -g
    up[0] *= 2.0
    dg[0] *= 2.0
    dg[-1] *= 2.0
    lo[-1] *= 2.0
    return lo, dg, up


def _memory_tri(ubar, h):
    """Tridiagonal of ``w -> div(ubar grad w)`` without boundary terms."""
    face = 0.5 * (ubar[:-1] + ubar[1:]) / (h * h)
    up = face.copy()
    lo = face.copy()
    up[0] *= 2.0
    lo[-1] *= 2.0
    dg = np.zeros_like(ubar)
    dg[:-1] -= up
    dg[1:] -= lo
    return lo, dg, up


def integrate(
    model: ModelSpec,
    history_init,
    T: float,
    dt: float | None = None,
    lam: float | None = None,
    u_star=None,
    audit: bool = False,
    snapshot_times=(),
    max_value: float = 1e6,
) -> Trajectory:
    """Integrate from the constant history ``u = history_init`` on ``[-sigma, 0]``."""
    if not isinstance(history_init, Field):
        raise TypeError("history_init must be a Field")
    grid = history_init.grid
    lam = model.lam if lam is None else float(lam)
    sigma = model.sigma
    if dt is None:
        dt = default_dt(model, grid, T)
    if not dt > 0 or not T > 0:
        raise ConfigError("dt and T must be positive", "task.dt")
    if 0 < sigma < dt * (1 - 1e-9):
        raise ConfigError(f"dt={dt} exceeds the delay sigma={sigma}", "task.dt")
    nsteps = int(round(T / dt))
    h, x, wq = grid.h, grid.x, grid.weights
    d = model.d
    L = grid.length

    u = np.array(history_init.values, dtype=float)
    hist = HistoryBuffer(u, sigma, dt) if sigma > 0 else None
    if hist is not None:
        hist.push(u)
    lo, dg, up = _lap_parts(grid)

    def reaction(v):
        return lam * v * model.f(x, v)

    def budget(v, wv):
        q0, q1 = model.boundary_flux(v[0], v[-1], lam)
        out = q0 + q1 + lam * (wq @ (v * model.f(x, v)))
        if d:
            qw0, qw1 = model.boundary_flux(wv[0], wv[-1], lam)
            out += d * (v[0] * qw0 + v[-1] * qw1)
        return out

    probe_idx = (0, grid.n_cells // 2, grid.n_cells)
    times = np.arange(nsteps + 1) * dt
    mean = np.empty(nsteps + 1)
    umax = np.empty(nsteps + 1)
    probes = np.empty((nsteps + 1, 3))
    dev = np.empty(nsteps + 1) if u_star is not None else None
    ustar = None if u_star is None else np.asarray(u_star)
    defect = np.zeros(nsteps) if audit else None
    snaps = {}
    snap_steps = {int(round(s / dt)): s for s in snapshot_times}
    umin = float(np.min(u))

    def record(k, v):
        mean[k] = (wq @ v) / L
        umax[k] = np.max(v)
        probes[k] = v[list(probe_idx)]
        if dev is not None:
            dev[k] = np.max(np.abs(v - ustar))
        if k in snap_steps:
            snaps[snap_steps[k]] = v.copy()

    record(0, u)
    E_prev = reaction(u)
    u_prev = u.copy()
    w_now = u if sigma == 0 else hist.lookup(-sigma)
    B_now = budget(u, w_now) if audit else 0.0
    r = np.array([model.r0, model.r1])
    def step(t0, tau, u, c, ubar, w0, theta=0.5):
        """One theta-step of length ``tau`` from ``t0``; returns ``(u_new, w(t0 + tau - sigma))``."""
        ends = np.array([u[0], u[-1]])
        q = lam * r * model.g(ends)
        dq = lam * r * model.g_u(ends)
        # G collects everything weighted by theta; c is the explicit remainder
        g_lo, g_dg, g_up = lo, dg.copy(), up
        g_dg[0] += 2 * dq[0] / h
        g_dg[-1] += 2 * dq[1] / h
        c = c.copy()
        qc = q - dq * ends  # boundary law linearised about u^n
        w1 = None
        if d != 0 and sigma > 0:
            w1 = hist.lookup(t0 + tau - sigma)
            wbar = (1 - theta) * w0 + theta * w1
            qa = model.boundary_flux(w0[0], w0[-1], lam)
            qb = model.boundary_flux(w1[0], w1[-1], lam)
            m_lo, m_dg, m_up = _div_u_tri(wbar, h)
            m_dg[0] += 2 * ((1 - theta) * qa[0] + theta * qb[0]) / h
            m_dg[-1] += 2 * ((1 - theta) * qa[1] + theta * qb[1]) / h
            g_lo, g_dg, g_up = g_lo + d * m_lo, g_dg + d * m_dg, g_up + d * m_up
        elif d != 0:
            m_lo, m_dg, m_up = _memory_tri(ubar, h)
            m_dg[0] += 2 * ubar[0] * dq[0] / h
            m_dg[-1] += 2 * ubar[-1] * dq[1] / h
            g_lo, g_dg, g_up = g_lo + d * m_lo, g_dg + d * m_dg, g_up + d * m_up
            qc = qc * (1 + d * np.array([ubar[0], ubar[-1]]))
        c[0] += 2 * qc[0] / h
        c[-1] += 2 * qc[1] / h
        rhs = u + (1 - theta) * tau * _apply_tri(g_lo, g_dg, g_up, u) + tau * c
        a = theta * tau
        dl, dd, du, du2, ipiv, info = _gttrf(-a * g_lo, 1 - a * g_dg, -a * g_up)
        u_new, info2 = _gttrs(dl, dd, du, du2, ipiv, rhs)
        if info or info2 or not np.all(np.isfinite(u_new)):
            raise StepUnstable(f"non-finite state at t={t0 + tau:.6g}; reduce dt")
        if np.max(np.abs(u_new)) > max_value:
            raise StepUnstable(f"|u| exceeded {max_value:g} at t={t0 + tau:.6g}; reduce dt")
        return u_new, w1

    for n in range(nsteps):
        E_now = reaction(u)
        if n == 0:
            # no back value for the extrapolation yet: Heun-type predictor/corrector
            u_pred, _ = step(0.0, dt, u, E_now, u, w_now)
            u_new, w1 = step(0.0, dt, u, 0.5 * (E_now + reaction(u_pred)), 0.5 * (u + u_pred), w_now)
        else:
            u_new, w1 = step(n * dt, dt, u, 1.5 * E_now - 0.5 * E_prev, 1.5 * u - 0.5 * u_prev, w_now)
        if w1 is not None:
            w_now = w1
        if audit:
            w_next = u_new if sigma == 0 else w_now
            B_next = budget(u_new, w_next)
            defect[n] = abs((wq @ u_new - wq @ u) / dt - 0.5 * (B_now + B_next))
            B_now = B_next
        u_prev, u, E_prev = u, u_new, E_now
        if hist is not None:
            hist.push(u)
        umin = min(umin, float(np.min(u)))
        record(n + 1, u)
    traj = Trajectory(
        times, mean, umax, probes, tuple(float(x[i]) for i in probe_idx), Field(grid, u.copy()),
        deviation=dev, mass_defect=defect, min_value=umin, dt=dt, snapshots=snaps,
    )
    classify(traj)
    return traj


def classify(traj: Trajectory, window: float = 0.4, n_peaks: int = 5, variation: float = 0.05, tol: float = 1e-5) -> Trajectory:
    """Label the final ``window`` fraction of the run (in place; also returned)."""
    n = len(traj.times)
    start = int((1 - window) * (n - 1))
    t = traj.times[start:]
    p = traj.probes[start:, 1]
    if not np.all(np.isfinite(traj.probes)):
        traj.classification = Classification.Diverged
        return traj
    span = float(np.max(p) - np.min(p))
    scale = max(float(np.max(np.abs(p))), 1e-300)
    traj.classification = Classification.Undetermined
    if span > 1e-8 * scale:
        peaks, _ = find_peaks(p)
        troughs, _ = find_peaks(-p)
        if len(peaks) >= 2:
            traj.period = float(np.mean(np.diff(t[peaks])))
        amps = []
        for k in peaks:
            after = troughs[troughs > k]
            if len(after):
                amps.append(p[k] - p[after[0]])
        amps = np.array(amps)
        if len(amps):
            traj.amplitude = float(np.mean(amps[-n_peaks:]))
        if len(amps) >= n_peaks:
            for i in range(len(amps) - n_peaks + 1):
                run = amps[i : i + n_peaks]
                if run.min() > 0 and run.max() / run.min() - 1 < variation and run.min() > 1e-6 * scale:
                    traj.classification = Classification.SustainedOscillation
                    return traj
    if traj.deviation is not None:
        dev = traj.deviation[start:]
    else:
        final = traj.probes[-1]
        dev = np.max(np.abs(traj.probes[start:] - final), axis=1)
    half = len(dev) // 2
    decreasing = np.max(dev[half:]) <= np.max(dev[:half]) if half > 0 else True
    if dev[-1] < tol and decreasing:
        traj.classification = Classification.ConvergedToSteady
    # period and amplitude are reported for oscillating runs only
    traj.period = traj.amplitude = None
    return traj


def mass_balance_check(traj: Trajectory) -> float:
    """Largest per-step defect of the integral budget (requires ``audit=True``)."""
    if traj.mass_defect is None:
        raise ValueError("run the integrator with audit=True")
    return float(np.max(traj.mass_defect, initial=0.0))
