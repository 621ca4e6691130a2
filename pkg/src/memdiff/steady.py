"""Steady states of the memory-diffusion model and their continuation.

The discrete residual at node ``i`` is

    R(u)_i = lap(u; q)_i + d * div(u grad u; q)_i + lam * u_i f(x_i, u_i)

with the boundary law ``q = lam r g(u)`` (outward normal derivative) fed
into both the Laplacian and the memory flux through their half cells.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import EmptyBranch, NegativeSolution, NewtonDiverged
from .grid import Field, Grid1D
from .model import ModelSpec

log = logging.getLogger(__name__)

__all__ = [
    "SteadyState",
    "Branch",
    "residual",
    "jacobian",
    "scaled_residual",
    "solve_steady",
    "solve_steady_amplitude",
    "continue_branch_gamma0",
    "continue_branch_fold",
    "continue_branch_gamma1",
]


def residual(model: ModelSpec, lam: float, u, grid: Grid1D) -> np.ndarray:
    u = np.asarray(u)
    q0, q1 = model.boundary_flux(u[0], u[-1], lam)
    R = grid.neumann_laplacian @ u + grid.lift(q0, q1)
    if model.d != 0:
        R = R + model.d * (grid.div_matrix_w(u) @ u + grid.lift(u[0] * q0, u[-1] * q1))
    return R + lam * u * model.f(grid.x, u)


def jacobian(model: ModelSpec, lam: float, u, grid: Grid1D) -> sp.csr_matrix:
    u = np.asarray(u)
    x = grid.x
    dq0 = lam * model.r0 * model.g_u(u[0])
    dq1 = lam * model.r1 * model.g_u(u[-1])
    corner = np.zeros(grid.n_nodes)
    corner[0], corner[-1] = dq0, dq1
    J = grid.neumann_laplacian + sp.diags(2.0 / grid.h * corner)
    J = J + sp.diags(lam * (model.f(x, u) + u * model.f_u(x, u)))
    if model.d != 0:
        q0, q1 = model.boundary_flux(u[0], u[-1], lam)
        bd = np.zeros(grid.n_nodes)
        bd[0] = q0 + u[0] * dq0
        bd[-1] = q1 + u[-1] * dq1
        J = J + model.d * (grid.div_matrix_w(u) + grid.div_matrix_u(u) + sp.diags(2.0 / grid.h * bd))
    return sp.csr_matrix(J)


def scaled_residual(R, grid: Grid1D) -> float:
    """Max-norm of the quadrature-weighted residual (a flux-balance defect)."""
    return float(np.max(np.abs(grid.weights * R)))


@dataclass(frozen=True)
class SteadyState:
    u_star: Field
    lam: float
    residual_norm: float
    newton_iterations: int

    @property
    def grid(self) -> Grid1D:
        return self.u_star.grid

    @property
    def u(self) -> np.ndarray:
        return self.u_star.values


@dataclass(frozen=True)
class Branch:
    states: list
    origin: str  # "Gamma0", "GammaU1" or "Fold"
    amplitudes: list = field(default_factory=list)

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __getitem__(self, i):
        return self.states[i]

    @property
    def lams(self) -> np.ndarray:
        return np.array([s.lam for s in self.states])


def solve_steady(
    model: ModelSpec,
    lam: float,
    guess,
    grid: Grid1D | None = None,
    tol: float = 1e-10,
    max_iter: int = 50,
    positive: bool = False,
    min_step: float = 1e-4,
) -> SteadyState:
    """Damped Newton for ``R(u) = 0`` at fixed ``lam``.

    Backtracks by halving until the residual norm decreases (Armijo with a
    small sufficient-decrease constant), refusing steps below ``min_step``.
    """
    if grid is None:
        grid = guess.grid
    u = np.array(guess, dtype=float)
    if not np.all(np.isfinite(u)):
        raise NewtonDiverged("non-finite initial guess")
    R = residual(model, lam, u, grid)
    res = scaled_residual(R, grid)
    it = 0
    while res > tol:
        if it >= max_iter:
            raise NewtonDiverged(f"no convergence after {max_iter} iterations (residual {res:.3e})")
        J = jacobian(model, lam, u, grid)
        du = spla.spsolve(sp.csc_matrix(J), -R)
        if not np.all(np.isfinite(du)):
            raise NewtonDiverged("singular Jacobian")
        t = 1.0
        while True:
            trial = u + t * du
            R_t = residual(model, lam, trial, grid)
            res_t = scaled_residual(R_t, grid)
            if np.isfinite(res_t) and res_t <= (1 - 1e-4 * t) * res:
                break
            t *= 0.5
            if t < min_step:
                # a full step may still be the right move at round-off level
                if res < 1e3 * tol:
                    trial, R_t, res_t = u + du, residual(model, lam, u + du, grid), None
                    res_t = scaled_residual(R_t, grid)
                    break
                raise NewtonDiverged(f"line search stalled at residual {res:.3e}")
        u, R, res = trial, R_t, res_t
        it += 1
        if res > 1e12:
            raise NewtonDiverged("residual blew up")
    if positive and np.any(u < 0):
        raise NegativeSolution(f"min u = {u.min():.3e} on a branch flagged positive")
    return SteadyState(Field(grid, u), float(lam), res, it)


def solve_steady_amplitude(
    model: ModelSpec,
    amplitude: float,
    direction,
    guess,
    lam_guess: float,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> SteadyState:
    """Solve for ``(u, lam)`` with the side condition ``<u, direction> = amplitude``.

    Used to pass through folds, where ``lam`` is not a good parameter.
    """
    grid = guess.grid
    phi = np.asarray(direction)
    wphi = grid.weights * phi
    u = np.array(guess, dtype=float)
    lam = float(lam_guess)
    n = grid.n_nodes
    for it in range(max_iter + 1):
        R = residual(model, lam, u, grid)
        c = wphi @ u - amplitude
        res = max(scaled_residual(R, grid), abs(c))
        if res <= tol:
            return SteadyState(Field(grid, u), lam, scaled_residual(R, grid), it)
        eps = 1e-7 * max(1.0, abs(lam))
        dR = (residual(model, lam + eps, u, grid) - residual(model, lam - eps, u, grid)) / (2 * eps)
        J = sp.bmat(
            [[jacobian(model, lam, u, grid), sp.csr_matrix(dR.reshape(-1, 1))], [sp.csr_matrix(wphi.reshape(1, -1)), None]],
            format="csc",
        )
        step = spla.spsolve(J, -np.concatenate([R, [c]]))
        if not np.all(np.isfinite(step)):
            raise NewtonDiverged("singular bordered Jacobian")
        u = u + step[:n]
        lam = lam + step[n]
    raise NewtonDiverged(f"amplitude-constrained Newton failed (residual {res:.3e})")


def _amplitude(grid, u, phi):
    return float(grid.inner(u, phi))


def continue_branch_gamma0(model: ModelSpec, eig, coeffs, lambda_range, steps: int = 10, tol: float = 1e-10) -> Branch:
    """Natural-parameter continuation of the positive branch born at ``lam1``.

    ``lambda_range = (lam_start, lam_end)`` must lie on one side of ``lam1``;
    points are solved from the end closest to ``lam1`` outward.  The first
    predictor is ``theta * phi1`` with ``theta = 2 rho (lam1 - lam) / kappa``;
    later predictors extrapolate the last two solutions.
    """
    lam1 = eig.lambda1
    grid = eig.grid
    phi = eig.phi
    lo, hi = sorted(map(float, lambda_range))
    lams = np.linspace(lo, hi, steps) if steps > 1 else np.array([lo])
    if lo < lam1 < hi or lam1 in (lo, hi):
        raise EmptyBranch("lambda_range must not contain lam1")
    lams = lams[np.argsort(np.abs(lams - lam1))]
    predicted = 2.0 * coeffs.rho * (lam1 - lams[0]) / coeffs.kappa
    if predicted <= 0:
        raise EmptyBranch(
            f"no positive branch on this side of lam1 (rho*kappa*(lam1-lam) sign gives theta={predicted:.3g})"
        )
    states, amps = [], []
    for k, lam in enumerate(lams):
        if k == 0:
            theta = 2.0 * coeffs.rho * (lam1 - lam) / coeffs.kappa
            guess = theta * phi
            if coeffs.sigma_field is not None:
                guess = guess + 0.5 * theta**2 * np.asarray(coeffs.sigma_field)
        elif k == 1:
            prev = states[-1]
            guess = prev.u * (lam1 - lam) / (lam1 - prev.lam)
        else:
            a, b = states[-2], states[-1]
            t = (lam - b.lam) / (b.lam - a.lam)
            guess = b.u + t * (b.u - a.u)
        try:
            st = solve_steady(model, lam, Field(grid, guess), tol=tol, positive=True)
        except (NewtonDiverged, NegativeSolution) as exc:
            if not states:
                raise
            log.info("gamma0 branch stops at lam=%.6g: %s", lam, exc)
            break
        if _amplitude(grid, st.u, phi) <= 0 or np.max(st.u) < 1e-14:
            if not states:
                raise EmptyBranch(f"corrector fell onto the trivial solution at lam={lam:.6g}")
            break
        states.append(st)
        amps.append(_amplitude(grid, st.u, phi))
    order = np.argsort([s.lam for s in states])
    return Branch([states[i] for i in order], "Gamma0", [amps[i] for i in order])


def continue_branch_fold(model: ModelSpec, eig, coeffs, amplitudes, tol: float = 1e-10) -> Branch:
    """Sweep the amplitude ``<u, phi1>`` through the saddle-node when ``kappa = 0``.

    The reduced equation gives ``lam ~ lam1 - nu theta^2 / (6 rho)``.
    """
    grid, phi, lam1 = eig.grid, eig.phi, eig.lambda1
    states, amps = [], []
    for theta in sorted(amplitudes, key=abs):
        lam_guess = lam1 - coeffs.nu * theta**2 / (6.0 * coeffs.rho)
        guess = states[-1].u * theta / amps[-1] if states else theta * phi
        st = solve_steady_amplitude(model, theta, phi, Field(grid, guess), lam_guess if not states else states[-1].lam, tol=tol)
        states.append(st)
        amps.append(theta)
    return Branch(states, "Fold", amps)


def continue_branch_gamma1(model: ModelSpec, g1, s_values, grid: Grid1D | None = None, tol: float = 1e-10) -> Branch:
    """Branch through ``(u1, 0)``, parametrised by ``lam = s``.

    The predictor uses the full tangent ``u1 + s (eta1 + psi*)``.
    """
    grid = grid or g1.psi_star.grid
    psi = np.asarray(g1.psi_star)
    states = []
    for s in sorted(s_values, key=abs):
        guess = g1.u1 + s * (g1.eta1 + psi)
        if s == 0:
            u = np.full(grid.n_nodes, g1.u1)
            R = residual(model, 0.0, u, grid)
            states.append(SteadyState(Field(grid, u), 0.0, scaled_residual(R, grid), 0))
            continue
        states.append(solve_steady(model, s, Field(grid, guess), tol=tol))
    order = np.argsort([st.lam for st in states])
    states = [states[i] for i in order]
    return Branch(states, "GammaU1", [float(grid.integrate(st.u) / grid.length) for st in states])
