"""Bifurcation from the line of constant steady states at ``lam = 0``.

At ``lam = 0`` every constant ``u1`` is a steady state.  The linearisation
there is ``v -> ((1 + d u1) lap v, d_n v)``, whose range is the kernel of

    <l, y> = int y1 dx - (1 + d u1) (y2[0] + y2[1]),

and whose kernel is the constants.  A second branch crosses ``(u1, 0)`` when
``lam u f`` and the boundary law are in that range (the balance ``Phi(u1) =
0`` below) and the resulting crossing is nondegenerate (``xi* != 0``).
All integrals use the trapezoid weights, for which these identities hold
exactly on the discrete operators.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .errors import A2Violated, NoSignChange, PreconditionViolated, SolvabilityViolated
from .grid import Field, Grid1D, memory_flux_divergence
from .model import ModelSpec

__all__ = [
    "Gamma1Data",
    "Gamma1Stability",
    "balance",
    "find_u1",
    "find_u1_all",
    "solve_psi_star",
    "psi_star_residual",
    "compute_eta1",
    "pairing_lambda_u",
    "classify_gamma1_stability",
    "analyze_gamma1",
]


class Gamma1Stability(enum.Enum):
    Stable = "Stable"
    Unstable = "Unstable"


@dataclass(frozen=True)
class Gamma1Data:
    u1: float
    psi_star: Field
    zeta_star: float
    xi_star: float
    eta1: float
    A1_residual: float
    A2_value: float
    stability_sign: int
    pairing: float  # <l, T_lam_u(u1, 0)[1]>

    def as_dict(self) -> dict:
        return {
            "u1": self.u1,
            "zeta_star": self.zeta_star,
            "xi_star": self.xi_star,
            "eta1": self.eta1,
            "A1_residual": self.A1_residual,
            "A2_value": self.A2_value,
            "stability_sign": self.stability_sign,
            "pairing": self.pairing,
        }


def _grid(model: ModelSpec, grid: Grid1D | None) -> Grid1D:
    return grid if grid is not None else Grid1D(model.params.get("length", 1.0), 256)


def balance(model: ModelSpec, u1: float, grid: Grid1D | None = None) -> float:
    """``Phi(u1) = u1 int f(x, u1) dx + (1 + d u1) g(u1) (r0 + r1)``."""
    grid = _grid(model, grid)
    u1 = float(u1)
    fx = model.f(grid.x, np.full(grid.n_nodes, u1))
    return float(u1 * grid.integrate(fx) + (1 + model.d * u1) * model.g(u1) * model.r_sum)


def find_u1(model: ModelSpec, bracket, grid: Grid1D | None = None, xtol: float = 1e-14) -> float:
    """Root of ``Phi`` in ``bracket`` (Brent's bracketing method)."""
    a, b = map(float, bracket)
    fa, fb = balance(model, a, grid), balance(model, b, grid)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if np.sign(fa) == np.sign(fb) or not (np.isfinite(fa) and np.isfinite(fb)):
        raise NoSignChange(f"Phi({a:g}) = {fa:.3e} and Phi({b:g}) = {fb:.3e} have the same sign")
    return float(brentq(lambda u: balance(model, u, grid), a, b, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200))


def find_u1_all(model: ModelSpec, interval, n_scan: int = 200, grid: Grid1D | None = None) -> list:
    """Every sign change of ``Phi`` on a uniform scan of ``interval``, refined."""
    a, b = map(float, interval)
    us = np.linspace(a, b, n_scan + 1)
    vals = np.array([balance(model, u, grid) for u in us])
    roots = []
    for i in range(n_scan):
        if vals[i] == 0:
            roots.append(float(us[i]))
        elif vals[i] * vals[i + 1] < 0:
            roots.append(find_u1(model, (us[i], us[i + 1]), grid))
    if vals[-1] == 0:
        roots.append(float(us[-1]))
    return roots


def _psi_rhs(model, u1, grid):
    """``(source, q)`` with ``(1 + d u1)(K0 v + lift(q)) = source``."""
    source = -u1 * model.f(grid.x, np.full(grid.n_nodes, u1))
    q = model.g(u1) * np.array([model.r0, model.r1])
    return source, q


def psi_star_residual(model: ModelSpec, u1: float, psi) -> float:
    """Max-norm of the weighted residual of the ``psi*`` problem."""
    grid = psi.grid
    source, q = _psi_rhs(model, u1, grid)
    c = 1 + model.d * u1
    R = c * (grid.neumann_laplacian @ np.asarray(psi) + grid.lift(q[0], q[1])) - source
    return float(np.max(np.abs(grid.weights * R)))


def solve_psi_star(model: ModelSpec, u1: float, grid: Grid1D | None = None, tol: float = 1e-8) -> Field:
    """Zero-mean solution of ``(1 + d u1) lap v + u1 f(x, u1) = 0``, ``d_n v = r g(u1)``."""
    grid = _grid(model, grid)
    phi = balance(model, u1, grid)
    if abs(phi) > tol:
        raise SolvabilityViolated(f"balance residual {phi:.3e} exceeds {tol:g}; u1 is not a crossing point")
    source, q = _psi_rhs(model, u1, grid)
    c = 1 + model.d * u1
    n = grid.n_nodes
    ones = sp.csr_matrix(np.ones((n, 1)))
    M = sp.bmat([[c * grid.neumann_laplacian, ones], [sp.csr_matrix(grid.weights.reshape(1, -1)), None]], format="csc")
    rhs = np.concatenate([source - c * grid.lift(q[0], q[1]), [0.0]])
    sol = spla.spsolve(M, rhs)
    psi = sol[:n]
    psi = psi - grid.integrate(psi) / grid.length
    return Field(grid, psi)


def compute_eta1(model: ModelSpec, u1: float, psi_star, tol: float = 1e-10):
    """``(zeta*, xi*, eta1, A2_value)``; ``eta1 = -zeta*/xi*``."""
    grid = psi_star.grid
    psi = np.asarray(psi_star)
    d, c = model.d, 1 + model.d * u1
    const = np.full(grid.n_nodes, float(u1))
    fx, fux = model.f(grid.x, const), model.f_u(grid.x, const)
    gu = float(model.g_u(np.array(float(u1))))
    q = model.g(u1) * np.array([model.r0, model.r1])
    r = np.array([model.r0, model.r1])
    ends = np.array([psi[0], psi[-1]])
    zeta = grid.integrate(fx * psi) + u1 * grid.integrate(fux * psi) + c * gu * (r @ ends)
    xi = grid.integrate(fx) + u1 * grid.integrate(fux) + c * gu * r.sum()
    if d != 0:
        zeta += d * grid.integrate(memory_flux_divergence(psi, psi, q[0], q[1], grid=grid))
        xi += d * grid.integrate(grid.neumann_laplacian @ psi + grid.lift(q[0], q[1]))
    zeta, xi = float(zeta), float(xi)
    scale = 1.0 + abs(grid.integrate(np.abs(fx))) + u1 * abs(grid.integrate(np.abs(fux))) + c * abs(gu) * np.abs(r).sum()
    if abs(xi) <= tol * scale:
        raise A2Violated(f"xi* = {xi:.3e} vanishes; the crossing at u1 = {u1:g} is degenerate")
    return zeta, xi, -zeta / xi, xi


def pairing_lambda_u(model: ModelSpec, u1: float, grid: Grid1D | None = None) -> float:
    """``<l, T_lam_u(u1, 0)[1]> = int f + u1 int f_u + (1 + d u1) g_u(u1) (r0 + r1)``."""
    grid = _grid(model, grid)
    const = np.full(grid.n_nodes, float(u1))
    gu = float(model.g_u(np.array(float(u1))))
    return float(
        grid.integrate(model.f(grid.x, const))
        + u1 * grid.integrate(model.f_u(grid.x, const))
        + (1 + model.d * u1) * gu * model.r_sum
    )


def _check_precondition(model, u1, pairing, tol):
    # <l, T_uu(u1, 0)[1, psi*]> = d int lap psi* = d g(u1) (r0 + r1)
    cross = model.d * float(model.g(u1)) * model.r_sum
    if abs(cross) > tol * (1.0 + abs(pairing)):
        raise PreconditionViolated(
            f"d g(u1)(r0 + r1) = {cross:.3e} is nonzero; the sign rule for the branch does not apply"
        )


def classify_gamma1_stability(model: ModelSpec, u1: float, s: float, grid: Grid1D | None = None, tol: float = 1e-10) -> Gamma1Stability:
    """Delay-free stability of the branch point ``u01(s)`` for small ``|s|``.

    Stable iff ``s * <l, T_lam_u(u1, 0)[1]> < 0``.
    """
    pairing = pairing_lambda_u(model, u1, grid)
    _check_precondition(model, u1, pairing, tol)
    if s == 0 or pairing == 0:
        raise PreconditionViolated("s and the pairing must both be nonzero")
    return Gamma1Stability.Stable if s * pairing < 0 else Gamma1Stability.Unstable


def analyze_gamma1(model: ModelSpec, u1: float, grid: Grid1D | None = None) -> Gamma1Data:
    """Everything needed to describe and continue the branch through ``(u1, 0)``."""
    grid = _grid(model, grid)
    a1 = balance(model, u1, grid)
    psi = solve_psi_star(model, u1, grid)
    zeta, xi, eta1, a2 = compute_eta1(model, u1, psi)
    pairing = pairing_lambda_u(model, u1, grid)
    return Gamma1Data(float(u1), psi, zeta, xi, eta1, a1, a2, int(np.sign(pairing)), pairing)
