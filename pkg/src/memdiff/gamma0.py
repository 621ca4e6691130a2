"""Bifurcation coefficients of the branch leaving the zero solution at ``lam1``.

The linearisation and its derivatives are written on pairs ``(y1, y2)``:
``y1`` is the interior residual and ``y2`` the boundary residual
``d_n v - lam r g(v)`` at the two endpoints.  The normal derivative ``q``
of every field is carried alongside it, so the memory flux at the boundary
uses the same ``q`` the boundary law assigns.  The range of the
linearisation is the kernel of the functional

    <Psi, y> = int phi1 y1 dx - phi1(0) y2[0] - phi1(L) y2[1],

which is exact for the discrete operators as well.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .eigen import EigenPair
from .errors import Indeterminate, SingularBorderedSystem
from .grid import Field, Grid1D, memory_flux_divergence
from .model import ModelSpec

__all__ = [
    "BifCoefficients",
    "ZeroEigenvalue",
    "psi_pairing",
    "apply_linearization",
    "second_derivative",
    "compute_rho_kappa",
    "solve_sigma_correction",
    "compute_nu",
    "compute_coefficients",
    "classify_zero_eigenvalue",
]


class ZeroEigenvalue(enum.Enum):
    NoZeroEig = "NoZeroEig"
    ZeroEig = "ZeroEig"


@dataclass(frozen=True)
class BifCoefficients:
    rho: float
    kappa0: float
    kappa1: float
    kappa2: float
    kappa: float
    nu: float | None = None
    sigma_field: Field | None = None
    lambda1: float | None = None
    kappa_projected: float | None = None  # <Psi, T_uu[phi1, phi1]>
    tuu_norm: float | None = None

    @property
    def scale(self) -> float:
        return 1.0 + abs(self.kappa0) + abs(self.kappa1) + abs(self.kappa2)

    def as_dict(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "rho": self.rho,
            "kappa0": self.kappa0,
            "kappa1": self.kappa1,
            "kappa2": self.kappa2,
            "kappa": self.kappa,
            "nu": self.nu,
            "kappa_projected": self.kappa_projected,
        }


def psi_pairing(grid: Grid1D, phi, y1, y2) -> float:
    phi = np.asarray(phi)
    return float(grid.inner(phi, y1) - phi[0] * y2[0] - phi[-1] * y2[1])


def _boundary_q(model: ModelSpec, lam1: float, v) -> np.ndarray:
    """Normal derivative of a kernel-like field under the linearised law."""
    gu0 = float(model.g_u(np.array(0.0)))
    return lam1 * gu0 * np.array([model.r0 * v[0], model.r1 * v[-1]])


def apply_linearization(model: ModelSpec, lam1: float, grid: Grid1D, v, q):
    """``L (v, q)`` at the zero solution; returns ``(y1, y2)``."""
    v = np.asarray(v)
    f0 = model.f(grid.x, np.zeros(grid.n_nodes))
    y1 = grid.neumann_laplacian @ v + grid.lift(q[0], q[1], dtype=v.dtype) + lam1 * f0 * v
    y2 = np.asarray(q) - _boundary_q(model, lam1, v)
    return y1, y2


def second_derivative(model: ModelSpec, lam1: float, grid: Grid1D, a, qa, b, qb):
    """Symmetric ``T_uu[a, b]`` at ``(0, lam1)``; returns ``(y1, y2)``."""
    a, b = np.asarray(a), np.asarray(b)
    zero = np.zeros(grid.n_nodes)
    fu0 = model.f_u(grid.x, zero)
    guu0 = float(model.g_uu(np.array(0.0)))
    y1 = 2.0 * lam1 * fu0 * a * b
    if model.d != 0:
        y1 = y1 + model.d * (
            np.asarray(memory_flux_divergence(a, b, qb[0], qb[1], grid=grid))
            + np.asarray(memory_flux_divergence(b, a, qa[0], qa[1], grid=grid))
        )
    y2 = -lam1 * guu0 * np.array([model.r0 * a[0] * b[0], model.r1 * a[-1] * b[-1]])
    return y1, y2


def compute_rho_kappa(model: ModelSpec, eig: EigenPair):
    """``(rho, kappa0, kappa1, kappa2, kappa)`` from their quadrature formulas."""
    grid, phi, lam1 = eig.grid, eig.phi, eig.lambda1
    zero = np.zeros(grid.n_nodes)
    gu0 = float(model.g_u(np.array(0.0)))
    guu0 = float(model.g_uu(np.array(0.0)))
    rho = grid.inner(phi**2, model.f(grid.x, zero)) + gu0 * (model.r0 * phi[0] ** 2 + model.r1 * phi[-1] ** 2)
    if model.d != 0:
        q = _boundary_q(model, lam1, phi)
        kappa0 = model.d * grid.inner(phi, memory_flux_divergence(phi, phi, q[0], q[1], grid=grid))
    else:
        kappa0 = 0.0
    kappa1 = lam1 * grid.inner(phi**3, model.f_u(grid.x, zero))
    kappa2 = lam1 * guu0 * (model.r0 * phi[0] ** 3 + model.r1 * phi[-1] ** 3)
    kappa = 2 * kappa0 + 2 * kappa1 + kappa2
    return float(rho), float(kappa0), float(kappa1), float(kappa2), float(kappa)


def _tuu_phi(model, eig):
    grid, phi, lam1 = eig.grid, eig.phi, eig.lambda1
    q = _boundary_q(model, lam1, phi)
    return second_derivative(model, lam1, grid, phi, q, phi, q)


def solve_sigma_correction(model: ModelSpec, eig: EigenPair) -> Field:
    """Second-order correction ``s`` with ``L s = -(I - Q) T_uu[phi1, phi1]``, ``<phi1, s> = 0``."""
    return _sigma_solve(model, eig)[0]


def _sigma_solve(model, eig):
    grid, phi, lam1 = eig.grid, eig.phi, eig.lambda1
    n = grid.n_nodes
    y1, y2 = _tuu_phi(model, eig)
    k = psi_pairing(grid, phi, y1, y2) / grid.inner(phi, phi)
    rhs1, rhs2 = -(y1 - k * phi), -y2
    # unknowns (s, q0, q1, mu); the last column carries the complement direction (phi, 0)
    f0 = model.f(grid.x, np.zeros(n))
    gu0 = float(model.g_u(np.array(0.0)))
    L = sp.lil_matrix((n + 3, n + 3))
    L[:n, :n] = grid.neumann_laplacian + sp.diags(lam1 * f0)
    L[0, n] = 2.0 / grid.h
    L[n - 1, n + 1] = 2.0 / grid.h
    L[n, n] = 1.0
    L[n, 0] = -lam1 * gu0 * model.r0
    L[n + 1, n + 1] = 1.0
    L[n + 1, n - 1] = -lam1 * gu0 * model.r1
    L[:n, n + 2] = phi.reshape(-1, 1)
    L[n + 2, :n] = (grid.weights * phi).reshape(1, -1)
    sol = spla.spsolve(sp.csc_matrix(L), np.concatenate([rhs1, rhs2, [0.0]]))
    if not np.all(np.isfinite(sol)):
        raise SingularBorderedSystem("bordered system for the second-order correction is singular")
    s, qs, mu = sol[:n], sol[n : n + 2], sol[n + 2]
    r1, r2 = apply_linearization(model, lam1, grid, s, qs)
    defect = max(np.max(np.abs(grid.weights * (r1 - rhs1))), np.max(np.abs(r2 - rhs2)))
    if not defect < 1e-8 * (1 + np.max(np.abs(grid.weights * rhs1))) or abs(mu) > 1e-6 * (1 + np.max(np.abs(rhs1))):
        raise SingularBorderedSystem(f"bordered solve defect {defect:.3e}, multiplier {mu:.3e}")
    return Field(grid, s), qs, (y1, y2)


def compute_nu(model: ModelSpec, eig: EigenPair, sigma_field, sigma_flux=None) -> float:
    """Cubic coefficient of the reduced equation.

    ``sigma_flux`` is the normal derivative of the correction; when omitted
    it is recovered from the boundary law of the correction problem.
    """
    grid, phi, lam1 = eig.grid, eig.phi, eig.lambda1
    s = np.asarray(sigma_field)
    zero = np.zeros(grid.n_nodes)
    guu0 = float(model.g_uu(np.array(0.0)))
    guuu0 = float(model.g_uuu(np.array(0.0)))
    qphi = _boundary_q(model, lam1, phi)
    if sigma_flux is None:
        rs = np.array([model.r0, model.r1])
        ends = lambda v: np.array([v[0], v[-1]])  # noqa: E731
        sigma_flux = _boundary_q(model, lam1, s) + lam1 * guu0 * rs * ends(phi) ** 2
    nu = 3 * lam1 * grid.inner(phi**4, model.f_uu(grid.x, zero))
    nu += lam1 * guuu0 * (model.r0 * phi[0] ** 4 + model.r1 * phi[-1] ** 4)
    if model.d != 0:
        nu += 3 * model.d * grid.inner(phi, memory_flux_divergence(phi, s, sigma_flux[0], sigma_flux[1], grid=grid))
        nu += 3 * model.d * grid.inner(phi, memory_flux_divergence(s, phi, qphi[0], qphi[1], grid=grid))
    nu += 6 * lam1 * grid.inner(phi**2 * s, model.f_u(grid.x, zero))
    nu += 3 * lam1 * guu0 * (model.r0 * phi[0] ** 2 * s[0] + model.r1 * phi[-1] ** 2 * s[-1])
    return float(nu)


def compute_coefficients(model: ModelSpec, eig: EigenPair, with_nu: bool = True) -> BifCoefficients:
    rho, k0, k1, k2, kappa = compute_rho_kappa(model, eig)
    y1, y2 = _tuu_phi(model, eig)
    grid = eig.grid
    kproj = psi_pairing(grid, eig.phi, y1, y2)
    tnorm = float(np.sqrt(grid.inner(y1, y1) + y2 @ y2))
    nu, s = None, None
    if with_nu:
        s, qs, _ = _sigma_solve(model, eig)
        nu = compute_nu(model, eig, s, qs)
    return BifCoefficients(rho, k0, k1, k2, kappa, nu, s, eig.lambda1, kproj, tnorm)


def classify_zero_eigenvalue(coeffs: BifCoefficients, tol: float = 1e-10) -> ZeroEigenvalue:
    floor = tol * coeffs.scale
    if abs(coeffs.kappa) > floor:
        return ZeroEigenvalue.NoZeroEig
    if coeffs.tuu_norm is None:
        raise Indeterminate("kappa vanishes and T_uu[phi1, phi1] was not assembled")
    if coeffs.tuu_norm > floor:
        return ZeroEigenvalue.ZeroEig
    raise Indeterminate("both kappa and T_uu[phi1, phi1] vanish to tolerance")
