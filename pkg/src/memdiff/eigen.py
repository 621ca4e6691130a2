"""Principal eigenpair of the indefinite-weight problem

    -u'' = lam f(x, 0) u   in (0, L),     d_n u = lam r g_u(0) u   at x = 0, L.

After multiplying the ghost-node rows by the trapezoid weights the discrete
problem is the symmetric pencil ``S v = lam M v``: ``S`` is the (singular,
positive semidefinite) stiffness matrix and ``M`` the indefinite weight, with
the boundary weight ``r g_u(0)`` sitting on its two corner entries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import DenominatorNotPositive, FeasibilityViolated, NoSignDefiniteEigenvector
from .grid import Field, Grid1D
from .model import ModelSpec, check_eigen_feasibility

__all__ = ["EigenPair", "assemble_pencil", "principal_eigenpair", "rayleigh_quotient"]


@dataclass(frozen=True)
class EigenPair:
    lambda1: float
    phi1: Field
    residual_norm: float

    @property
    def grid(self) -> Grid1D:
        return self.phi1.grid

    @property
    def phi(self) -> np.ndarray:
        return self.phi1.values


def weight_matrix(model: ModelSpec, grid: Grid1D) -> np.ndarray:
    """Dense ``M``: quadrature-weighted ``f(x,0)`` plus endpoint ``r g_u(0)``."""
    f0 = model.f(grid.x, np.zeros(grid.n_nodes))
    gu0 = float(model.g_u(np.array(0.0)))
    M = np.diag(grid.weights * f0)
    M[0, 0] += model.r0 * gu0
    M[-1, -1] += model.r1 * gu0
    return M


def assemble_pencil(model: ModelSpec, grid: Grid1D):
    """Return ``(S, M)`` as dense arrays."""
    return grid.stiffness.toarray(), weight_matrix(model, grid)


def principal_eigenpair(model: ModelSpec, grid: Grid1D, check=True) -> EigenPair:
    if check:
        feas = check_eigen_feasibility(model, grid)
        if not feas.indefinite:
            raise FeasibilityViolated("f(x,0) <= 0 in the interior and r g_u(0) <= 0 on the boundary")
        if not feas.negative_mean:
            raise FeasibilityViolated(
                f"int f(x,0) dx + g_u(0) int r dS = {feas.mean_value:.6g} is not negative"
            )
    S, M = assemble_pencil(model, grid)
    alpha = _definite_shift(S, M, grid)
    # S - alpha M is SPD, so M v = mu (S - alpha M) v is a definite pencil and
    # lam = alpha + 1/mu; the smallest lam > alpha is the largest mu.
    k = min(6, grid.n_nodes)
    mu, V = la.eigh(M, S - alpha * M, subset_by_index=[grid.n_nodes - k, grid.n_nodes - 1])
    candidates = []
    for j in range(k - 1, -1, -1):
        if mu[j] <= 0:
            break
        v = V[:, j] / V[np.argmax(np.abs(V[:, j])), j]
        if np.all(v > 0):
            candidates.append((alpha + 1.0 / mu[j], v))
            break
    if not candidates:
        raise NoSignDefiniteEigenvector("no positive eigenvalue has a sign-definite eigenvector")
    lam1, v = candidates[0]
    lam1, v = _newton_polish(S, M, lam1, v)
    v = v / np.sqrt(grid.inner(v, v))
    res = S @ v - lam1 * (M @ v)
    return EigenPair(float(lam1), Field(grid, v), float(np.max(np.abs(res))))


def _is_spd_tridiagonal(A) -> bool:
    ab = np.zeros((2, A.shape[0]))
    ab[0, 1:] = np.diag(A, 1)
    ab[1] = np.diag(A)
    try:
        la.cholesky_banded(ab, lower=False)
    except la.LinAlgError:
        return False
    return True


def _definite_shift(S, M, grid) -> float:
    """Some ``alpha`` in ``(0, lam1)``, found by halving a Rayleigh upper bound."""
    d = np.diag(M).copy()
    trial = np.maximum(d / np.maximum(grid.weights, 1e-300), 0.0) + 1e-3
    den = trial @ M @ trial
    alpha = (trial @ S @ trial) / den if den > 0 else 1.0
    for _ in range(200):
        alpha *= 0.5
        if _is_spd_tridiagonal(S - alpha * M):
            return alpha
    raise NoSignDefiniteEigenvector("could not find a definite shift for the pencil")


def _newton_polish(S, M, lam, v, steps=2):
    """Newton on ``(S - lam M) v = 0`` with ``v[argmax] = 1`` held fixed."""
    n = len(v)
    j = int(np.argmax(np.abs(v)))
    for _ in range(steps):
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = S - lam * M
        J[:n, n] = -(M @ v)
        J[n, j] = 1.0
        F = np.concatenate([(S - lam * M) @ v, [v[j] - 1.0]])
        step = la.solve(J, -F)
        v = v + step[:n]
        lam = lam + step[n]
    return lam, v


def rayleigh_quotient(model: ModelSpec, u) -> float:
    """``int |u'|^2 / (int f(x,0) u^2 + g_u(0) (r0 u(0)^2 + r1 u(L)^2))``."""
    if not isinstance(u, Field):
        raise TypeError("rayleigh_quotient expects a Field")
    grid, v = u.grid, u.values
    den = float(v @ weight_matrix(model, grid) @ v)
    if not den > 0:
        raise DenominatorNotPositive(f"weighted denominator {den:.6g} is not positive")
    return float(v @ (grid.stiffness @ v)) / den
