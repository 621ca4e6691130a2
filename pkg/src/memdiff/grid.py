"""Uniform 1-D mesh, nodal fields and the finite-difference operators.

Boundary conditions are always imposed through the *outward normal derivative*
at the two endpoints: ``flux0 = -u'(0)`` and ``flux1 = +u'(L)``.  Every
operator here is written in conservative (half-cell) form, so that the
trapezoid quadrature of a divergence telescopes exactly onto its boundary
fluxes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Grid1D",
    "Field",
    "integrate",
    "boundary_sum",
    "laplacian",
    "memory_flux_divergence",
]


@dataclass(frozen=True)
class Grid1D:
    """Uniform mesh ``x_0 = 0 < x_1 < ... < x_N = L``."""

    length: float = 1.0
    n_cells: int = 256

    def __post_init__(self):
        if not (self.length > 0 and np.isfinite(self.length)):
            raise ValueError(f"length must be positive, got {self.length}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 2:
            raise ValueError(f"n_cells must be an integer >= 2, got {self.n_cells}")

    @property
    def n_nodes(self) -> int:
        return self.n_cells + 1

    @property
    def h(self) -> float:
        return self.length / self.n_cells

    @cached_property
    def x(self) -> np.ndarray:
        x = np.linspace(0.0, self.length, self.n_nodes)
        x.flags.writeable = False
        return x

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.full(self.n_nodes, self.h)
        w[0] = w[-1] = 0.5 * self.h
        w.flags.writeable = False
        return w

    def refine(self, factor: int = 2) -> "Grid1D":
        return Grid1D(self.length, self.n_cells * factor)

    def field(self, values) -> "Field":
        return Field(self, values)

    def integrate(self, values) -> float | complex:
        return self.weights @ np.asarray(values)

    def inner(self, a, b) -> float | complex:
        """Bilinear (unconjugated) quadrature pairing ``int a b dx``."""
        return self.weights @ (np.asarray(a) * np.asarray(b))

    def lift(self, q0, q1, dtype=float) -> np.ndarray:
        """Nodal vector carrying boundary fluxes into the half cells."""
        out = np.zeros(self.n_nodes, dtype=np.result_type(dtype, q0, q1))
        out[0] = 2.0 * q0 / self.h
        out[-1] = 2.0 * q1 / self.h
        return out

    @cached_property
    def neumann_laplacian(self) -> sp.csr_matrix:
        """Matrix of ``laplacian(., 0, 0)``."""
        n, h2 = self.n_nodes, self.h**2
        main = np.full(n, -2.0 / h2)
        upper = np.full(n - 1, 1.0 / h2)
        lower = np.full(n - 1, 1.0 / h2)
        upper[0] = 2.0 / h2
        lower[-1] = 2.0 / h2
        return sp.diags([lower, main, upper], [-1, 0, 1], format="csr")

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        """Symmetric ``S`` with ``u @ S @ u = sum (u_{i+1} - u_i)^2 / h``."""
        return sp.csr_matrix(-(sp.diags(self.weights) @ self.neumann_laplacian))

    def div_matrix_w(self, u) -> sp.csr_matrix:
        """Matrix ``D`` with ``memory_flux_divergence(u, w, 0, 0) = D @ w``."""
        u = np.asarray(u)
        h2 = self.h**2
        face = 0.5 * (u[:-1] + u[1:])
        coef = np.zeros(self.n_cells, dtype=face.dtype)
        coef[:] = face / h2
        up = coef.copy()
        lo = coef.copy()
        up[0] *= 2.0
        lo[-1] *= 2.0
        main = np.zeros(self.n_nodes, dtype=face.dtype)
        main[:-1] -= up
        main[1:] -= lo
        return sp.diags([lo, main, up], [-1, 0, 1], format="csr")

    def div_matrix_u(self, w) -> sp.csr_matrix:
        """Matrix ``D`` with ``memory_flux_divergence(u, w, 0, 0) = D @ u``."""
        w = np.asarray(w)
        n, h2 = self.n_nodes, self.h**2
        dw = np.diff(w) / h2  # (w_{i+1} - w_i)/h^2 on face i+1/2
        scale = np.ones(self.n_cells)
        # face contribution enters node i with +, node i+1 with -
        rows, cols, vals = [], [], []
        for sgn, node_off in ((1.0, 0), (-1.0, 1)):
            node = np.arange(self.n_cells) + node_off
            mult = np.where((node == 0) | (node == n - 1), 2.0, 1.0) * scale
            for k in (0, 1):
                rows.append(node)
                cols.append(np.arange(self.n_cells) + k)
                vals.append(sgn * 0.5 * dw * mult)
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        )


class Field:
    """Nodal values on a :class:`Grid1D`.

    Arithmetic is only defined between fields on the same grid (or with
    scalars / plain arrays of matching length).  ``np.asarray(field)`` gives the
    underlying values.
    """

    __slots__ = ("grid", "values")
    __array_priority__ = 100

    def __init__(self, grid: Grid1D, values):
        values = np.array(values, dtype=np.result_type(values, float))
        if values.shape == ():
            values = np.full(grid.n_nodes, values)
        if values.shape != (grid.n_nodes,):
            raise ValueError(
                f"field has {values.shape} values, grid has {grid.n_nodes} nodes"
            )
        self.grid = grid
        self.values = values

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return f"Field(n_nodes={len(self.values)}, max={np.max(np.abs(self.values)):.3g})"

    def _other(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def _wrap(self, values):
        return Field(self.grid, values)

    def __add__(self, other):
        return self._wrap(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._wrap(self.values - self._other(other))

    def __rsub__(self, other):
        return self._wrap(self._other(other) - self.values)

    def __mul__(self, other):
        return self._wrap(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._wrap(self.values / self._other(other))

    def __neg__(self):
        return self._wrap(-self.values)

    def integral(self):
        return self.grid.integrate(self.values)


def _values(field):
    return np.asarray(field)


def _grid_of(*fields, grid=None):
    for f in fields:
        if isinstance(f, Field):
            if grid is not None and f.grid != grid:
                raise ValueError("fields live on different grids")
            grid = f.grid
    if grid is None:
        raise ValueError("a grid is required when passing plain arrays")
    return grid


def integrate(field, grid: Grid1D | None = None):
    """Trapezoid quadrature of a nodal field."""
    grid = _grid_of(field, grid=grid)
    return grid.integrate(_values(field))


def boundary_sum(q0, q1):
    """The 1-D boundary integral: the sum of the two endpoint values."""
    return q0 + q1


def laplacian(field, flux0=0.0, flux1=0.0, grid: Grid1D | None = None) -> Field:
    """Second-order Laplacian with prescribed outward normal derivatives."""
    grid = _grid_of(field, grid=grid)
    u = _values(field)
    out = grid.neumann_laplacian @ u + grid.lift(flux0, flux1, dtype=u.dtype)
    return Field(grid, out)


def memory_flux_divergence(u, w, flux0=0.0, flux1=0.0, grid: Grid1D | None = None) -> Field:
    """Conservative ``div(u grad w)``.

    ``flux0``/``flux1`` are the outward normal derivatives of ``w`` at the two
    endpoints; the boundary face flux is ``u * d_n w``.
    """
    grid = _grid_of(u, w, grid=grid)
    uv, wv = _values(u), _values(w)
    out = grid.div_matrix_w(uv) @ wv + grid.lift(uv[0] * flux0, uv[-1] * flux1, dtype=np.result_type(uv, wv))
    return Field(grid, out)
