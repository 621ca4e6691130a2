"""Model definition: interior growth ``f(x, u)``, boundary law ``g(u)`` and
the scalar parameters of the memory-diffusion equation

    u_t = u_xx + d (u (u_sigma)_x)_x + lam * u * f(x, u),
    d_n u = lam * r * g(u)   at x = 0, L.

Derivatives are supplied analytically for the built-in models.  A user model
may leave any of them out; central differences are then used instead.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError
from .grid import Grid1D

__all__ = [
    "Expr",
    "expression",
    "ModelSpec",
    "logistic_heterogeneous",
    "saturating_bistable_boundary",
    "A0Report",
    "EigenFeasibility",
    "check_A0",
    "check_eigen_feasibility",
    "check_A3",
    "fd_step",
]


def fd_step(u):
    return 1e-5 * np.maximum(1.0, np.abs(u))


# ----------------------------------------------------------------------------
# spatial profiles


class Expr:
    """Closed-form profile in ``x`` built from a small JSON-friendly grammar.

    Accepted forms::

        3.0                          constant
        {"const": 3.0}
        {"poly": [c0, c1, c2]}       c0 + c1 x + c2 x^2
        {"cos": k, "amp": a}         a cos(k pi x / L)
        {"sin": k, "amp": a}         a sin(k pi x / L)
        {"sum": [e1, e2, ...]}
        {"prod": [e1, e2, ...]}
    """

    def __init__(self, spec, length: float = 1.0):
        self.spec = spec
        self.length = float(length)
        self._fn = self._build(spec, path="expr")

    def _build(self, spec, path):
        L = self.length
        if isinstance(spec, (int, float)) and not isinstance(spec, bool):
            c = float(spec)
            return lambda x: np.full_like(np.asarray(x, dtype=float), c)
        if not isinstance(spec, dict) or not spec:
            raise ConfigError(f"cannot interpret expression {spec!r}", path)
        if "const" in spec:
            return self._build(float(spec["const"]), path)
        if "poly" in spec:
            coeffs = [float(c) for c in spec["poly"]]
            return lambda x: np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), coeffs)
        for name, fn in (("cos", np.cos), ("sin", np.sin)):
            if name in spec:
                k = float(spec[name])
                amp = float(spec.get("amp", 1.0))
                return lambda x, fn=fn, k=k, amp=amp: amp * fn(k * np.pi * np.asarray(x, dtype=float) / L)
        if "sum" in spec or "prod" in spec:
            key = "sum" if "sum" in spec else "prod"
            parts = [self._build(s, f"{path}.{key}[{i}]") for i, s in enumerate(spec[key])]
            if not parts:
                raise ConfigError("empty term list", f"{path}.{key}")
            if key == "sum":
                return lambda x: sum(p(x) for p in parts)

            def prod(x):
                out = parts[0](x)
                for p in parts[1:]:
                    out = out * p(x)
                return out

            return prod
        raise ConfigError(f"unknown expression keys {sorted(spec)}", path)

    def __call__(self, x):
        return self._fn(x)

    def __repr__(self):
        return f"Expr({self.spec!r})"


def expression(spec, length: float = 1.0) -> Expr:
    return spec if isinstance(spec, Expr) else Expr(spec, length)


# ----------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class ModelSpec:
    """The tuple ``(f, g, r, d, lam, sigma)`` plus derivatives.

    ``f`` is called as ``f(x, u)`` with broadcasting arrays, ``g`` as ``g(u)``.
    ``r0``/``r1`` are the boundary weights at ``x = 0`` and ``x = L``.
    """

    f: Callable
    g: Callable
    r0: float
    r1: float
    d: float = 0.0
    lam: float = 1.0
    sigma: float = 0.0
    f_u_fn: Callable | None = None
    f_uu_fn: Callable | None = None
    g_u_fn: Callable | None = None
    g_uu_fn: Callable | None = None
    g_uuu_fn: Callable | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigError(f"lam must be positive, got {self.lam}", "model.lam")
        if not self.sigma >= 0:
            raise ConfigError(f"sigma must be >= 0, got {self.sigma}", "model.sigma")

    def replace(self, **changes) -> "ModelSpec":
        return dataclasses.replace(self, **changes)

    @property
    def r(self) -> np.ndarray:
        return np.array([self.r0, self.r1])

    @property
    def r_sum(self) -> float:
        return self.r0 + self.r1

    # interior ---------------------------------------------------------------
    def f_u(self, x, u):
        if self.f_u_fn is not None:
            return self.f_u_fn(x, u)
        e = fd_step(u)
        return (self.f(x, u + e) - self.f(x, u - e)) / (2 * e)

    def f_uu(self, x, u):
        if self.f_uu_fn is not None:
            return self.f_uu_fn(x, u)
        if self.f_u_fn is not None:
            e = fd_step(u)
            return (self.f_u_fn(x, u + e) - self.f_u_fn(x, u - e)) / (2 * e)
        e = 1e-4 * np.maximum(1.0, np.abs(u))
        return (self.f(x, u + e) - 2 * self.f(x, u) + self.f(x, u - e)) / e**2

    # boundary ---------------------------------------------------------------
    def g_u(self, u):
        if self.g_u_fn is not None:
            return self.g_u_fn(u)
        e = fd_step(u)
        return (self.g(u + e) - self.g(u - e)) / (2 * e)

    def g_uu(self, u):
        if self.g_uu_fn is not None:
            return self.g_uu_fn(u)
        e = fd_step(u)
        if self.g_u_fn is not None:
            return (self.g_u_fn(u + e) - self.g_u_fn(u - e)) / (2 * e)
        e = 1e-4 * np.maximum(1.0, np.abs(u))
        return (self.g(u + e) - 2 * self.g(u) + self.g(u - e)) / e**2

    def g_uuu(self, u):
        if self.g_uuu_fn is not None:
            return self.g_uuu_fn(u)
        e = 1e-3 * np.maximum(1.0, np.abs(u))
        if self.g_uu_fn is not None:
            return (self.g_uu_fn(u + e) - self.g_uu_fn(u - e)) / (2 * e)
        return (self.g(u + 2 * e) - 2 * self.g(u + e) + 2 * self.g(u - e) - self.g(u - 2 * e)) / (2 * e**3)

    def boundary_flux(self, u0, u1, lam=None):
        """Outward normal derivatives ``lam * r * g(u)`` at both endpoints."""
        lam = self.lam if lam is None else lam
        return lam * self.r0 * self.g(u0), lam * self.r1 * self.g(u1)


def logistic_heterogeneous(m_hat, r0=-1.0, r1=-1.0, d=0.0, lam=1.0, sigma=0.0, length=1.0) -> ModelSpec:
    """``f = m_hat(x) - u`` and ``g = u^2``."""
    m = expression(m_hat, length)
    return ModelSpec(
        f=lambda x, u: m(x) - u,
        g=lambda u: np.asarray(u) ** 2,
        r0=float(r0),
        r1=float(r1),
        d=float(d),
        lam=float(lam),
        sigma=float(sigma),
        f_u_fn=lambda x, u: -np.ones(np.broadcast(np.asarray(x), np.asarray(u)).shape),
        f_uu_fn=lambda x, u: np.zeros(np.broadcast(np.asarray(x), np.asarray(u)).shape),
        g_u_fn=lambda u: 2.0 * np.asarray(u),
        g_uu_fn=lambda u: np.full_like(np.asarray(u, dtype=float), 2.0),
        g_uuu_fn=lambda u: np.zeros_like(np.asarray(u, dtype=float)),
        name="LogisticHeterogeneous",
        params={"m_hat": m.spec, "r0": r0, "r1": r1, "length": length},
    )


def saturating_bistable_boundary(
    r_hat, k_hat, gamma_hat, a_hat, r0=-1.0, r1=-1.0, d=0.0, lam=1.0, sigma=0.0, length=1.0
) -> ModelSpec:
    """``f = r_hat (k - u) / (k + gamma_hat u)`` and ``g = u (u - a)(1 - u)``."""
    if not 0 < a_hat < 1:
        raise ConfigError(f"a_hat must lie in (0, 1), got {a_hat}", "model.a_hat")
    if not k_hat > 0:
        raise ConfigError(f"k_hat must be positive, got {k_hat}", "model.k_hat")
    rr = expression(r_hat, length)
    gg = expression(gamma_hat, length)
    k, a = float(k_hat), float(a_hat)

    def f(x, u):
        return rr(x) * (k - u) / (k + gg(x) * u)

    def f_u(x, u):
        gx = gg(x)
        return -rr(x) * k * (1.0 + gx) / (k + gx * u) ** 2

    def f_uu(x, u):
        gx = gg(x)
        return 2.0 * rr(x) * k * (1.0 + gx) * gx / (k + gx * u) ** 3

    return ModelSpec(
        f=f,
        g=lambda u: u * (u - a) * (1.0 - u),
        r0=float(r0),
        r1=float(r1),
        d=float(d),
        lam=float(lam),
        sigma=float(sigma),
        f_u_fn=f_u,
        f_uu_fn=f_uu,
        g_u_fn=lambda u: -3.0 * u**2 + 2.0 * (1.0 + a) * u - a,
        g_uu_fn=lambda u: -6.0 * u + 2.0 * (1.0 + a),
        g_uuu_fn=lambda u: np.full_like(np.asarray(u, dtype=float), -6.0),
        name="SaturatingBistableBoundary",
        params={"r_hat": rr.spec, "k_hat": k, "gamma_hat": gg.spec, "a_hat": a, "r0": r0, "r1": r1, "length": length},
    )


# ----------------------------------------------------------------------------
# assumption checks


@dataclass
class A0Report:
    g_zero: bool
    bounded: bool
    sign: bool
    u_range: tuple
    violations: list  # (endpoint, u_lo, u_hi) runs where r g(u) > 0

    @property
    def passed(self) -> bool:
        return self.g_zero and self.bounded and self.sign


def _runs(mask, u):
    runs, start = [], None
    for i, bad in enumerate(mask):
        if bad and start is None:
            start = i
        if not bad and start is not None:
            runs.append((float(u[start]), float(u[i - 1])))
            start = None
    if start is not None:
        runs.append((float(u[start]), float(u[-1])))
    return runs


def check_A0(model: ModelSpec, u_range=(0.0, 1.0), grid: Grid1D | None = None, n_samples=1000, tol=1e-12) -> A0Report:
    """Sampled check of the standing assumptions on ``f``, ``g`` and ``r``."""
    lo, hi = map(float, u_range)
    if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
        raise ConfigError(f"bad u_range {u_range}", "u_range")
    grid = grid or Grid1D(model.params.get("length", 1.0), 64)
    u = np.linspace(lo, hi, n_samples)
    g0 = abs(float(model.g(np.array(0.0)))) <= tol
    X, U = np.meshgrid(grid.x, u, indexing="ij")
    bounded = all(
        np.all(np.isfinite(v))
        for v in (model.f(X, U), model.f_u(X, U), model.g(u), model.g_u(u))
    )
    gu = model.g(u)
    violations = []
    for name, r in (("x0", model.r0), ("xN", model.r1)):
        bad = r * gu > tol
        violations += [(name, a, b) for a, b in _runs(bad, u)]
    return A0Report(g0, bool(bounded), not violations, (lo, hi), violations)


@dataclass
class EigenFeasibility:
    indefinite: bool  # f(x,0) > 0 somewhere, or r g_u(0) > 0 at an endpoint
    negative_mean: bool  # int f(x,0) + g_u(0) (r0 + r1) < 0
    mean_value: float

    @property
    def passed(self) -> bool:
        return self.indefinite and self.negative_mean


def check_eigen_feasibility(model: ModelSpec, grid: Grid1D) -> EigenFeasibility:
    f0 = model.f(grid.x, np.zeros(grid.n_nodes))
    gu0 = float(model.g_u(np.array(0.0)))
    indefinite = bool(np.any(f0 > 0) or model.r0 * gu0 > 0 or model.r1 * gu0 > 0)
    mean = float(grid.integrate(f0) + gu0 * model.r_sum)
    return EigenFeasibility(indefinite, mean < 0, mean)


def check_A3(model: ModelSpec, branch) -> bool:
    """``|d| < 1 / max u*`` over every state of a branch."""
    states = [np.asarray(getattr(s, "u_star", s)) for s in branch]
    if not states:
        raise ValueError("check_A3 needs a non-empty branch")
    umax = max(float(np.max(s)) for s in states)
    if model.d == 0:
        return True
    return umax <= 0 or abs(model.d) < 1.0 / umax
