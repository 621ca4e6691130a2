"""Spectrum of the linearisation about a steady state with delay.

Eigenvalues solve the nonlinear problem ``(A + exp(-mu sigma) B) psi = mu psi``
where ``A`` collects the instantaneous part and ``B = d div(u* grad .)`` the
delayed memory flux.  Eigenvalues are

* computed at ``sigma = 0`` by a dense eigensolve of ``A + B``;
* seeded at ``sigma > 0`` from a Chebyshev discretisation of the
  infinitesimal generator of the delay semigroup (shift-invert Arnoldi); and
* polished and tracked in ``sigma`` by Newton on a bordered system.

Only eigenvalues with ``Im mu >= 0`` are stored; a non-real one stands for a
conjugate pair when counting.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .errors import CountJumpNotTwo, NewtonLostEigenvalue
from .grid import Field, Grid1D
from .model import ModelSpec

log = logging.getLogger(__name__)

__all__ = [
    "LinearizedPair",
    "SpectrumResult",
    "Crossing",
    "assemble_linearization",
    "delay_free_spectrum",
    "delayed_spectrum",
    "companion_seeds",
    "newton_eigenpair",
    "bordered_jacobian",
    "left_eigenvector",
    "dmu_dsigma",
    "xi_pairing",
    "continue_in_sigma",
    "unstable_count_profile",
]

_IMAG_TOL = 1e-10


@dataclass(frozen=True)
class LinearizedPair:
    A: sp.csr_matrix
    B: sp.csr_matrix
    grid: Grid1D
    lam: float
    d: float
    cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def T(self, mu, sigma) -> sp.csc_matrix:
        M = self.A - mu * sp.identity(self.n, format="csr")
        if self.d != 0:
            M = M + np.exp(-mu * sigma) * self.B
        return sp.csc_matrix(M)


@dataclass(frozen=True)
class Crossing:
    sigma: float
    omega: float
    dmu_dsigma: complex
    xi: complex  # left-eigenvector pairing at the crossing
    condition: float


@dataclass
class SpectrumResult:
    sigma: float
    eigenvalues: np.ndarray  # Im >= 0 representatives, rightmost first
    unstable_count: int
    crossing_sigma: float | None = None
    crossing_omega: float | None = None
    dmu_dsigma: complex | None = None
    vectors: list = field(default_factory=list, repr=False)
    crossings: list = field(default_factory=list, repr=False)

    @property
    def rightmost(self) -> complex:
        return complex(self.eigenvalues[0])

    def all_eigenvalues(self) -> np.ndarray:
        """Conjugate-closed list."""
        ev = list(self.eigenvalues)
        ev += [np.conj(z) for z in self.eigenvalues if abs(z.imag) > _IMAG_TOL * max(1.0, abs(z))]
        ev = np.array(ev)
        return ev[np.lexsort((-ev.imag, -ev.real))]


def assemble_linearization(model: ModelSpec, u_star, lam: float | None = None) -> LinearizedPair:
    """Instantaneous part ``A`` and delayed part ``B`` at the steady state ``u_star``.

    The boundary rows use ``d_n psi = lam r g_u(u*) psi``; the delayed memory
    flux through the boundary is ``u* d_n psi_sigma``.
    """
    grid = u_star.grid
    u = np.asarray(u_star)
    lam = model.lam if lam is None else lam
    dq = np.zeros(grid.n_nodes)
    dq[0] = lam * model.r0 * model.g_u(u[0])
    dq[-1] = lam * model.r1 * model.g_u(u[-1])
    A = grid.neumann_laplacian + sp.diags(2.0 / grid.h * dq)
    A = A + sp.diags(lam * (model.f(grid.x, u) + u * model.f_u(grid.x, u)))
    if model.d != 0:
        q0, q1 = model.boundary_flux(u[0], u[-1], lam)
        qs = np.zeros(grid.n_nodes)
        qs[0], qs[-1] = q0, q1
        A = A + model.d * (grid.div_matrix_u(u) + sp.diags(2.0 / grid.h * qs))
        B = model.d * (grid.div_matrix_w(u) + sp.diags(2.0 / grid.h * u * dq))
    else:
        B = sp.csr_matrix((grid.n_nodes, grid.n_nodes))
    return LinearizedPair(sp.csr_matrix(A), sp.csr_matrix(B), grid, float(lam), float(model.d))


def _count(eigs) -> int:
    return int(sum((2 if abs(z.imag) > _IMAG_TOL * max(1.0, abs(z)) else 1) for z in eigs if z.real > 0))


def _upper(vals, vecs=None, k=None):
    keep = [i for i, z in enumerate(vals) if z.imag >= -_IMAG_TOL * max(1.0, abs(z))]
    order = sorted(keep, key=lambda i: (-vals[i].real, -abs(vals[i].imag)))
    if k is not None:
        order = order[:k]
    ev = np.array([complex(vals[i].real, abs(vals[i].imag)) for i in order])
    if vecs is None:
        return ev, []
    out = []
    for i in order:
        v = vecs[:, i]
        out.append(np.conj(v) if vals[i].imag < 0 else v)
    return ev, out


def delay_free_spectrum(pair: LinearizedPair, k: int = 20) -> SpectrumResult:
    """Dense eigensolve of ``A + B`` (the problem at ``sigma = 0``)."""
    vals, vecs = la.eig((pair.A + pair.B).toarray())
    ev, vv = _upper(vals, vecs, k)
    return SpectrumResult(0.0, ev, _count(ev), vectors=vv)


def _cheb(m):
    """Chebyshev points ``t_j = cos(j pi / m)`` and the differentiation matrix."""
    t = np.cos(np.pi * np.arange(m + 1) / m)
    c = np.ones(m + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(m + 1)
    X = np.tile(t, (m + 1, 1)).T
    D = np.outer(c, 1.0 / c) / (X - X.T + np.eye(m + 1))
    D -= np.diag(D.sum(axis=1))
    return t, D


def _generator(pair: LinearizedPair, sigma: float, m: int) -> sp.csc_matrix:
    """Infinitesimal generator on ``m + 1`` Chebyshev nodes of ``[-sigma, 0]``.

    Block 0 holds ``u(0)``; block ``m`` holds ``u(-sigma)``.
    """
    n = pair.n
    _, D = _cheb(m)
    D = D * (2.0 / sigma)
    rows = sp.hstack([pair.A, sp.csr_matrix((n, n * (m - 1))), pair.B])
    lower = sp.kron(sp.csr_matrix(D[1:, :]), sp.identity(n))
    return sp.csc_matrix(sp.vstack([rows, lower]))


def _bands(pair: LinearizedPair):
    if "bands" not in pair.cache:
        def band(M):
            M = sp.dia_matrix(M)
            ab = np.zeros((3, pair.n))
            for off, row in zip(M.offsets, M.data):
                if abs(off) > 1:
                    if np.any(row):
                        raise ValueError("linearisation is not tridiagonal")
                    continue
                ab[1 - off] += row  # dia data is aligned by column, like LAPACK band storage
            return ab
        pair.cache["bands"] = (band(pair.A), band(pair.B))
    return pair.cache["bands"]


def _T_banded(pair, mu, sigma):
    a, b = _bands(pair)
    ab = a.astype(complex)
    ab[1] -= mu
    if pair.d != 0:
        ab += np.exp(-mu * sigma) * b
    return ab


def _bordered_solve(ab, col, row, r1, r2):
    """Solve ``[T col; row 0] [x; y] = [r1; r2]`` with ``T`` tridiagonal (banded)."""
    X = la.solve_banded((1, 1), ab, np.column_stack([r1, col]), check_finite=False)
    a, b = X[:, 0], X[:, 1]
    y = (row @ a - r2) / (row @ b)
    return a - y * b, y


def bordered_jacobian(pair: LinearizedPair, sigma: float, mu, psi, row) -> sp.csc_matrix:
    e = np.exp(-mu * sigma) if pair.d != 0 else 0.0
    col = -(psi + sigma * e * (pair.B @ psi))
    return sp.bmat(
        [[pair.T(mu, sigma), sp.csc_matrix(col.reshape(-1, 1))], [sp.csc_matrix(np.reshape(row, (1, -1))), None]],
        format="csc",
    )


def newton_eigenpair(pair: LinearizedPair, sigma: float, mu, psi, tol: float = 1e-10, max_iter: int = 30):
    """Newton on ``T(mu) psi = 0`` bordered by ``<psi0, psi> = 1``.

    Returns ``(mu, psi, row)`` where ``row`` is the bordering functional;
    raises ``NewtonLostEigenvalue``.
    """
    w = pair.grid.weights
    psi = np.asarray(psi, dtype=complex)
    row = np.conj(psi) * w
    s = row @ psi
    if s == 0 or not np.isfinite(s):
        raise NewtonLostEigenvalue("degenerate seed vector")
    psi = psi / s
    mu = complex(mu)
    prev = np.inf
    for it in range(max_iter):
        if abs(mu * sigma) > 700 or not np.isfinite(mu):
            break
        ab = _T_banded(pair, mu, sigma)
        e = np.exp(-mu * sigma) if pair.d != 0 else 0.0
        Tpsi = pair.A @ psi - mu * psi + (e * (pair.B @ psi) if pair.d != 0 else 0.0)
        col = -(psi + sigma * e * (pair.B @ psi)) if pair.d != 0 else -psi
        try:
            dpsi, dmu = _bordered_solve(ab, col, row, -Tpsi, -(row @ psi - 1.0))
        except (la.LinAlgError, ValueError):
            break
        if not (np.all(np.isfinite(dpsi)) and np.isfinite(dmu)):
            break
        psi = psi + dpsi
        mu = mu + dmu
        scale = max(abs(mu), 1e-8)
        if abs(dmu) <= tol * scale and np.max(np.abs(dpsi)) <= 1e-8 * np.max(np.abs(psi)):
            return mu, psi, row
        # stagnation at round-off level
        if it >= 2 and abs(dmu) >= prev and prev <= 1e-7 * scale:
            return mu, psi, row
        prev = abs(dmu)
    raise NewtonLostEigenvalue(f"Newton did not converge near mu={mu:.6g} at sigma={sigma:.6g}")


def _galerkin_basis(pair: LinearizedPair, p: int) -> np.ndarray:
    """Orthonormal real basis spanning the ``p`` rightmost eigenvectors of ``A + B``."""
    key = ("basis", p)
    if key not in pair.cache:
        vals, vecs = la.eig((pair.A + pair.B).toarray())
        order = np.argsort(-vals.real)[: min(p, pair.n)]
        cols = np.hstack([vecs[:, order].real, vecs[:, order].imag])
        Q, R = la.qr(cols, mode="economic")
        keep = np.abs(np.diag(R)) > 1e-10 * np.max(np.abs(np.diag(R)))
        pair.cache[key] = Q[:, keep][:, : len(order)]
    return pair.cache[key]


def companion_seeds(pair: LinearizedPair, sigma: float, p: int = 16, m: int = 40):
    """Eigenvalue seeds from the generator of the delay problem projected on ``p`` modes.

    The dense companion is small enough for a full eigensolve, so no
    eigenvalue of the projected problem is missed; high spatial modes only
    spawn delay roots with ``Re mu < 0`` as long as ``d u* < 1``.
    """
    V = _galerkin_basis(pair, p)
    Ar = V.T @ (pair.A @ V)
    Br = V.T @ (pair.B @ V)
    q = V.shape[1]
    _, D = _cheb(m)
    D = D * (2.0 / sigma)
    G = np.zeros((q * (m + 1), q * (m + 1)))
    G[:q, :q] = Ar
    G[:q, q * m :] = Br
    G[q:, :] = np.kron(D[1:, :], np.eye(q))
    vals, vecs = la.eig(G)
    return _upper(vals, V @ vecs[:q, :])


def delayed_spectrum(pair: LinearizedPair, sigma: float, k: int = 20, p: int = 16, m: int = 40) -> SpectrumResult:
    """Rightmost eigenvalues at delay ``sigma``: companion seeds plus Newton polish."""
    if sigma == 0 or pair.d == 0:
        res = delay_free_spectrum(pair, k)
        res.sigma = float(sigma)
        return res
    seeds_mu, seeds_psi = companion_seeds(pair, sigma, p, m)
    out_mu, out_psi = [], []
    for mu0, v0 in zip(seeds_mu[: 2 * k], seeds_psi[: 2 * k]):
        try:
            mu, psi, _ = newton_eigenpair(pair, sigma, mu0, v0)
        except NewtonLostEigenvalue:
            continue
        if mu.imag < 0:
            mu, psi = np.conj(mu), np.conj(psi)
        if any(abs(mu - z) <= 1e-8 * max(1e-6, abs(mu)) for z in out_mu):
            continue
        out_mu.append(mu)
        out_psi.append(psi)
    order = np.argsort([-z.real for z in out_mu])[:k]
    ev = np.array([out_mu[i] for i in order])
    return SpectrumResult(float(sigma), ev, _count(ev), vectors=[out_psi[i] for i in order])


def left_eigenvector(pair: LinearizedPair, sigma: float, mu, psi) -> np.ndarray:
    """``chi`` with ``chi^T T(mu) = 0``, normalised by ``chi^T psi = 1``."""
    n = pair.n
    T = pair.T(mu, sigma)
    psi = np.asarray(psi)
    J = sp.bmat([[T.T, sp.csc_matrix(psi.reshape(-1, 1))], [sp.csc_matrix(psi.reshape(1, -1)), None]], format="csc")
    sol = spla.spsolve(J, np.concatenate([np.zeros(n), [1.0]]))
    return sol[:n]


def dmu_dsigma(pair: LinearizedPair, sigma: float, mu, psi):
    """Exact ``d mu / d sigma`` of a simple eigenvalue, and the pairing ``Xi``.

    ``Xi = chi^T (psi + sigma exp(-mu sigma) B psi)`` and
    ``dmu/dsigma * Xi = -mu exp(-mu sigma) chi^T B psi``.
    """
    chi = left_eigenvector(pair, sigma, mu, psi)
    e = np.exp(-mu * sigma)
    cb = chi @ (pair.B @ psi)
    xi = chi @ psi + sigma * e * cb
    return -mu * e * cb / xi, xi


def xi_pairing(pair: LinearizedPair, sigma: float, omega: float, left, right) -> complex:
    """``int l [r + sigma exp(-i omega sigma) B r] dx`` (trapezoid quadrature)."""
    g = pair.grid
    left, right = np.asarray(left), np.asarray(right)
    return complex(g.inner(left, right) + sigma * np.exp(-1j * omega * sigma) * g.inner(left, pair.B @ right))


# ---------------------------------------------------------------------------
# continuation in sigma


@dataclass
class _Track:
    mu: complex
    psi: np.ndarray


def _step_track(pair, t: _Track, s_from, s_to, slope, depth=0):
    """Continue one eigenvalue from ``s_from`` to ``s_to``.

    With a slope the step is accepted when Newton lands near the secant
    prediction; without one, a Newton round trip back to ``s_from`` must
    return the starting eigenvalue.  Failing steps are halved.
    """
    pred = t.mu + slope * (s_to - s_from)
    scale = max(abs(t.mu), 1e-8)
    try:
        mu, psi, _ = newton_eigenpair(pair, s_to, pred, t.psi)
        if slope != 0:
            ok = abs(mu - pred) <= 0.25 * abs(t.mu - pred) + 1e-6 * scale
        else:
            back, _, _ = newton_eigenpair(pair, s_from, t.mu, psi)
            ok = abs(back - t.mu) <= 1e-6 * scale and abs(mu - t.mu) <= 0.5 * scale + abs(s_to - s_from) * scale / max(s_from, s_to)
        if ok:
            return _Track(complex(mu.real, abs(mu.imag)), psi if mu.imag >= 0 else np.conj(psi))
    except NewtonLostEigenvalue:
        pass
    if depth >= 3:
        raise NewtonLostEigenvalue(f"lost eigenvalue near {t.mu:.6g} between sigma={s_from:.6g} and {s_to:.6g}")
    mid = 0.5 * (s_from + s_to)
    half = _step_track(pair, t, s_from, mid, slope, depth + 1)
    return _step_track(pair, half, mid, s_to, (half.mu - t.mu) / (mid - s_from), depth + 1)


def _same(a, b) -> bool:
    return abs(a - b) <= 1e-7 * max(1e-6, abs(a))


def continue_in_sigma(
    pair: LinearizedPair,
    sigma_grid,
    k: int = 20,
    guard_every: int = 10,
    p: int = 16,
    m: int = 40,
    xtol: float = 1e-8,
) -> list:
    """Track the rightmost eigenvalues along ``sigma_grid`` and locate crossings.

    Tracked eigenvalues are continued by Newton from the previous ``sigma``;
    every ``guard_every`` steps (and whenever a leading eigenvalue is lost)
    the companion guard adds eigenvalues that entered from the left.  Every
    eigenvalue found in the right half-plane at ``sigma`` but in the left
    half-plane at the previous grid point has its crossing located by a
    bracketing root-finder on ``Re mu``; the crossings are attached to the
    result of the interval they fall in and collected in
    ``results[-1].crossings``.
    """
    sig = np.asarray(sigma_grid, dtype=float)
    if np.any(np.diff(sig) <= 0) or sig[0] < 0:
        raise ValueError("sigma_grid must be increasing and non-negative")
    res0 = delayed_spectrum(pair, sig[0], k=k, p=p, m=m)
    if pair.d == 0:
        # B = 0: the spectrum does not depend on sigma
        return [
            SpectrumResult(float(s), res0.eigenvalues.copy(), res0.unstable_count, vectors=list(res0.vectors))
            for s in sig
        ]
    tracks = [_Track(z, v) for z, v in zip(res0.eigenvalues, res0.vectors)]
    slopes = [0.0] * len(tracks)
    results = [res0]
    crossings: list[Crossing] = []
    for step in range(1, len(sig)):
        s0, s1 = sig[step - 1], sig[step]
        new_tracks, new_slopes = [], []
        lost_leading = False
        for rank, (t, sl) in enumerate(zip(tracks, slopes)):
            try:
                nt = _step_track(pair, t, s0, s1, sl)
            except NewtonLostEigenvalue as exc:
                lost_leading |= rank < 4
                log.debug("%s", exc)
                continue
            new_tracks.append(nt)
            new_slopes.append((nt.mu - t.mu) / (s1 - s0))
        if pair.d != 0 and (step == 1 or step % guard_every == 0 or lost_leading):
            guard = delayed_spectrum(pair, s1, k=k, p=p, m=m)
            for z, v in zip(guard.eigenvalues, guard.vectors):
                if not any(_same(z, t.mu) for t in new_tracks):
                    new_tracks.append(_Track(z, v))
                    new_slopes.append(0.0)
        uniq, usl = [], []
        for t, sl in sorted(zip(new_tracks, new_slopes), key=lambda q: -q[0].mu.real):
            if any(_same(t.mu, u.mu) for u in uniq):
                continue
            uniq.append(t)
            usl.append(sl)
        tracks, slopes = uniq[:k], usl[:k]
        if pair.d != 0:
            for t in tracks:
                if t.mu.real > 0:
                    c = _locate_crossing(pair, t, s0, s1, xtol)
                    if c is not None:
                        crossings.append(c)
        ev = np.array([t.mu for t in tracks])
        r = SpectrumResult(float(s1), ev, _count(ev), vectors=[t.psi for t in tracks])
        here = [c for c in crossings if s0 < c.sigma <= s1]
        if here:
            c = min(here, key=lambda c: c.sigma)
            r.crossing_sigma, r.crossing_omega, r.dmu_dsigma = c.sigma, c.omega, c.dmu_dsigma
        results.append(r)
    results[-1].crossings = sorted(crossings, key=lambda c: c.sigma)
    return results


def _locate_crossing(pair, t: _Track, s0, s1, xtol) -> Crossing | None:
    """Crossing of the eigenvalue ``t`` (known at ``s1``) inside ``(s0, s1]``, if any."""
    cache = {s1: t}

    def track_to(s):
        near = min(cache, key=lambda a: abs(a - s))
        tr = _step_track(pair, cache[near], near, s, 0.0)
        cache[s] = tr
        return tr

    try:
        if track_to(s0).mu.real > 0:
            return None
        sc = brentq(lambda s: track_to(s).mu.real, s0, s1, xtol=xtol, rtol=4 * np.finfo(float).eps)
        tr = track_to(sc)
        mu, psi, row = newton_eigenpair(pair, sc, tr.mu, tr.psi)
    except (ValueError, NewtonLostEigenvalue):
        return None
    dmu, xi = dmu_dsigma(pair, sc, mu, psi)
    cond = float(np.linalg.cond(bordered_jacobian(pair, sc, mu, psi, row).toarray()))
    return Crossing(float(sc), float(abs(mu.imag)), complex(dmu), complex(xi), cond)


def unstable_count_profile(results: list) -> list:
    """``[(sigma, count), ...]``; each change in count must be ``+2``."""
    prof = [(r.sigma, r.unstable_count) for r in results]
    for (sa, ca), (sb, cb) in zip(prof, prof[1:]):
        if cb != ca and cb - ca != 2:
            raise CountJumpNotTwo(f"unstable count jumps {ca} -> {cb} on ({sa:.6g}, {sb:.6g}]")
    return prof
