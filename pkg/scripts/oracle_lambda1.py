"""Independent references for the principal eigenvalue of the cosine fixture.

f(x, 0) = cos(pi x) - 0.2 on [0, 1], g = u^2 so g_u(0) = 0 and the boundary
law reduces to homogeneous Neumann.  Two references:

* shooting on -phi'' = lam f(x, 0) phi with phi(0) = 1, phi'(0) = 0, root of
  phi'(1; lam) by Brent's method (continuous problem);
* sparse shift-invert eigensolve of the N = 4096 ghost-node pencil.

Usage: python scripts/oracle_lambda1.py
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp
from scipy.optimize import brentq


def f0(x):
    return np.cos(np.pi * x) - 0.2


def end_slope(lam):
    sol = solve_ivp(lambda x, y: [y[1], -lam * f0(x) * y[0]], (0.0, 1.0), [1.0, 0.0], rtol=1e-13, atol=1e-14, method="DOP853")
    return sol.y[1, -1]


def shooting():
    lams = np.linspace(0.5, 10.0, 96)
    vals = [end_slope(v) for v in lams]
    for a, b, fa, fb in zip(lams, lams[1:], vals, vals[1:]):
        if fa * fb < 0:
            return brentq(end_slope, a, b, xtol=1e-14)
    raise RuntimeError("no positive root")


def pencil(n_cells):
    h = 1.0 / n_cells
    n = n_cells + 1
    x = np.linspace(0, 1, n)
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    main = np.full(n, 2.0 / h)
    main[0] = main[-1] = 1.0 / h
    S = sp.diags([np.full(n - 1, -1.0 / h), main, np.full(n - 1, -1.0 / h)], [-1, 0, 1], format="csc")
    M = sp.diags(w * f0(x), format="csc")
    return S, M


def dense_fd(n_cells, guess):
    S, M = pencil(n_cells)
    vals = spla.eigs(S, k=1, M=M, sigma=guess, which="LM", return_eigenvectors=False, tol=1e-14)
    return float(vals[0].real)


if __name__ == "__main__":
    lam_shoot = shooting()
    lam_fd = dense_fd(4096, lam_shoot)
    print(f"shooting   lam1 = {lam_shoot:.12f}")
    print(f"N = 4096   lam1 = {lam_fd:.12f}   rel diff {abs(lam_fd / lam_shoot - 1):.2e}")
