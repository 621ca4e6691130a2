"""Continuous reference values of rho and the kappa split for the cosine fixture.

m(x) = cos(pi x) - 0.2 on [0, 1], g = u^2, r0 = r1 = -1, d = 0.1.  Since
g_u(0) = 0 the eigenfunction satisfies homogeneous Neumann conditions, so

    rho    = int phi^2 m
    kappa0 = d int phi (phi phi')' = -d int phi phi'^2
    kappa1 = lam1 int phi^3 f_u(x, 0) = -lam1 int phi^3
    kappa2 = lam1 g_uu(0) (r0 phi(0)^3 + r1 phi(1)^3)

with phi the positive, L2-normalised shooting solution.  Integrals use
adaptive quadrature on the dense ODE output.

Usage: python scripts/oracle_coefficients.py
"""

import numpy as np
from scipy.integrate import quad, solve_ivp

from oracle_lambda1 import f0, shooting

D, R0, R1 = 0.1, -1.0, -1.0


def main():
    lam1 = shooting()
    sol = solve_ivp(lambda x, y: [y[1], -lam1 * f0(x) * y[0]], (0.0, 1.0), [1.0, 0.0],
                    rtol=1e-13, atol=1e-14, method="DOP853", dense_output=True)
    phi = lambda x: sol.sol(x)[0]  # noqa: E731
    dphi = lambda x: sol.sol(x)[1]  # noqa: E731
    opts = dict(epsabs=1e-14, epsrel=1e-13, limit=200)
    c = 1.0 / np.sqrt(quad(lambda x: phi(x) ** 2, 0, 1, **opts)[0])
    rho = c**2 * quad(lambda x: phi(x) ** 2 * f0(x), 0, 1, **opts)[0]
    kappa0 = -D * c**3 * quad(lambda x: phi(x) * dphi(x) ** 2, 0, 1, **opts)[0]
    kappa1 = -lam1 * c**3 * quad(lambda x: phi(x) ** 3, 0, 1, **opts)[0]
    kappa2 = lam1 * 2.0 * c**3 * (R0 * phi(0.0) ** 3 + R1 * phi(1.0) ** 3)
    kappa = 2 * kappa0 + 2 * kappa1 + kappa2
    for name, v in [("lambda1", lam1), ("rho", rho), ("kappa0", kappa0), ("kappa1", kappa1), ("kappa2", kappa2), ("kappa", kappa)]:
        print(f"{name:8s} {v:.12f}")


if __name__ == "__main__":
    main()
