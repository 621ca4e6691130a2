"""Exact first crossings against their small-amplitude predictions.

For the cosine fixture with d = 30 (N = 64) and lam = lam1 (1 + eps), sweeps
sigma past the second predicted crossing and prints, per eps, the relative
gaps of sigma_c, omega_c, Xi and the scaled transversality.  The gaps should
shrink roughly in proportion to eps.

Usage: python scripts/crossing_table.py [eps ...]
"""

import sys

import numpy as np

from memdiff.eigen import principal_eigenpair
from memdiff.gamma0 import compute_coefficients
from memdiff.grid import Grid1D
from memdiff.hopf import amplitude_from_lambda, crossing_data
from memdiff.model import logistic_heterogeneous
from memdiff.spectrum import assemble_linearization, continue_in_sigma
from memdiff.steady import continue_branch_gamma0


def main(eps_values):
    model = logistic_heterogeneous({"sum": [{"cos": 1}, -0.2]}, r0=-1.0, r1=-1.0, d=30.0)
    eig = principal_eigenpair(model, Grid1D(1.0, 64))
    c = compute_coefficients(model, eig)
    print(f"lam1 = {eig.lambda1:.8f}  rho = {c.rho:.6g}  kappa0 = {c.kappa0:.6g}  kappa = {c.kappa:.6g}")
    print(f"{'eps':>7} {'sigma_c':>11} {'pred':>11} {'gap':>7} {'omega gap':>9} {'Xi gap':>7} {'trans gap':>9}")
    for eps in eps_values:
        lam = eig.lambda1 * (1 + eps)
        st = continue_branch_gamma0(model, eig, c, (lam, lam), steps=1)[0]
        amp = amplitude_from_lambda(c, lam)
        h = crossing_data(c, amp)
        pair = assemble_linearization(model, st.u_star, lam)
        res = continue_in_sigma(pair, np.linspace(0.0, 1.15 * h.sigma_ladder[1], 30))
        cr = res[-1].crossings[0]
        gap = lambda a, b: abs(a / b - 1)  # noqa: E731
        trans = cr.dmu_dsigma.real / amp**2
        print(
            f"{eps:7.4f} {cr.sigma:11.4f} {h.sigma_ladder[0]:11.4f} {gap(cr.sigma, h.sigma_ladder[0]):7.3f} "
            f"{gap(cr.omega, h.omega):9.3f} {abs(cr.xi - h.xi_limit[0]) / abs(h.xi_limit[0]):7.3f} "
            f"{gap(trans, h.transversality[0]):9.3f}"
        )


if __name__ == "__main__":
    main([float(a) for a in sys.argv[1:]] or [0.1, 0.05, 0.025])
