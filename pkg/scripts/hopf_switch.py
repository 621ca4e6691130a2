"""Simulations just below and above the first crossing.

Builds the cosine fixture with d = 30 at lam = lam1 (1 + eps), locates the
first crossing sigma_c by continuation, then integrates from u* + 1e-3 phi1
at 0.9 sigma_c and 1.1 sigma_c and prints classification, amplitude and
period against 2 pi / omega_c.  Optionally writes the probe series as CSV.

Usage: python scripts/hopf_switch.py [--n 128] [--eps 1.0] [--T 1500] [--csv DIR]
"""

import argparse
import csv
import math
from pathlib import Path

import numpy as np

from memdiff.dynamics import integrate
from memdiff.eigen import principal_eigenpair
from memdiff.gamma0 import compute_coefficients
from memdiff.grid import Field, Grid1D
from memdiff.model import logistic_heterogeneous
from memdiff.spectrum import assemble_linearization, continue_in_sigma
from memdiff.steady import continue_branch_gamma0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--eps", type=float, default=1.0)
    ap.add_argument("--T", type=float, default=1500.0)
    ap.add_argument("--csv", type=Path, default=None)
    args = ap.parse_args()

    model = logistic_heterogeneous({"sum": [{"cos": 1}, -0.2]}, r0=-1.0, r1=-1.0, d=30.0)
    eig = principal_eigenpair(model, Grid1D(1.0, args.n))
    c = compute_coefficients(model, eig)
    lam = eig.lambda1 * (1 + args.eps)
    steps = max(2, math.ceil(args.eps / 0.08) + 1)
    st = continue_branch_gamma0(model, eig, c, (eig.lambda1 * 1.02, lam), steps=steps)[-1]
    pair = assemble_linearization(model, st.u_star, lam)
    cr = continue_in_sigma(pair, np.linspace(0.0, 4.0, 21))[-1].crossings[0]
    print(f"lam = {lam:.6f}  sigma_c = {cr.sigma:.6f}  omega_c = {cr.omega:.6f}  2 pi / omega_c = {2 * math.pi / cr.omega:.4f}")
    for f in (0.9, 1.1):
        tr = integrate(model.replace(lam=lam, sigma=f * cr.sigma), Field(eig.grid, st.u + 1e-3 * eig.phi), args.T, u_star=st.u)
        print(f"{f:.1f} sigma_c: {tr.classification.value:22s} amplitude {tr.amplitude}  period {tr.period}  final deviation {tr.deviation[-1]:.2e}")
        if args.csv:
            args.csv.mkdir(parents=True, exist_ok=True)
            with open(args.csv / f"probes_{f:.1f}.csv", "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", "u_x0", "u_mid", "u_xL"])
                w.writerows(np.column_stack([tr.times, tr.probes])[::10].tolist())


if __name__ == "__main__":
    main()
