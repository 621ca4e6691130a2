"""Shared fixtures and frozen oracle values for the test suite.

Expensive objects are memoised so that module tests reuse them; acceptance
tests that are timed call the ``build_*`` functions directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from memdiff.eigen import principal_eigenpair
from memdiff.gamma0 import compute_coefficients
from memdiff.grid import Grid1D
from memdiff.hopf import amplitude_from_lambda, crossing_data
from memdiff.model import logistic_heterogeneous
from memdiff.spectrum import assemble_linearization, continue_in_sigma
from memdiff.steady import continue_branch_gamma0

# m(x) = cos(pi x) - 0.2, g = u^2, r0 = r1 = -1
COS_PROFILE = {"sum": [{"cos": 1}, -0.2]}
# mean 1, used for the branch through a constant state at lam = 0
MEAN_ONE_PROFILE = {"sum": [1.0, {"cos": 1, "amp": 0.5}]}

# lambda1 of the cos profile from scripts/oracle_lambda1.py
LAMBDA1_SHOOTING = 4.242557287019
LAMBDA1_FD4096 = 4.242557072061

HOPF_D = 30.0
NO_HOPF_D = 10.0


def cos_model(d: float = 0.0, **kw):
    return logistic_heterogeneous(COS_PROFILE, r0=-1.0, r1=-1.0, d=d, **kw)


def mean_one_model(d: float = 0.0, r0: float = -0.5, r1: float = -0.5):
    return logistic_heterogeneous(MEAN_ONE_PROFILE, r0=r0, r1=r1, d=d)


@lru_cache(maxsize=None)
def eigen_and_coeffs(d: float, n: int):
    model = cos_model(d)
    eig = principal_eigenpair(model, Grid1D(1.0, n))
    return model, eig, compute_coefficients(model, eig)


@dataclass(frozen=True)
class HopfCase:
    model: object
    eig: object
    coeffs: object
    lam: float
    state: object
    amplitude: float
    hopf: object
    pair: object


def build_hopf_case(d: float, n: int, eps: float) -> HopfCase:
    model, eig, coeffs = eigen_and_coeffs(d, n)
    lam = eig.lambda1 * (1 + eps)
    state = continue_branch_gamma0(model, eig, coeffs, (lam, lam), steps=1)[0]
    amp = amplitude_from_lambda(coeffs, lam)
    hopf = crossing_data(coeffs, amp) if coeffs.kappa * (4 * coeffs.kappa0 - coeffs.kappa) > 0 else None
    pair = assemble_linearization(model, state.u_star, lam)
    return HopfCase(model, eig, coeffs, lam, state, amp, hopf, pair)


@lru_cache(maxsize=None)
def hopf_case(d: float, n: int, eps: float) -> HopfCase:
    return build_hopf_case(d, n, eps)


def sweep_two_crossings(case: HopfCase, num: int = 30):
    """Sigma sweep on ``[0, 1.15 sigma_1]`` of the ladder."""
    grid = np.linspace(0.0, 1.15 * case.hopf.sigma_ladder[1], num)
    return continue_in_sigma(case.pair, grid)


@lru_cache(maxsize=None)
def hopf_sweep(d: float, n: int, eps: float):
    return sweep_two_crossings(hopf_case(d, n, eps))


def richardson(values):
    """First-order Richardson limit from the last two of a halving sequence."""
    return 2 * values[-1] - values[-2]


def slopes(hs, errs):
    hs, errs = np.asarray(hs, float), np.asarray(errs, float)
    return np.log(errs[:-1] / errs[1:]) / np.log(hs[:-1] / hs[1:])


# continuous references for cos_model(0.1) from scripts/oracle_coefficients.py
COEFFS_D01 = {
    "rho": 0.174199606447,
    "kappa0": -0.073343287366,
    "kappa1": -4.697851962629,
    "kappa2": -23.517980306653,
    "kappa": -33.060370806643,
}
