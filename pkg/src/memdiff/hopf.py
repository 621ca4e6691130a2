"""Closed-form Hopf data for the branch leaving the zero solution.

Near ``lam1`` the critical eigenvalue satisfies, to leading order in the
branch amplitude ``theta`` (written ``amp`` below),

    mu = amp * (kappa/2 - kappa0) + amp * kappa0 * exp(-mu * sigma),

so purely imaginary roots ``mu = i amp delta`` require
``F(delta, phase) = -i delta + kappa/2 - kappa0 + exp(-i phase) kappa0 = 0``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import AmplitudeZero, OutOfRegime, RegimeError
from .gamma0 import BifCoefficients

__all__ = [
    "HopfData",
    "Gamma0Stability",
    "F",
    "hopf_condition",
    "crossing_data",
    "xi_n_limit",
    "transversality_sign",
    "classify_gamma0_stability",
    "amplitude_from_lambda",
]


class Gamma0Stability(enum.Enum):
    Stable = "Stable"
    Unstable = "Unstable"
    HopfPoint = "HopfPoint"


@dataclass(frozen=True)
class HopfData:
    hopf_possible: bool
    delta_star: float
    theta_star: float
    omega: float
    sigma_ladder: tuple
    amplitude: float
    transversality: tuple = ()
    xi_limit: tuple = ()

    @property
    def period(self) -> float:
        return 2 * math.pi / self.omega

    def as_dict(self) -> dict:
        return {
            "hopf_possible": self.hopf_possible,
            "delta_star": self.delta_star,
            "theta_star": self.theta_star,
            "omega": self.omega,
            "amplitude": self.amplitude,
            "sigma_ladder": list(self.sigma_ladder),
            "transversality": list(self.transversality),
            "xi_limit": [[z.real, z.imag] for z in self.xi_limit],
        }


def F(delta, phase, kappa0, kappa):
    return -1j * delta + kappa / 2 - kappa0 + np.exp(-1j * phase) * kappa0


def _parts(coeffs):
    if isinstance(coeffs, BifCoefficients):
        return coeffs.kappa0, coeffs.kappa1, coeffs.kappa2, coeffs.kappa
    k0, k1, k2 = coeffs
    return k0, k1, k2, 2 * k0 + 2 * k1 + k2


def hopf_condition(coeffs) -> bool:
    """``4 kappa0 = kappa != 0`` or ``kappa (4 kappa0 - kappa) > 0``.

    The equivalent split form ``4 kappa0^2 > (2 kappa1 + kappa2)^2`` (strict
    case) is evaluated too and must agree.
    """
    k0, k1, k2, kappa = _parts(coeffs)
    c = 2 * k1 + k2
    scale = 1.0 + abs(k0) + abs(k1) + abs(k2)
    # the equality clause holds exactly when 2 kappa0 = 2 kappa1 + kappa2
    boundary = abs(2 * k0 - c) <= 1e-12 * scale and abs(kappa) > 1e-12 * scale
    strict = kappa * (4 * k0 - kappa) > 0
    split = 4 * k0**2 - c**2 > 0 if not boundary else True
    if strict != split and not boundary:
        # kappa (4 kappa0 - kappa) = 4 kappa0^2 - c^2 exactly; a mismatch is round-off
        margin = abs(kappa * (4 * k0 - kappa))
        if margin > 1e-12 * scale**2:
            raise RuntimeError("inconsistent Hopf condition forms")
    return bool(boundary or strict)


def amplitude_from_lambda(coeffs: BifCoefficients, lam: float) -> float:
    """Leading-order branch amplitude ``2 rho (lam1 - lam) / kappa``."""
    return 2.0 * coeffs.rho * (coeffs.lambda1 - lam) / coeffs.kappa


def crossing_data(coeffs, amplitude: float, n_max: int = 3) -> HopfData:
    """``delta*``, ``theta*`` in [0, 2 pi), ``omega`` and the delay ladder."""
    k0, _, _, kappa = _parts(coeffs)
    if amplitude == 0:
        raise AmplitudeZero("branch amplitude is zero (lam = lam1)")
    if not hopf_condition(coeffs):
        raise OutOfRegime("kappa (4 kappa0 - kappa) <= 0: no purely imaginary root")
    delta = math.copysign(math.sqrt(max(kappa * (4 * k0 - kappa), 0.0)) / 2, amplitude)
    # root of F: exp(i theta) = (kappa0 - kappa/2 - i delta) / kappa0
    theta = math.atan2(-delta / k0, (k0 - kappa / 2) / k0) % (2 * math.pi)
    omega = amplitude * delta
    ladder = tuple((theta + 2 * n * math.pi) / omega for n in range(n_max + 1))
    xis = tuple(xi_n_limit((k0, kappa), n, delta, theta) for n in range(n_max + 1))
    trans = tuple(transversality_sign(delta, xi) for xi in xis)
    return HopfData(True, delta, theta, omega, ladder, float(amplitude), trans, xis)


def xi_n_limit(coeffs, n: int, delta: float | None = None, theta: float | None = None) -> complex:
    """``1 + ((theta* + 2 n pi) / delta*) (kappa0 - kappa/2 + i delta*)``."""
    if isinstance(coeffs, BifCoefficients):
        k0, kappa = coeffs.kappa0, coeffs.kappa
    else:
        k0, kappa = coeffs
    if delta is None or theta is None:
        raise ValueError("delta and theta are required")
    if theta + 2 * n * math.pi == 0:
        return complex(1.0)
    return 1.0 + ((theta + 2 * n * math.pi) / delta) * complex(k0 - kappa / 2, delta)


def transversality_sign(delta: float, xi: complex) -> float:
    """Limit of ``(1/amp^2) dRe(mu)/dsigma`` at a crossing: ``delta*^2 / |Xi|^2``."""
    return float(delta**2 / abs(xi) ** 2)


def classify_gamma0_stability(coeffs: BifCoefficients, lam: float, lambda1: float, sigma: float, hopf: HopfData | None = None, rtol: float = 1e-9):
    """Stability of the bifurcating steady state near ``lam1`` at delay ``sigma``.

    Returns ``(label, predicted_unstable_count)``.
    """
    side = coeffs.rho * (lam - lambda1)
    if side < 0:
        return Gamma0Stability.Unstable, None
    if side == 0:
        raise OutOfRegime("lam = lam1")
    k0, kappa = coeffs.kappa0, coeffs.kappa
    if kappa * (4 * k0 - kappa) < 0:
        return Gamma0Stability.Stable, 0
    if not hopf_condition(coeffs):
        raise OutOfRegime("neither the no-Hopf nor the Hopf clause applies")
    if hopf is None:
        try:
            hopf = crossing_data(coeffs, amplitude_from_lambda(coeffs, lam))
        except RegimeError as exc:
            raise OutOfRegime(str(exc)) from exc
    ladder = hopf.sigma_ladder
    s0 = ladder[0]
    if abs(sigma - s0) <= rtol * s0:
        return Gamma0Stability.HopfPoint, 0
    if sigma < s0:
        return Gamma0Stability.Stable, 0
    spacing = 2 * math.pi / hopf.omega
    n = math.floor((sigma - s0) / spacing - rtol)  # sigma in (sigma_n, sigma_{n+1}]
    return Gamma0Stability.Unstable, 2 * (n + 1)
