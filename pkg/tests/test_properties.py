"""Randomised invariants that cut across modules."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memdiff.dynamics import HistoryBuffer
from memdiff.eigen import principal_eigenpair, rayleigh_quotient
from memdiff.errors import DenominatorNotPositive
from memdiff.grid import Field, Grid1D
from memdiff.hopf import crossing_data
from memdiff.model import logistic_heterogeneous
from memdiff.steady import residual

G = Grid1D(1.0, 48)


def _model(shift, amp, r, d=0.0):
    return logistic_heterogeneous({"sum": [{"cos": 1, "amp": amp}, -shift]}, r0=-r, r1=-r, d=d)


profiles = st.tuples(st.floats(0.05, 0.8), st.floats(1.0, 3.0), st.floats(0.0, 2.0))


@settings(max_examples=20)
@given(profiles)
def test_principal_pair_for_random_profiles(p):
    shift, amp, r = p
    eig = principal_eigenpair(_model(shift, amp, r), G)
    assert eig.lambda1 > 0 and np.all(eig.phi > 0)
    assert G.inner(eig.phi, eig.phi) == pytest.approx(1.0, abs=1e-12)
    assert rayleigh_quotient(_model(shift, amp, r), eig.phi1) == pytest.approx(eig.lambda1, rel=1e-9)


@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4), st.floats(0.1, 10.0))
def test_rayleigh_quotient_is_scale_invariant(coefs, c):
    u = np.polynomial.polynomial.polyval(G.x, coefs) + 3.0 * (G.x < 0.3)
    try:
        q = rayleigh_quotient(_model(0.2, 1.0, 1.0), Field(G, u))
    except DenominatorNotPositive:
        return
    assert rayleigh_quotient(_model(0.2, 1.0, 1.0), Field(G, c * u)) == pytest.approx(q, rel=1e-10)


@given(profiles, st.floats(0.0, 50.0), st.floats(0.1, 20.0))
def test_zero_is_always_a_steady_state(p, d, lam):
    assert np.all(residual(_model(*p, d=d), lam, np.zeros(G.n_nodes), G) == 0)


@given(st.floats(0.5, 3.0), st.floats(-1.0, 1.0), st.floats(0.01, 1.0))
def test_ladder_scales_inversely_with_amplitude(k0, k1, amp):
    coeffs = (k0, k1, 0.0)
    kappa = 2 * k0 + 2 * k1
    if not kappa * (4 * k0 - kappa) > 1e-6:
        return
    a, b = crossing_data(coeffs, amp), crossing_data(coeffs, 2 * amp)
    assert b.omega == pytest.approx(2 * a.omega, rel=1e-12)
    assert np.allclose(np.array(b.sigma_ladder) * 2, a.sigma_ladder, rtol=1e-12)


@given(st.floats(0.1, 3.0), st.integers(1, 8), st.integers(0, 40))
def test_history_lookup_reproduces_stored_snapshots(sigma, per, extra):
    dt = sigma / per
    hb = HistoryBuffer(np.zeros(2), sigma, dt)
    for k in range(per + extra + 1):
        hb.push(np.array([k, -k], dtype=float))
    t = hb.t_last
    back = hb.lookup(t - sigma)
    k = round((t - sigma) / dt)
    assert np.allclose(back, [k, -k]) if t - sigma > 0 else np.allclose(back, 0.0)
