import numpy as np
import pytest

from cases import HOPF_D, eigen_and_coeffs, hopf_case, hopf_sweep
from memdiff.errors import CountJumpNotTwo
from memdiff.grid import Field
from memdiff.spectrum import (
    SpectrumResult,
    assemble_linearization,
    continue_in_sigma,
    delay_free_spectrum,
    delayed_spectrum,
    dmu_dsigma,
    newton_eigenpair,
    unstable_count_profile,
)
from memdiff.steady import residual, solve_steady


def _zero_pair(d, n=128):
    model, eig, _ = eigen_and_coeffs(d, n)
    g = eig.grid
    return model, eig, assemble_linearization(model, Field(g, np.zeros(g.n_nodes)), eig.lambda1)


def test_no_memory_means_no_delayed_part():
    _, _, pair = _zero_pair(0.0)
    assert pair.B.nnz == 0 or np.max(np.abs(pair.B.data)) == 0


@pytest.mark.parametrize("d", [0.0, HOPF_D])
def test_zero_state_reproduces_the_principal_eigenproblem(d):
    _, eig, pair = _zero_pair(d)
    # memory terms vanish at u* = 0, so (A + B) phi1 = 0 at lam1
    r = (pair.A + pair.B) @ eig.phi
    assert np.max(np.abs(r)) < 1e-8 * np.max(np.abs(eig.grid.neumann_laplacian @ eig.phi))


def test_zero_state_rightmost_is_zero():
    _, _, pair = _zero_pair(0.0)
    assert abs(delay_free_spectrum(pair, k=3).rightmost) < 1e-8


def test_linearization_matches_residual_derivative():
    case = hopf_case(HOPF_D, 64, 0.05)
    u = np.asarray(case.state.u_star)
    g = case.eig.grid
    rng = np.random.default_rng(2)
    J = (case.pair.A + case.pair.B).toarray()
    for _ in range(5):
        w = rng.normal(size=g.n_nodes)
        e = 1e-6
        fd = (residual(case.model, case.lam, u + e * w, g) - residual(case.model, case.lam, u - e * w, g)) / (2 * e)
        assert np.max(np.abs(J @ w - fd)) <= 1e-5 * np.max(np.abs(fd))


def _branch_state(eps):
    model, eig, c = eigen_and_coeffs(HOPF_D, 128)
    lam = eig.lambda1 * (1 + eps)
    th = 2 * c.rho * (eig.lambda1 - lam) / c.kappa
    guess = th * eig.phi + 0.5 * th**2 * np.asarray(c.sigma_field)
    st = solve_steady(model, lam, Field(eig.grid, guess))
    return assemble_linearization(model, st.u_star, lam)


def test_delay_free_counts_on_both_sides():
    _, _, c = eigen_and_coeffs(HOPF_D, 128)
    assert c.rho > 0
    assert delay_free_spectrum(_branch_state(0.02)).unstable_count == 0
    assert delay_free_spectrum(_branch_state(-0.02)).unstable_count >= 1


def test_conjugate_symmetry_and_ordering():
    case = hopf_case(HOPF_D, 64, 0.05)
    for sigma in (0.0, 100.0, 400.0):
        res = delayed_spectrum(case.pair, sigma, k=10)
        ev = res.all_eigenvalues()
        for z in ev:
            assert np.min(np.abs(ev - np.conj(z))) <= 1e-9 * max(1.0, abs(z))
        assert np.all(np.diff(res.eigenvalues.real) <= 1e-12)
        assert res.unstable_count == int(sum(ev.real > 0))


def test_no_memory_spectrum_is_delay_independent():
    _, _, pair = _zero_pair(0.0, 64)
    results = continue_in_sigma(pair, [0.0, 1.0, 10.0])
    for r in results[1:]:
        assert np.allclose(r.eigenvalues, results[0].eigenvalues, atol=1e-12)
    prof = unstable_count_profile(results)
    assert len({c for _, c in prof}) == 1


@pytest.fixture(scope="module")
def sweep():
    return hopf_case(HOPF_D, 64, 0.05), hopf_sweep(HOPF_D, 64, 0.05)


def test_count_profile_and_crossings(sweep):
    case, results = sweep
    cr = results[-1].crossings
    assert len(cr) == 2
    prof = unstable_count_profile(results)
    for s, n in prof:
        assert n == 2 * sum(1 for c in cr if s > c.sigma)
    assert [n for _, n in prof][0] == 0 and prof[-1][1] == 4
    below = [r for r in results if r.sigma < cr[0].sigma]
    assert below and all(r.unstable_count == 0 for r in below)
    for c in cr:
        assert c.dmu_dsigma.real > 0
        assert np.isfinite(c.condition)
    c0 = cr[0]
    assert c0.sigma == pytest.approx(case.hopf.sigma_ladder[0], rel=0.15)
    assert c0.omega == pytest.approx(case.hopf.omega, rel=0.15)


def test_zero_is_never_an_eigenvalue_along_the_sweep(sweep):
    case, results = sweep
    floor = 1e-3 * abs(case.amplitude) * abs(case.coeffs.kappa)
    for r in results:
        assert np.min(np.abs(r.eigenvalues)) > floor


def test_crossing_derivative_matches_finite_differences(sweep):
    case, results = sweep
    c = results[-1].crossings[0]
    mu, psi, _ = newton_eigenpair(case.pair, c.sigma, 1j * c.omega, results[0].vectors[0])
    h = 1e-3 * c.sigma
    mp, _, _ = newton_eigenpair(case.pair, c.sigma + h, mu, psi)
    mm, _, _ = newton_eigenpair(case.pair, c.sigma - h, mu, psi)
    fd = (mp - mm) / (2 * h)
    assert abs(fd - c.dmu_dsigma) <= 1e-5 * abs(c.dmu_dsigma)
    # recomputed derivative and pairing agree with the stored crossing
    d2, xi2 = dmu_dsigma(case.pair, c.sigma, mu, psi)
    assert abs(d2 * xi2 - c.dmu_dsigma * c.xi) <= 1e-6 * abs(c.dmu_dsigma * c.xi)


def test_asymptotic_limits_near_lambda1():
    near = hopf_case(HOPF_D, 64, 0.025)
    far = hopf_case(HOPF_D, 64, 0.05)
    c_near = hopf_sweep(HOPF_D, 64, 0.025)[-1].crossings[0]
    c_far = hopf_sweep(HOPF_D, 64, 0.05)[-1].crossings[0]
    xi_lim = near.hopf.xi_limit[0]
    assert abs(c_near.xi - xi_lim) < 0.05 * abs(xi_lim)
    t_near = c_near.dmu_dsigma.real / near.amplitude**2
    t_far = c_far.dmu_dsigma.real / far.amplitude**2
    t_lim = near.hopf.transversality[0]
    assert abs(t_near - t_lim) < 0.25 * t_lim
    assert abs(2 * t_near - t_far - t_lim) < 0.05 * t_lim
    assert c_near.omega == pytest.approx(near.hopf.omega, rel=0.15)
    assert abs(c_near.sigma / near.hopf.sigma_ladder[0] - 1) < abs(c_far.sigma / far.hopf.sigma_ladder[0] - 1)


def test_count_jump_other_than_two_is_flagged():
    fake = [SpectrumResult(0.0, np.array([-1.0]), 0), SpectrumResult(1.0, np.array([0.5]), 1)]
    with pytest.raises(CountJumpNotTwo):
        unstable_count_profile(fake)
