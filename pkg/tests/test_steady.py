import numpy as np
import pytest

from cases import HOPF_D, cos_model, eigen_and_coeffs, mean_one_model, richardson
from memdiff.dynamics import Classification, integrate
from memdiff.errors import EmptyBranch, NegativeSolution, NewtonDiverged
from memdiff.gamma1 import analyze_gamma1, find_u1
from memdiff.grid import Field, Grid1D
from memdiff.model import logistic_heterogeneous, saturating_bistable_boundary
from memdiff.steady import (
    continue_branch_fold,
    continue_branch_gamma0,
    continue_branch_gamma1,
    jacobian,
    residual,
    scaled_residual,
    solve_steady,
    solve_steady_amplitude,
)


def test_zero_guess_is_a_solution():
    g = Grid1D(1.0, 64)
    st = solve_steady(cos_model(HOPF_D), 3.0, Field(g, np.zeros(g.n_nodes)))
    assert st.newton_iterations == 0 and st.residual_norm == 0 and np.all(st.u == 0)


def test_constants_solve_at_lam_zero():
    g = Grid1D(1.0, 64)
    for c in (0.3, 2.0):
        st = solve_steady(cos_model(HOPF_D), 0.0, Field(g, np.full(g.n_nodes, c)))
        assert st.residual_norm == 0 and np.all(st.u == c)


def _fd_jacobian(model, lam, u, grid, eps=1e-6):
    J = np.empty((len(u), len(u)))
    for j in range(len(u)):
        e = np.zeros_like(u)
        e[j] = eps * max(1.0, abs(u[j]))
        J[:, j] = (residual(model, lam, u + e, grid) - residual(model, lam, u - e, grid)) / (2 * e[j])
    return J


@pytest.mark.parametrize(
    "model",
    [
        cos_model(HOPF_D),
        saturating_bistable_boundary({"sum": [{"cos": 1}, 0.2]}, 1.5, {"poly": [0.5, 0.2]}, 0.3, r0=-1.0, r1=-0.5, d=2.0),
    ],
)
def test_jacobian_matches_finite_differences(model):
    g = Grid1D(1.0, 24)
    rng = np.random.default_rng(5)
    for _ in range(3):
        u = 0.2 + 0.5 * rng.random(g.n_nodes)
        J = jacobian(model, 4.0, u, g).toarray()
        Jfd = _fd_jacobian(model, 4.0, u, g)
        assert np.max(np.abs(J - Jfd)) <= 1e-5 * np.max(np.abs(J))


@pytest.fixture(scope="module")
def branch():
    model, eig, coeffs = eigen_and_coeffs(HOPF_D, 128)
    lam1 = eig.lambda1
    return model, eig, coeffs, continue_branch_gamma0(model, eig, coeffs, (1.01 * lam1, 1.3 * lam1), steps=8)


def test_gamma0_branch_contract(branch):
    model, eig, coeffs, b = branch
    assert b.origin == "Gamma0" and len(b) == 8
    assert np.all(np.diff(b.lams) > 0)
    for st, amp in zip(b, b.amplitudes):
        assert st.residual_norm < 1e-10
        assert np.all(st.u >= 0)
        assert amp == pytest.approx(eig.grid.inner(st.u, eig.phi))
        assert scaled_residual(residual(model, st.lam, st.u, eig.grid), eig.grid) < 1e-10


def test_green_identity_at_convergence(branch):
    model, eig, _, b = branch
    g = eig.grid
    for st in b:
        u = st.u
        q0, q1 = model.boundary_flux(u[0], u[-1], st.lam)
        interior = g.integrate(st.lam * u * model.f(g.x, u))
        boundary = (1 + model.d * u[0]) * q0 + (1 + model.d * u[-1]) * q1
        assert interior == pytest.approx(-boundary, abs=1e-8)


def test_wrong_side_is_empty(branch):
    model, eig, coeffs, _ = branch
    with pytest.raises(EmptyBranch):
        continue_branch_gamma0(model, eig, coeffs, (0.8 * eig.lambda1, 0.99 * eig.lambda1))
    with pytest.raises(EmptyBranch):
        continue_branch_gamma0(model, eig, coeffs, (0.9 * eig.lambda1, 1.1 * eig.lambda1))


def test_even_profile_gives_even_branch():
    from memdiff.eigen import principal_eigenpair
    from memdiff.gamma0 import compute_coefficients

    model = logistic_heterogeneous({"sum": [{"cos": 2}, -0.1]}, r0=-1.0, r1=-1.0, d=5.0)
    eig = principal_eigenpair(model, Grid1D(1.0, 128))
    coeffs = compute_coefficients(model, eig)
    lam1 = eig.lambda1
    side = (1.05, 1.2) if coeffs.rho * coeffs.kappa < 0 else (0.8, 0.95)
    b = continue_branch_gamma0(model, eig, coeffs, (side[0] * lam1, side[1] * lam1), steps=4)
    for st in b:
        assert np.max(np.abs(st.u - st.u[::-1])) < 1e-8


def test_fold_sweep_reproduces_the_branch(branch):
    model, eig, coeffs, b = branch
    st = b[0]
    amp = b.amplitudes[0]
    fold = continue_branch_fold(model, eig, coeffs, [amp])
    assert fold.origin == "Fold"
    assert fold[0].lam == pytest.approx(st.lam, rel=1e-8)
    assert np.max(np.abs(fold[0].u - st.u)) < 1e-8


def test_amplitude_constrained_solve_hits_its_amplitude(branch):
    model, eig, coeffs, b = branch
    st = solve_steady_amplitude(model, 0.02, eig.phi, Field(eig.grid, 0.02 * eig.phi), eig.lambda1)
    assert eig.grid.inner(st.u, eig.phi) == pytest.approx(0.02, abs=1e-10)
    assert st.residual_norm < 1e-10


def test_positivity_flag_and_divergence():
    g = Grid1D(1.0, 64)
    model, eig, coeffs = eigen_and_coeffs(HOPF_D, 64)
    lam = 0.99 * eig.lambda1
    th = 2 * coeffs.rho * (eig.lambda1 - lam) / coeffs.kappa  # negative branch
    guess = Field(g, th * eig.phi)
    assert solve_steady(model, lam, guess).u.max() < 0
    with pytest.raises(NegativeSolution):
        solve_steady(model, lam, guess, positive=True)
    with pytest.raises(NewtonDiverged):
        solve_steady(model, lam, Field(g, np.full(g.n_nodes, np.nan)))
    with pytest.raises(NewtonDiverged):
        solve_steady(model, 5.0, Field(g, np.full(g.n_nodes, 50.0)), max_iter=2)


def test_matches_long_time_dynamics_without_memory():
    model, eig, coeffs = eigen_and_coeffs(0.0, 64)
    lam = 1.1 * eig.lambda1
    b = continue_branch_gamma0(model, eig, coeffs, (lam, lam), steps=1)
    u_star = b[0].u
    tr = integrate(model.replace(lam=lam), Field(eig.grid, 0.5 * u_star + 0.01), 400.0, dt=0.05, lam=lam, u_star=u_star)
    assert tr.classification is Classification.ConvergedToSteady
    assert np.max(np.abs(np.asarray(tr.final) - u_star)) < 1e-4


def test_gamma1_branch():
    g = Grid1D(1.0, 256)
    model = mean_one_model(d=0.0)
    u1 = find_u1(model, (0.1, 2.0), g)
    data = analyze_gamma1(model, u1, g)
    b = continue_branch_gamma1(model, data, [0.0], g)
    assert b[0].lam == 0.0 and np.all(b[0].u == u1)
    s_vals = (1e-2, 5e-3, 2.5e-3)
    b = continue_branch_gamma1(model, data, list(s_vals) + [-1e-2], g)
    assert b.origin == "GammaU1" and np.all(np.diff(b.lams) > 0)
    for st in b:
        assert st.residual_norm < 1e-10
    by_s = {st.lam: st for st in b}
    slopes_ = [(g.integrate(by_s[s].u) / g.length - u1) / s for s in s_vals]
    assert richardson(slopes_) == pytest.approx(data.eta1, rel=1e-3)
    # the full tangent includes psi*
    st = by_s[2.5e-3]
    tangent = (st.u - u1) / 2.5e-3
    assert np.max(np.abs(tangent - (data.eta1 + np.asarray(data.psi_star)))) < 0.05 * np.max(np.abs(tangent))
