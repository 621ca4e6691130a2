import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cases import slopes
from memdiff.grid import Field, Grid1D, boundary_sum, integrate, laplacian, memory_flux_divergence

finite = st.floats(-10, 10, allow_nan=False)


def test_grid_basics():
    g = Grid1D(2.0, 8)
    assert g.n_nodes == 9
    assert g.h == pytest.approx(0.25)
    assert np.all(np.diff(g.x) > 0)
    assert np.allclose(np.diff(g.x), g.h)
    assert g.x[0] == 0.0 and g.x[-1] == 2.0
    assert g.integrate(np.ones(g.n_nodes)) == 2.0


@pytest.mark.parametrize("length, n", [(0.0, 8), (-1.0, 8), (1.0, 1), (1.0, 2.5)])
def test_grid_rejects_bad_input(length, n):
    with pytest.raises(ValueError):
        Grid1D(length, n)


def test_integrate_examples():
    assert integrate(Field(Grid1D(1.0, 10), np.ones(11))) == pytest.approx(1.0, abs=1e-15)
    for n in (3, 17, 64):
        g = Grid1D(1.0, n)
        assert integrate(Field(g, g.x)) == pytest.approx(0.5, abs=1e-15)
    g = Grid1D(1.0, 64)
    assert abs(integrate(Field(g, g.x**2)) - 1 / 3) < 1e-4


@pytest.mark.parametrize("q, expected", [((1, 1), 2), ((0, 0), 0), ((-0.3, 0.7), 0.4)])
def test_boundary_sum(q, expected):
    assert boundary_sum(*q) == pytest.approx(expected)


def test_laplacian_examples():
    g = Grid1D(1.0, 32)
    assert np.allclose(np.asarray(laplacian(Field(g, np.full(g.n_nodes, 3.7)))), 0.0, atol=1e-12)
    # x^2: outward derivative -u'(0) = 0 and u'(1) = 2; the scheme is exact on quadratics
    assert np.allclose(np.asarray(laplacian(Field(g, g.x**2), 0.0, 2.0)), 2.0, atol=1e-9)


def test_laplacian_cos_converges_second_order():
    ns = (32, 64, 128, 256)
    errs = []
    for n in ns:
        g = Grid1D(1.0, n)
        lap = np.asarray(laplacian(Field(g, np.cos(np.pi * g.x))))
        errs.append(np.max(np.abs(lap + np.pi**2 * np.cos(np.pi * g.x))))
    assert np.allclose(-slopes(ns, errs), 2.0, atol=0.05)


def test_memory_flux_examples():
    g = Grid1D(1.0, 32)
    rng = np.random.default_rng(0)
    w = Field(g, rng.random(g.n_nodes))
    assert np.allclose(np.asarray(memory_flux_divergence(Field(g, np.zeros(g.n_nodes)), w, 1.0, 2.0)), 0.0)
    u = Field(g, rng.random(g.n_nodes))
    assert np.allclose(np.asarray(memory_flux_divergence(u, Field(g, np.full(g.n_nodes, 2.0)))), 0.0)


def test_memory_flux_sin_converges_second_order():
    ns = (32, 64, 128, 256)
    errs = []
    for n in ns:
        g = Grid1D(1.0, n)
        s = np.sin(np.pi * g.x)
        exact = (np.pi * np.cos(np.pi * g.x)) ** 2 - np.pi**2 * s**2
        approx = np.asarray(memory_flux_divergence(Field(g, s), Field(g, s), -np.pi, -np.pi))
        errs.append(np.max(np.abs(approx - exact)))
    assert np.allclose(-slopes(ns, errs), 2.0, atol=0.1)


@given(arrays(float, 17, elements=finite), finite, finite)
def test_discrete_divergence_theorem(u, f0, f1):
    g = Grid1D(1.0, 16)
    total = integrate(laplacian(Field(g, u), f0, f1))
    assert total == pytest.approx(f0 + f1, abs=1e-12 * ((1 + np.max(np.abs(u))) / g.h + abs(f0) + abs(f1)))


@given(arrays(float, 17, elements=finite), arrays(float, 17, elements=finite), finite, finite)
def test_memory_flux_integrates_to_boundary_flux(u, w, f0, f1):
    g = Grid1D(1.0, 16)
    total = integrate(memory_flux_divergence(Field(g, u), Field(g, w), f0, f1))
    scale = (1 + np.max(np.abs(u))) * (1 + np.max(np.abs(w)) + abs(f0) + abs(f1)) / g.h
    assert total == pytest.approx(u[0] * f0 + u[-1] * f1, abs=1e-11 * scale)


@given(
    arrays(float, 9, elements=finite),
    arrays(float, 9, elements=finite),
    arrays(float, 9, elements=finite),
    finite,
)
def test_operators_are_linear(a, b, w, c):
    g = Grid1D(1.0, 8)
    A, B, W = Field(g, a), Field(g, b), Field(g, w)
    lhs = np.asarray(laplacian(A + B * c))
    rhs = np.asarray(laplacian(A)) + c * np.asarray(laplacian(B))
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(rhs).max()))
    lhs = np.asarray(memory_flux_divergence(A + B * c, W))
    rhs = np.asarray(memory_flux_divergence(A, W)) + c * np.asarray(memory_flux_divergence(B, W))
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(rhs).max()))
    lhs = np.asarray(memory_flux_divergence(W, A + B * c))
    rhs = np.asarray(memory_flux_divergence(W, A)) + c * np.asarray(memory_flux_divergence(W, B))
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(rhs).max()))


def test_field_invariants():
    g, g2 = Grid1D(1.0, 8), Grid1D(1.0, 16)
    with pytest.raises(ValueError):
        Field(g, np.zeros(5))
    with pytest.raises(ValueError):
        Field(g, np.zeros(9)) + Field(g2, np.zeros(17))
    f = Field(g, np.arange(9.0))
    assert np.allclose(np.asarray(f * 2 - f), np.arange(9.0))
    assert f.integral() == pytest.approx(g.integrate(np.arange(9.0)))
