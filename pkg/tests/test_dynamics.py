import math

import numpy as np
import pytest

from cases import HOPF_D, cos_model, hopf_case
from memdiff.dynamics import (
    Classification,
    HistoryBuffer,
    Trajectory,
    classify,
    default_dt,
    integrate,
    mass_balance_check,
)
from memdiff.errors import ConfigError, HistoryUnderrun, StepUnstable
from memdiff.grid import Field, Grid1D


def test_zero_history_stays_zero():
    g = Grid1D(1.0, 32)
    model = cos_model(HOPF_D, sigma=1.0, lam=5.0)
    tr = integrate(model, Field(g, np.zeros(g.n_nodes)), 5.0, dt=0.05, audit=True)
    assert np.all(np.asarray(tr.final) == 0)
    assert np.all(tr.max == 0) and np.all(tr.mean == 0)
    assert mass_balance_check(tr) == 0


def test_no_delay_converges_to_the_steady_state():
    case = hopf_case(HOPF_D, 64, 0.05)
    u_star = np.asarray(case.state.u_star)
    model = case.model.replace(sigma=0.0, lam=case.lam)
    u0 = Field(case.eig.grid, u_star + 1e-2 * case.eig.phi)
    tr = integrate(model, u0, 300.0, dt=0.05, u_star=u_star, snapshot_times=(1.0, 300.0))
    assert tr.classification is Classification.ConvergedToSteady
    assert np.max(np.abs(np.asarray(tr.final) - u_star)) < 1e-4
    assert tr.min_value > 0
    assert set(tr.snapshots) == {1.0, 300.0}
    assert np.array_equal(tr.snapshots[300.0], np.asarray(tr.final))
    assert tr.probe_x == (0.0, 0.5, 1.0)
    assert np.array_equal(tr.probes[-1], np.asarray(tr.final)[[0, 32, 64]])


def test_short_delay_stays_positive_and_stable():
    case = hopf_case(HOPF_D, 64, 0.05)
    sigma = 0.5 * case.hopf.sigma_ladder[0]
    model = case.model.replace(sigma=sigma, lam=case.lam)
    u0 = Field(case.eig.grid, np.asarray(case.state.u_star) + 1e-3 * case.eig.phi)
    tr = integrate(model, u0, 600.0, u_star=case.state.u_star, audit=True)
    assert tr.min_value > 0
    assert tr.deviation[-1] < tr.deviation[0]
    h = case.eig.grid.h
    assert mass_balance_check(tr) < tr.dt**2 + h**2
    assert np.max(tr.mass_defect[len(tr.mass_defect) // 2 :]) < 1e-8


def test_history_buffer():
    hb = HistoryBuffer(np.array([1.0, 2.0]), sigma=1.0, dt=0.25)
    assert np.array_equal(hb.lookup(-0.5), [1.0, 2.0])
    for k in range(1, 12):
        hb.push(np.array([k, 2.0 * k]))
    assert hb.t_last == pytest.approx(10 * 0.25)
    assert np.allclose(hb.lookup(2.0), [9.0, 18.0])
    assert np.allclose(hb.lookup(2.125), [9.5, 19.0])
    with pytest.raises(HistoryUnderrun):
        hb.lookup(0.25)
    with pytest.raises(HistoryUnderrun):
        hb.lookup(3.0)


def test_default_dt_resolves_the_delay():
    g = Grid1D(1.0, 64)
    for sigma in (0.3, 1.0, 7.3, 250.0):
        dt = default_dt(cos_model(HOPF_D, sigma=sigma), g, 1000.0)
        assert dt <= sigma / 64 + 1e-15 and dt <= 0.05
        assert abs(sigma / dt - round(sigma / dt)) < 1e-9
    assert default_dt(cos_model(HOPF_D), g, 10.0) == pytest.approx(0.01)


def test_invalid_steps():
    g = Grid1D(1.0, 16)
    u0 = Field(g, np.full(g.n_nodes, 0.1))
    with pytest.raises(ConfigError):
        integrate(cos_model(HOPF_D, sigma=0.01, lam=5.0), u0, 1.0, dt=0.1)
    with pytest.raises(ConfigError):
        integrate(cos_model(HOPF_D, lam=5.0), u0, 1.0, dt=-0.1)
    with pytest.raises(TypeError):
        integrate(cos_model(HOPF_D, lam=5.0), np.asarray(u0), 1.0)
    with pytest.raises(StepUnstable):
        integrate(cos_model(HOPF_D, lam=5.0), Field(g, np.full(g.n_nodes, np.nan)), 1.0, dt=0.1)
    with pytest.raises(StepUnstable):
        integrate(cos_model(HOPF_D, lam=5.0), Field(g, np.full(g.n_nodes, 2.0)), 1.0, dt=0.1, max_value=1.0)


def _synthetic(signal, times, deviation=None):
    n = len(times)
    probes = np.column_stack([signal, signal, signal])
    g = Grid1D(1.0, 4)
    return Trajectory(times, signal, signal, probes, (0.0, 0.5, 1.0), Field(g, np.zeros(5)), deviation=deviation)


def test_classify_synthetic_signals():
    t = np.linspace(0, 200, 20001)
    tr = classify(_synthetic(1 + 0.1 * np.sin(2 * math.pi * t / 7.0), t))
    assert tr.classification is Classification.SustainedOscillation
    assert tr.period == pytest.approx(7.0, rel=1e-3)
    assert tr.amplitude == pytest.approx(0.2, rel=1e-3)
    dev = 0.1 * np.exp(-0.2 * t)
    tr = classify(_synthetic(1 + dev * np.sin(t), t, deviation=dev))
    assert tr.classification is Classification.ConvergedToSteady
    assert tr.period is None and tr.amplitude is None
    grow = 1e-3 * np.exp(0.02 * t)
    tr = classify(_synthetic(1 + grow * np.sin(t), t, deviation=grow))
    assert tr.classification is Classification.Undetermined
    bad = np.ones_like(t)
    bad[-1] = np.nan
    assert classify(_synthetic(bad, t)).classification is Classification.Diverged


def test_mass_balance_requires_audit():
    g = Grid1D(1.0, 16)
    tr = integrate(cos_model(lam=5.0), Field(g, np.zeros(g.n_nodes)), 1.0, dt=0.1)
    with pytest.raises(ValueError):
        mass_balance_check(tr)
