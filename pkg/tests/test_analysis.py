"""Analysis-instrument oracles: PE index against the analytic rotating-Phi
integral, Q positivity, rate fitting, and the manifold-probe accessor."""

import numpy as np
import pytest

from kreflux import (fit_rate, regression_residual, manifold_residual, pe_index,
                     q_positivity, run_scenario, settling_time, sym_eig_2x2)

RNG = np.random.default_rng(3)


def test_sym_eig_matches_lapack():
    for _ in range(200):
        a11, a12, a22 = RNG.uniform(-5, 5, 3)
        lo, hi = sym_eig_2x2(a11, a12, a22)
        ref = np.linalg.eigvalsh(np.array([[a11, a12], [a12, a22]]))
        assert lo == pytest.approx(ref[0], abs=1e-12)
        assert hi == pytest.approx(ref[1], abs=1e-12)


def test_pe_rotating_phi_analytic():
    # Phi = (cos wt, sin wt): integral over one period is (pi/w)*I exactly
    w = 2 * np.pi * 10.0
    dt = 1e-3
    t = np.arange(0.0, 1.0 + dt / 2, dt)
    phi = np.stack([np.cos(w * t), np.sin(w * t)], axis=1)
    rep = pe_index(phi, T=2 * np.pi / w, dt=dt)
    assert abs(rep.delta_hat - np.pi / w) / (np.pi / w) < 1e-3
    assert rep.sup_phi == pytest.approx(1.0, rel=1e-12)
    assert rep.is_pe


def test_pe_constant_phi_is_rank_one():
    phi = np.tile([1.0, 0.0], (500, 1))
    rep = pe_index(phi, T=0.1, dt=1e-3)
    assert abs(rep.delta_hat) < 1e-12
    assert not rep.is_pe


def test_pe_series_too_short():
    with pytest.raises(ValueError):
        pe_index(np.zeros((5, 2)), T=1.0, dt=1e-3)


def test_q_positivity_trivials():
    t = np.linspace(0, 1, 101)
    assert q_positivity(np.zeros((101, 3)), t, 0.5) == 0.0
    # constant-Phi closed form: Q(t) = (1-exp(-a t))*Phi0 Phi0^T is rank one,
    # so the smallest eigenvalue stays exactly zero
    a = 20 * np.pi
    phi0 = np.array([1.0, 2.0])
    scale = 1.0 - np.exp(-a * t)
    q = np.stack([scale * phi0[0] ** 2, scale * phi0[0] * phi0[1],
                  scale * phi0[1] ** 2], axis=1)
    assert abs(q_positivity(q, t, 5.0 / a)) < 1e-12
    with pytest.raises(ValueError):
        q_positivity(q, t, 2.0)


def test_fit_rate_pure_exponential():
    t = np.linspace(0.0, 2.0, 2001)
    fit = fit_rate(np.exp(-3.0 * t), t)
    assert fit.rate == pytest.approx(3.0, abs=1e-6)
    assert fit.r_squared > 0.999999


def test_fit_rate_constant_series():
    t = np.linspace(0.0, 1.0, 500)
    fit = fit_rate(np.full_like(t, 0.7), t)
    assert abs(fit.rate) < 1e-9


def test_fit_rate_clips_nonpositive():
    t = np.linspace(0.0, 1.0, 100)
    e = np.exp(-2 * t)
    e[50] = 0.0
    with pytest.warns(UserWarning):
        fit = fit_rate(e, t)
    assert np.isfinite(fit.rate)


def test_fit_rate_envelope_handles_oscillation():
    t = np.linspace(0.0, 2.0, 20001)
    err = np.abs(np.cos(2 * np.pi * 40 * t)) * np.exp(-4.0 * t) + 1e-300
    fit = fit_rate(err, t, envelope_period=1.0 / 40)
    assert fit.rate == pytest.approx(4.0, rel=0.02)


def test_settling_time_cases():
    t = np.linspace(0, 1, 11)
    err = np.array([1, 1, 0.4, 0.04, 0.04, 0.04, 0.04, 0.04, 0.04, 0.04, 0.04])
    assert settling_time(err, t, 0.05) == pytest.approx(0.3)
    assert settling_time(err, t, 2.0) == t[0]
    assert settling_time(err, t, 0.01) == float("inf")


def test_manifold_probe_accessor(salient_cont_log, salient_cfg):
    probe = manifold_residual(salient_cont_log)
    assert probe.pi_norm[0] == 0.0
    assert probe.max_pi < probe.bound()
    # sampled or gradient runs don't carry the probe
    sampled = run_scenario(salient_cfg.with_overrides(duration=0.05),
                           observer="kre")
    with pytest.raises(ValueError):
        manifold_residual(sampled)
    grad = run_scenario(
        salient_cfg.with_overrides(duration=0.05, integration="continuous"),
        observer="grad_aut")
    with pytest.raises(ValueError):
        manifold_residual(grad)


def test_regression_residual_requires_diagnostics(salient_cfg):
    log = run_scenario(salient_cfg.with_overrides(duration=0.05,
                                                  diagnostics=False),
                       observer="kre")
    with pytest.raises(ValueError):
        regression_residual(log.columns)


def test_summary_is_pure_function_of_columns(salient_cont_log, salient_cfg):
    from kreflux.analysis import summarize
    again = summarize(salient_cont_log.columns, salient_cfg.with_overrides(
        integration="continuous"), "kre")
    assert again.to_dict() == salient_cont_log.metrics.to_dict()
