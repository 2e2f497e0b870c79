import dataclasses
import json

import numpy as np
import pytest

from wastap.driver import (REASONS, RunTrace, chirp_init, gaussian_init, initial_waveform,
                           run_am, run_cm, run_pam, run_rank_deficient, run_trials,
                           trial_seeds, worker_count)
from wastap.optim import dual_gamma2, mvdr_filter
from wastap.scenario import build_model, bundled_scenario, parse_scenario, training_models


def _baseline_doc():
    return json.loads(bundled_scenario("baseline").read_text())


def test_zero_clutter_fails_in_waveform_step():
    doc = _baseline_doc()
    doc["clutter"]["patches"] = []
    scen, cfg = parse_scenario(doc, desk=True)
    model = build_model(scen)
    trace = run_am(model, initial_waveform(model, cfg), cfg, seed=0)
    assert trace.reason == "solver-error" and len(trace) == 0
    assert "iteration 1" in trace.message and "singular" in trace.message


def test_single_iteration_is_composition(desk):
    _, cfg, model = desk
    s0 = initial_waveform(model, cfg, seed=7)
    trace = run_am(model, s0, dataclasses.replace(cfg, max_iter=1), seed=7)
    w = mvdr_filter(model.total_covariance(s0), model.steering(s0), cfg.kappa)
    s, _ = dual_gamma2(w, model.zq_sum(w), model.replication, cfg.kappa, cfg.power)
    st = trace.final
    np.testing.assert_array_equal(st.w, w)
    np.testing.assert_array_equal(st.s, s)
    assert st.objective == np.vdot(w, model.total_covariance(s) @ w).real
    assert st.k == 1 and trace.reason == "max-iter"


def test_am_monotone_on_full_scenario(full):
    _, cfg, model = full
    for seed in range(3):
        s0 = gaussian_init(model.num_samples, np.random.default_rng(seed), cfg.power)
        trace = run_am(model, s0, dataclasses.replace(cfg, max_iter=15), seed=seed)
        assert trace.reason in REASONS and len(trace) == 15
        assert trace.is_monotone(rtol=1e-10)
        for st in trace.states:
            assert st.residual <= 1e-10 and st.power <= cfg.power * (1 + 1e-10)
            assert st.objective >= 0


def test_power_stop_protocol(desk):
    _, cfg, model = desk
    cfg = dataclasses.replace(cfg, stop_on_power_violation=True)
    # an initial energy above the budget is carried by the γ=0 update
    s0 = 2.0 * gaussian_init(model.num_samples, np.random.default_rng(0), cfg.power)
    trace = run_am(model, s0, cfg, seed=0)
    assert trace.reason == "power-violation" and len(trace) == 0
    assert "exceeds" in trace.message


def test_tolerance_stop(desk):
    _, cfg, model = desk
    cfg = dataclasses.replace(cfg, tol_obj=1e-3, tol_disp=1.0, patience=2)
    trace = run_am(model, initial_waveform(model, cfg), cfg, seed=0)
    assert trace.reason == "converged" and len(trace) < cfg.max_iter


def test_pam_zero_weights_bit_matches_am(desk):
    _, cfg, model = desk
    cfg = dataclasses.replace(cfg, max_iter=30)
    s0 = initial_waveform(model, cfg, seed=3)
    am = run_am(model, s0, cfg, seed=3)
    pam = run_pam(model, s0, cfg, seed=3, use_tolerance=True)
    assert len(am) == len(pam)
    for a, p in zip(am.states, pam.states):
        assert np.array_equal(a.w, p.w) and np.array_equal(a.s, p.s)
        assert a.objective == p.objective


def test_pam_sufficient_decrease(desk):
    # each proximal half-step lowers g by at least (α/2)||Δw||² resp. (β/2)||Δs||²,
    # since the previous iterate stays feasible for the next subproblem
    _, cfg, model = desk
    cfg = dataclasses.replace(cfg, prox_mode="lipschitz", prox_scale=1e-2)
    s0 = initial_waveform(model, cfg, seed=1)
    am = run_am(model, s0, dataclasses.replace(cfg, max_iter=20), seed=1)
    pam = run_pam(model, am, cfg, max_iter=200)
    assert pam.seed == 1 and len(pam) == 200
    assert pam.is_monotone(rtol=1e-10)
    prev_w, prev_s, prev_obj = am.final.w, am.final.s, am.final.objective
    slack = 1e-12 * prev_obj
    for st in pam.states:
        assert st.alpha > 0 and st.beta > 0
        dw = np.linalg.norm(st.w - prev_w) ** 2
        ds = np.linalg.norm(st.s - prev_s) ** 2
        assert st.filter_objective + 0.5 * st.alpha * dw <= prev_obj + slack
        assert st.objective + 0.5 * st.beta * ds <= st.filter_objective + slack
        prev_w, prev_s, prev_obj = st.w, st.s, st.objective
    disp = np.array([st.displacement for st in pam.states])
    assert disp[-10:].max() < 0.1 * disp[:10].max()


def test_rank_deficient_protocol_desk():
    scen, cfg = parse_scenario(bundled_scenario("rank_deficient"), desk=True)
    model = build_model(scen)
    loaded, raw = training_models(scen, model)
    assert np.linalg.matrix_rank(raw.interference_noise, tol=1e-8) == 30
    s0 = initial_waveform(model, cfg, seed=0)
    am, pam = run_rank_deficient(loaded, raw, s0, cfg, seed=0)
    assert len(am) == 20 and len(pam) == 50
    assert pam.reason == "max-iter"
    assert np.all(np.isfinite(pam.objectives))
    assert pam.final.displacement < 1e-6


def test_cm_chirp_stays_constant_modulus(desk):
    _, cfg, model = desk
    cfg = dataclasses.replace(cfg, max_iter=10)
    trace = run_cm(model, chirp_init(model.num_samples), cfg, seed=0)
    assert len(trace) > 0
    for st in trace.states:
        assert st.spread <= 1e-8 * np.abs(st.s).max()
        assert st.residual <= 1e-10


def test_cm_gaussian_start_reaches_constant_modulus(full):
    _, cfg, model = full
    s0 = gaussian_init(model.num_samples, np.random.default_rng(2), cfg.power)
    assert np.ptp(np.abs(s0)) > 0.1
    trace = run_cm(model, s0, dataclasses.replace(cfg, max_iter=3), seed=2)
    spreads = [st.spread for st in trace.states]
    assert min(spreads) < 1e-6


def test_init_kinds(desk):
    _, cfg, model = desk
    N = model.num_samples
    assert np.linalg.norm(initial_waveform(model, cfg, "gaussian", 1)) ** 2 == pytest.approx(
        cfg.power)
    np.testing.assert_allclose(np.abs(initial_waveform(model, cfg, "unimodular", 1)),
                               cfg.modulus)
    np.testing.assert_allclose(chirp_init(N), np.exp(1j * np.pi * np.arange(N) ** 2 / N))
    s = initial_waveform(model, cfg, "mineig")
    assert np.linalg.norm(s) ** 2 == pytest.approx(cfg.power)
    with pytest.raises(ValueError):
        initial_waveform(model, cfg, "sawtooth")


def test_empty_trace_helpers():
    trace = RunTrace("am")
    assert trace.is_monotone() and trace.rows() == [] and len(trace.objectives) == 0
    with pytest.raises(IndexError):
        trace.final


def test_trial_seeds_deterministic():
    a, b = trial_seeds(42, 5), trial_seeds(42, 5)
    assert a == b and len(set(a)) == 5
    assert trial_seeds(42, 3) == a[:3]


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("WASTAP_WORKERS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("WASTAP_WORKERS", "junk")
    assert worker_count(2) == 2


def test_trials_independent_of_worker_count(desk):
    _, cfg, model = desk
    cfg = dataclasses.replace(cfg, max_iter=5)
    serial = run_trials(model, "am", cfg, 3, master_seed=9, workers=1)
    pooled = run_trials(model, "am", cfg, 3, master_seed=9, workers=2)
    for a, b in zip(serial, pooled):
        assert a.seed == b.seed
        np.testing.assert_array_equal(a.objectives, b.objectives)
        np.testing.assert_array_equal(a.final.s, b.final.s)
    with pytest.raises(ValueError):
        run_trials(model, "newton", cfg, 1)
