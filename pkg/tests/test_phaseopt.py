"""Quadratic-term caches, analytic gradient and ascent loop."""

from dataclasses import replace

import numpy as np
import pytest

from irsfd import phaseopt, wmmse
from irsfd.model import PhaseVector, compose_effective_channels, swsr
from irsfd.phaseopt import ArmijoParams
from irsfd.selftest import fd_gradient, random_instance


def _setup(rng, **kwargs):
    cfg, channels, phases, state = random_instance(rng, **kwargs)
    cache = phaseopt.build_cache(state, channels, cfg)
    return cfg, channels, phases, state, cache


# ---------------------------------------------------------------------------
# Cache construction and term evaluation
# ---------------------------------------------------------------------------

def test_cache_zero_beam_nulls_term():
    rng = np.random.default_rng(0)
    cfg, channels, phases, state, _ = _setup(rng, n_tx=2, k=2, l=1)
    w = state.w.copy()
    w[1] = 0.0
    cache = phaseopt.build_cache(replace(state, w=w), channels, cfg)
    assert np.all(cache.a_tilde[0, 1] == 0) and np.all(cache.c_tilde[0, 1] == 0)
    for _ in range(5):
        pv = PhaseVector(rng.uniform(0, 2 * np.pi, cfg.m_total))
        assert phaseopt.eval_terms(cache, pv).b[0, 1] == pytest.approx(0.0, abs=1e-15)


def test_cache_scalar_surface_hand_check():
    rng = np.random.default_rng(1)
    cfg, channels, phases, state, cache = _setup(rng, n_tx=2, k=1, l=1,
                                                 irs_sizes=(1,))
    a = np.conj(channels.h_hat[0, 0]) * (channels.h_stack @ state.w[0])[0]
    c = np.conj(channels.h_direct[0]) @ state.w[0]
    assert cache.a_tilde[0, 0, 0, 0] == pytest.approx(abs(a) ** 2)
    assert cache.c_tilde[0, 0, 0] == pytest.approx(a * np.conj(c))


def test_cache_matrices_hermitian():
    rng = np.random.default_rng(2)
    _, _, _, _, cache = _setup(rng, n_tx=3, k=2, l=2, irs_sizes=(2, 2))
    for fam in (cache.a_tilde.reshape(-1, 4, 4), cache.m_tilde,
                cache.b_tilde.reshape(-1, 4, 4),
                cache.z_tilde.reshape(-1, 4, 4), cache.x_tilde):
        for mat in fam:
            assert np.allclose(mat, np.conj(mat.T), atol=1e-12)


def test_eval_terms_matches_effective_channels():
    rng = np.random.default_rng(3)
    cfg, channels, _, state, cache = _setup(rng, n_tx=3, k=2, l=2,
                                            irs_sizes=(2, 3))
    for _ in range(5):
        pv = PhaseVector(rng.uniform(0, 2 * np.pi, cfg.m_total))
        eff = compose_effective_channels(channels, pv)
        terms = phaseopt.eval_terms(cache, pv)
        for k in range(2):
            for i in range(2):
                direct = abs(np.vdot(eff.h_bar[k], state.w[i])) ** 2
                assert terms.b[k, i] == pytest.approx(direct, rel=1e-10)
            assert terms.q[k] == pytest.approx(float(eff.h_bar_norm2[k]), rel=1e-10)
        for l in range(2):
            for k in range(2):
                direct = abs(eff.f_bar[l, k]) ** 2 * state.p[l] ** 2
                assert terms.c[l, k] == pytest.approx(direct, rel=1e-10, abs=1e-16)
            for j in range(2):
                direct = abs(np.vdot(state.u[l], eff.g_bar[j])) ** 2 * state.p[j] ** 2
                assert terms.bt[l, j] == pytest.approx(direct, rel=1e-10, abs=1e-16)
            direct = float(eff.g_bar_norm2[l]) * state.p[l] ** 2
            assert terms.t[l] == pytest.approx(direct, rel=1e-10, abs=1e-16)


def test_eval_terms_constant_without_surfaces():
    rng = np.random.default_rng(4)
    cfg, channels, _, state, _ = _setup(rng, n_tx=2, k=1, l=1)
    cache = phaseopt.build_cache(state, channels.without_irs(), cfg)
    v0 = phaseopt.eval_terms(cache, PhaseVector.zeros(cfg.m_total))
    v1 = phaseopt.eval_terms(cache, PhaseVector(rng.uniform(0, 6, cfg.m_total)))
    c = np.conj(channels.h_direct[0]) @ state.w[0]
    assert v0.b[0, 0] == pytest.approx(abs(c) ** 2)
    assert v1.b[0, 0] == pytest.approx(v0.b[0, 0])


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------

def test_objective_matches_swsr():
    rng = np.random.default_rng(5)
    for _ in range(5):
        cfg, channels, phases, state, cache = _setup(
            rng, n_tx=2, k=2, l=2, irs_sizes=(2, 2),
            xi=float(rng.choice([1.0, 0.9])))
        eff = compose_effective_channels(channels, phases)
        assert phaseopt.objective_f(cache, phases, cfg) == pytest.approx(
            swsr(state, eff, cfg), rel=1e-9)


def test_objective_zero_weights_and_periodicity():
    rng = np.random.default_rng(6)
    cfg, channels, phases, state, _ = _setup(rng, n_tx=2, k=1, l=1,
                                             alpha_dl=0.0, alpha_ul=0.0)
    cache = phaseopt.build_cache(state, channels, cfg)
    assert phaseopt.objective_f(cache, phases, cfg) == 0.0

    cfg2, channels2, phases2, state2, cache2 = _setup(rng, n_tx=2, k=1, l=1)
    wrapped = phases2.shifted(np.full(cfg2.m_total, 2 * np.pi))
    assert phaseopt.objective_f(cache2, wrapped, cfg2) == pytest.approx(
        phaseopt.objective_f(cache2, phases2, cfg2), rel=1e-14)


# ---------------------------------------------------------------------------
# Derivatives
# ---------------------------------------------------------------------------

def _fd_term(cache, phases, n, which, index, h=1e-6):
    delta = np.zeros(phases.phi.shape[0])
    delta[n] = h

    def value(pv):
        t = phaseopt.eval_terms(cache, pv)
        return {"b": lambda: t.b[index], "q": lambda: t.q[index],
                "c": lambda: t.c[index], "bt": lambda: t.bt[index],
                "t": lambda: t.t[index]}[which]()

    return (value(phases.shifted(delta)) - value(phases.shifted(-delta))) / (2 * h)


def test_term_derivatives_match_finite_differences():
    rng = np.random.default_rng(7)
    cfg, channels, phases, state, cache = _setup(rng, n_tx=2, k=2, l=2,
                                                 irs_sizes=(2, 1))
    cases = [("b", (0, 1)), ("q", (1,)), ("c", (1, 0)), ("bt", (0, 1)),
             ("t", (1,))]
    for which, index in cases:
        idx = index if len(index) > 1 else index[0]
        for n in range(cfg.m_total):
            analytic = phaseopt.term_derivative(cache, phases, n, which, idx)
            numeric = _fd_term(cache, phases, n, which, idx)
            assert analytic == pytest.approx(numeric, rel=1e-6, abs=1e-9), (which, n)


def test_term_derivative_single_element_hand_formula():
    # M=1 with a real linear coefficient: dB/dphi = -2 c~ sin(phi)
    rng = np.random.default_rng(8)
    cfg, channels, phases, state, cache = _setup(rng, n_tx=1, k=1, l=1,
                                                 irs_sizes=(1,))
    c_lin = cache.c_tilde[0, 0, 0]
    phi0 = 0.83
    pv = PhaseVector(np.array([phi0]))
    expected = -2 * abs(c_lin) * np.sin(phi0 + np.angle(c_lin))
    assert phaseopt.term_derivative(cache, pv, 0, "b", (0, 0)) == pytest.approx(
        expected, rel=1e-12)


def test_term_derivative_zero_cache():
    rng = np.random.default_rng(9)
    cfg, channels, phases, state, _ = _setup(rng, n_tx=2, k=1, l=1)
    cache = phaseopt.build_cache(
        replace(state, w=np.zeros_like(state.w)), channels, cfg)
    assert phaseopt.term_derivative(cache, phases, 0, "b", (0, 0)) == 0.0


def test_rate_partials_match_finite_differences():
    rng = np.random.default_rng(10)
    cfg, channels, phases, state, cache = _setup(rng, n_tx=2, k=2, l=2,
                                                 irs_sizes=(2, 2), xi=0.92)

    def rates(pv):
        eff = compose_effective_channels(channels, pv)
        from irsfd.model import dl_rates, ul_rates
        return dl_rates(state, eff, cfg), ul_rates(state, eff, cfg)

    h = 1e-6
    for n in range(cfg.m_total):
        delta = np.zeros(cfg.m_total)
        delta[n] = h
        dl_p, ul_p = rates(phases.shifted(delta))
        dl_m, ul_m = rates(phases.shifted(-delta))
        dl_fd = (dl_p - dl_m) / (2 * h)
        ul_fd = (ul_p - ul_m) / (2 * h)
        dl_an, ul_an = phaseopt.rate_partials(cache, phases, n, cfg)
        assert np.allclose(dl_an, dl_fd, rtol=1e-6, atol=1e-8)
        assert np.allclose(ul_an, ul_fd, rtol=1e-6, atol=1e-8)


def test_rate_partials_zero_beams():
    rng = np.random.default_rng(11)
    cfg, channels, phases, state, _ = _setup(rng, n_tx=2, k=2, l=1)
    cache = phaseopt.build_cache(
        replace(state, w=np.zeros_like(state.w)), channels, cfg)
    dl, _ = phaseopt.rate_partials(cache, phases, 0, cfg)
    assert np.all(dl == 0.0)


def test_gradient_master_finite_difference_check():
    rng = np.random.default_rng(12)
    worst = 0.0
    for i in range(20):
        m_sizes = [(2,), (2, 2), (4, 4)][i % 3]
        xi = 1.0 if i % 2 else 0.92
        cfg, channels, phases, state = random_instance(
            rng, n_tx=2, k=1 + i % 3, l=1 + (i + 1) % 3, irs_sizes=m_sizes,
            xi=xi)
        cache = phaseopt.build_cache(state, channels, cfg)
        g = phaseopt.gradient(cache, phases, cfg)
        g_fd = fd_gradient(state, channels, cfg, phases)
        worst = max(worst, np.max(np.abs(g - g_fd)) / np.max(np.abs(g_fd)))
    assert worst < 1e-5


def test_gradient_zero_weights_and_periodicity():
    rng = np.random.default_rng(13)
    cfg, channels, phases, state, _ = _setup(rng, n_tx=2, k=1, l=1,
                                             alpha_dl=0.0, alpha_ul=0.0)
    cache = phaseopt.build_cache(state, channels, cfg)
    assert np.all(phaseopt.gradient(cache, phases, cfg) == 0.0)

    cfg2, channels2, phases2, state2, cache2 = _setup(rng, n_tx=2, k=1, l=1)
    g1 = phaseopt.gradient(cache2, phases2, cfg2)
    g2 = phaseopt.gradient(cache2, phases2.shifted(np.full(cfg2.m_total, 2 * np.pi)),
                           cfg2)
    assert np.allclose(g1, g2, atol=1e-12)


# ---------------------------------------------------------------------------
# Line search and ascent
# ---------------------------------------------------------------------------

def test_armijo_zero_direction_returns_initial_step():
    rng = np.random.default_rng(14)
    cfg, channels, phases, state, cache = _setup(rng, n_tx=2, k=1, l=1)
    eta = phaseopt.armijo_line_search(cache, phases, np.zeros(cfg.m_total), cfg)
    assert eta == ArmijoParams().eta0


def test_armijo_accepted_step_satisfies_inequality():
    rng = np.random.default_rng(15)
    cfg, channels, phases, state, cache = _setup(rng, n_tx=2, k=2, l=2,
                                                 irs_sizes=(2, 2))
    g = phaseopt.gradient(cache, phases, cfg)
    params = ArmijoParams()
    eta = phaseopt.armijo_line_search(cache, phases, g, cfg, params)
    assert eta > 0
    f0 = phaseopt.objective_f(cache, phases, cfg)
    f1 = phaseopt.objective_f(cache, phases.shifted(eta * g), cfg)
    assert f1 >= f0 + params.c * eta * float(g @ g)
    # the rejected next-larger step must fail the test (largest accepted)
    if eta < params.eta0:
        f_big = phaseopt.objective_f(cache, phases.shifted(eta / params.shrink * g), cfg)
        assert f_big < f0 + params.c * (eta / params.shrink) * float(g @ g)


def test_armijo_small_initial_step_accepted_immediately():
    rng = np.random.default_rng(16)
    cfg, channels, phases, state, cache = _setup(rng, n_tx=2, k=1, l=1)
    g = phaseopt.gradient(cache, phases, cfg)
    counters = wmmse.Counters()
    eta = phaseopt.armijo_line_search(cache, phases, g, cfg,
                                      ArmijoParams(eta0=1e-7), counters)
    assert eta == 1e-7
    assert counters.objective_evals == 1


def test_ascent_stationary_start_stops():
    rng = np.random.default_rng(17)
    cfg, channels, phases, state, _ = _setup(rng, n_tx=2, k=1, l=1,
                                             irs_sizes=(2,))
    settled = phaseopt.gradient_ascent(state, channels, cfg, phases,
                                       eps2=1e-6, max_iter=20000)
    assert settled.grad_norm < 1e-6
    rerun = phaseopt.gradient_ascent(state, channels, cfg, settled.phases,
                                     eps2=1e-5, max_iter=100)
    assert rerun.iterations == 0


def test_ascent_beats_random_sampling():
    rng = np.random.default_rng(18)
    cfg, channels, phases, state, cache = _setup(rng, n_tx=2, k=1, l=1,
                                                 irs_sizes=(2,))
    report = phaseopt.gradient_ascent(state, channels, cfg, phases,
                                      eps2=1e-6, max_iter=20000)
    samples = rng.uniform(0, 2 * np.pi, size=(10_000, cfg.m_total))
    best = max(phaseopt.objective_f(cache, PhaseVector(s), cfg) for s in samples)
    assert report.objective_trace[-1] >= best - 1e-6


def test_ascent_monotone_on_baseline_instance():
    from irsfd.channelgen import RngSeed, generate_channels
    from irsfd.configio import load_scenario
    scn = load_scenario("table1")
    channels = generate_channels(scn.geometry, scn.system, RngSeed(2).generator())
    eff = compose_effective_channels(channels, PhaseVector.zeros(scn.system.m_total))
    state = wmmse.run_wmmse(wmmse.init_state(eff, scn.system), eff, scn.system,
                            1e-3).state
    report = phaseopt.gradient_ascent(state, channels, scn.system,
                                      PhaseVector.zeros(scn.system.m_total),
                                      eps2=1e-4, max_iter=500)
    assert report.iterations > 0
    assert np.all(np.diff(report.objective_trace) > 0)
    assert np.all(report.phases.phi >= 0) and np.all(report.phases.phi < 2 * np.pi)
