"""Fast built-in oracle suite and synthetic random-instance helpers.

The checks here are reduced-size versions of the verification suite:
an analytic-vs-finite-difference gradient check, the MMSE/SINR identity,
the beamformer bisection residual, and a Monte-Carlo check of the
distortion-variance formulas.  `random_instance` builds O(1)-scale synthetic
problems used throughout the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import phaseopt, wmmse
from .model import (ChannelSet, HardwareQuality, PhaseVector, SolverState,
                    SystemConfig, compose_effective_channels, dl_sinr, ul_sinr)


def _cn(rng: np.random.Generator, *shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_config(rng: np.random.Generator, n_tx=2, k=1, l=1, irs_sizes=(2,),
                  xi=1.0, p_max_bs=4.0, p_max_ul=1.0, noise=0.1,
                  rsi_variance=0.01, alpha_dl=1.0, alpha_ul=1.0) -> SystemConfig:
    if np.isscalar(xi):
        hw = HardwareQuality(xi, xi, xi, xi)
    else:
        hw = HardwareQuality(*xi)
    return SystemConfig(n_tx=n_tx, n_dl_users=k, n_ul_users=l,
                        irs_sizes=tuple(irs_sizes), p_max_bs=p_max_bs,
                        p_max_ul=(p_max_ul,) * l, noise_dl=noise, noise_ul=noise,
                        rsi_variance=rsi_variance, hw=hw,
                        alpha_dl=alpha_dl, alpha_ul=alpha_ul)


def random_channels(cfg: SystemConfig, rng: np.random.Generator,
                    scale: float = 1.0) -> ChannelSet:
    """Unit-scale synthetic channels with the configured dimensions."""
    k, l, n_t = cfg.n_dl_users, cfg.n_ul_users, cfg.n_tx
    return ChannelSet(
        h_direct=scale * _cn(rng, k, n_t),
        g_direct=scale * _cn(rng, l, n_t),
        f_uu=scale * _cn(rng, l, k),
        h_bs_irs=tuple(scale * _cn(rng, m, n_t) for m in cfg.irs_sizes),
        h_irs_dl=tuple(tuple(scale * _cn(rng, m) for m in cfg.irs_sizes)
                       for _ in range(k)),
        g_irs_ul=tuple(tuple(scale * _cn(rng, m) for m in cfg.irs_sizes)
                       for _ in range(l)),
    )


def random_state(cfg: SystemConfig, rng: np.random.Generator,
                 feasible: bool = True) -> SolverState:
    k, l, n_t = cfg.n_dl_users, cfg.n_ul_users, cfg.n_tx
    w = _cn(rng, k, n_t)
    if feasible and k:
        power = float(np.sum(np.abs(w) ** 2))
        if power > 0:
            w *= np.sqrt(cfg.p_max_bs / power) * rng.uniform(0.5, 1.0)
    p = np.sqrt(np.asarray(cfg.p_max_ul)) * rng.uniform(0.3, 1.0, size=l)
    return SolverState(w=w, u=_cn(rng, l, n_t), u1=_cn(rng, k),
                       p=p, mu_dl=rng.uniform(0.5, 2.0, size=k),
                       mu_ul=rng.uniform(0.5, 2.0, size=l))


def random_instance(rng: np.random.Generator, **kwargs):
    """(cfg, channels, phases, state) tuple at O(1) scales."""
    cfg = random_config(rng, **kwargs)
    channels = random_channels(cfg, rng)
    phases = PhaseVector(rng.uniform(0.0, 2.0 * np.pi, size=cfg.m_total))
    state = random_state(cfg, rng)
    return cfg, channels, phases, state


def fd_gradient(state, channels, cfg, phases: PhaseVector,
                h: float = 1e-6) -> np.ndarray:
    """Central finite differences of the phase objective."""
    cache = phaseopt.build_cache(state, channels, cfg)
    m = cfg.m_total
    g = np.zeros(m)
    for n in range(m):
        delta = np.zeros(m)
        delta[n] = h
        f_plus = phaseopt.objective_f(cache, phases.shifted(delta), cfg)
        f_minus = phaseopt.objective_f(cache, phases.shifted(-delta), cfg)
        g[n] = (f_plus - f_minus) / (2.0 * h)
    return g


def gradient_check(seed: int = 0, instances: int = 3,
                   corrupt_gradient: bool = False) -> float:
    """Max norm-relative error between analytic and numeric gradients."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(instances):
        cfg, channels, phases, state = random_instance(
            rng, n_tx=2, k=2, l=2, irs_sizes=(2, 2), xi=(1.0 if i % 2 else 0.92))
        cache = phaseopt.build_cache(state, channels, cfg)
        g = phaseopt.gradient(cache, phases, cfg)
        if corrupt_gradient:
            g = -g
        g_fd = fd_gradient(state, channels, cfg, phases)
        scale = max(float(np.max(np.abs(g_fd))), 1e-300)
        worst = max(worst, float(np.max(np.abs(g - g_fd))) / scale)
    return worst


def mmse_identity_error(seed: int = 0, instances: int = 10) -> float:
    """Max relative error of e = 1/(1+gamma) after the receiver updates."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        cfg, channels, phases, state = random_instance(rng, n_tx=3, k=2, l=2,
                                                       irs_sizes=(2,))
        eff = compose_effective_channels(channels, phases)
        u1 = np.array([wmmse.update_u1k(k, state, eff, cfg)
                       for k in range(cfg.n_dl_users)])
        state = replace(state, u1=u1)
        u = np.stack([wmmse.update_ul(l, state, eff, cfg)
                      for l in range(cfg.n_ul_users)])
        state = replace(state, u=u)
        for k in range(cfg.n_dl_users):
            e = wmmse.mse_dl(k, state, eff, cfg)
            target = 1.0 / (1.0 + dl_sinr(k, state, eff, cfg))
            worst = max(worst, abs(e - target) / target)
        for l in range(cfg.n_ul_users):
            e = wmmse.mse_ul(l, state, eff, cfg)
            target = 1.0 / (1.0 + ul_sinr(l, state, eff, cfg))
            worst = max(worst, abs(e - target) / target)
    return worst


def bisection_residual(seed: int = 0, instances: int = 10) -> float:
    """Max relative power-constraint residual on binding instances."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        cfg, channels, phases, state = random_instance(
            rng, n_tx=3, k=2, l=1, irs_sizes=(2,), p_max_bs=0.05)
        eff = compose_effective_channels(channels, phases)
        state = replace(state, mu_dl=rng.uniform(5.0, 20.0, size=cfg.n_dl_users))
        sub = wmmse.build_beamformer_subproblem(state, eff, cfg)
        if wmmse.j_of_lambda(sub, 0.0) <= cfg.p_max_bs:
            continue
        w, _ = wmmse.solve_beamformer(sub, cfg.p_max_bs)
        power = float(np.sum(np.abs(w) ** 2))
        worst = max(worst, abs(power - cfg.p_max_bs) / cfg.p_max_bs)
    return worst


def distortion_mc_error(seed: int = 0, samples: int = 100_000) -> float:
    """Worst relative Monte-Carlo error across the distortion formulas."""
    from .oracles import (mc_dl_distortion, mc_rsi_power, mc_ul_distortion)
    from .model import dl_distortion_variance, rsi_power, ul_distortion_variance

    rng = np.random.default_rng(seed)
    cfg, channels, phases, state = random_instance(rng, n_tx=2, k=1, l=1,
                                                   irs_sizes=(2,), xi=0.9)
    eff = compose_effective_channels(channels, phases)
    worst = 0.0
    pairs = (
        (dl_distortion_variance(0, state, eff, cfg),
         mc_dl_distortion(0, state, eff, cfg, samples, rng)),
        (ul_distortion_variance(state, eff, cfg),
         mc_ul_distortion(state, eff, cfg, samples, rng)),
        (rsi_power(state.u[0], state, cfg),
         mc_rsi_power(state.u[0], state, cfg, samples, rng)),
    )
    for exact, estimate in pairs:
        worst = max(worst, abs(estimate - exact) / exact)
    return worst


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.value < self.threshold


def run_selftest(seed: int = 0, corrupt_gradient: bool = False) -> list[CheckResult]:
    """Reduced-size oracle suite; all checks must pass on a healthy build."""
    return [
        CheckResult("gradient_check", gradient_check(
            seed, corrupt_gradient=corrupt_gradient), 1e-5),
        CheckResult("mmse_identity", mmse_identity_error(seed), 1e-8),
        CheckResult("bisection_residual", bisection_residual(seed), 1e-6),
        CheckResult("distortion_monte_carlo", distortion_mc_error(seed), 0.05),
    ]
