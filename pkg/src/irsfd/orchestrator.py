"""Outer alternating loop between phase ascent and the WMMSE block,
plus the benchmark scheme variants and half-duplex baselines."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np

from . import phaseopt, wmmse
from .model import (ChannelSet, EffectiveChannels, PhaseVector, SolverState,
                    SystemConfig, compose_effective_channels, dl_rates,
                    swsr, ul_rates)
from .wmmse import Counters


class Scheme(IntEnum):
    """Benchmark variants.

    JOINT alternates phase ascent with the WMMSE solver; FIXED_PHASE keeps
    the phases at their initial value; NO_IRS removes all surface links;
    MRT_PHASE_ONLY uses matched-filter transceivers at full power and only
    optimizes phases.
    """

    JOINT = 1
    FIXED_PHASE = 2
    NO_IRS = 3
    MRT_PHASE_ONLY = 4


@dataclass(frozen=True)
class Tolerances:
    """Convergence thresholds of the nested loops.

    The outer threshold is relative: the loop stops when the SWSR change per
    outer iteration falls below eps_outer * max(1, SWSR).
    """

    eps_wmmse: float = 1e-3
    eps_grad: float = 1e-4
    eps_outer: float = 1e-3
    max_wmmse_iter: int = 200
    max_ascent_iter: int = 300
    max_outer_iter: int = 100


@dataclass(frozen=True)
class RunResult:
    """Outcome of one optimization run."""

    scheme: Scheme
    duplex: str
    swsr: float
    dl_rates: np.ndarray
    ul_rates: np.ndarray
    outer_trace: np.ndarray       # (steps, 3): swsr, dl sum, ul sum
    outer_iterations: int
    counters: Counters
    wall_time: float
    state: SolverState | None = None
    phases: PhaseVector | None = None

    @property
    def dl_sum_rate(self) -> float:
        return float(np.sum(self.dl_rates))

    @property
    def ul_sum_rate(self) -> float:
        return float(np.sum(self.ul_rates))


def _checkpoint(state: SolverState, eff: EffectiveChannels,
                cfg: SystemConfig) -> tuple[float, float, float]:
    return (swsr(state, eff, cfg),
            float(np.sum(dl_rates(state, eff, cfg))),
            float(np.sum(ul_rates(state, eff, cfg))))


def mrt_mrc_state(eff: EffectiveChannels, cfg: SystemConfig) -> SolverState:
    """Matched-filter transceivers: MRT beams with an equal power split,
    unit-norm MRC combiners, full uplink power."""
    state = wmmse.init_state(eff, cfg)
    u = np.zeros_like(state.u)
    for l in range(cfg.n_ul_users):
        norm = math.sqrt(float(eff.g_bar_norm2[l]))
        if norm > 1e-300:
            u[l] = eff.g_bar[l] / norm
    state = replace(state, u=u)
    if cfg.n_dl_users:
        u1 = np.array([wmmse.update_u1k(k, state, eff, cfg)
                       for k in range(cfg.n_dl_users)])
        state = replace(state, u1=u1)
    return state


def _project_feasible(state: SolverState, cfg: SystemConfig) -> SolverState:
    """Clip a warm-start state into the current power budgets."""
    w = state.w
    power = float(np.sum(np.abs(w) ** 2))
    if power > cfg.p_max_bs:
        w = w * math.sqrt(cfg.p_max_bs / power)
    p = np.minimum(state.p, np.sqrt(np.asarray(cfg.p_max_ul, dtype=float)))
    return replace(state, w=w, p=p)


def run_joint(channels: ChannelSet, cfg: SystemConfig,
              scheme: Scheme = Scheme.JOINT,
              tol: Tolerances = Tolerances(),
              phases0: PhaseVector | None = None,
              state0: SolverState | None = None) -> RunResult:
    """Full-duplex optimization for one channel realization.

    JOINT alternates one phase-ascent pass and one WMMSE solve per outer
    iteration until the SWSR change drops below eps_outer.  FIXED_PHASE and
    NO_IRS run a single WMMSE solve; MRT_PHASE_ONLY refreshes the
    matched-filter transceivers after each phase-ascent pass.  `phases0` and
    `state0` warm-start the solution (continuation along parameter sweeps);
    a warm state is projected into the current power budgets.
    """
    t0 = time.perf_counter()
    counters = Counters()
    if scheme == Scheme.NO_IRS:
        channels = channels.without_irs()
    phases = phases0 if phases0 is not None else PhaseVector.zeros(channels.m_total)
    eff = compose_effective_channels(channels, phases)
    if scheme == Scheme.MRT_PHASE_ONLY:
        state = mrt_mrc_state(eff, cfg)
    elif state0 is not None:
        state = _project_feasible(state0, cfg)
    else:
        state = wmmse.init_state(eff, cfg)
    trace = [_checkpoint(state, eff, cfg)]

    if scheme in (Scheme.FIXED_PHASE, Scheme.NO_IRS):
        rep = wmmse.run_wmmse(state, eff, cfg, tol.eps_wmmse,
                              tol.max_wmmse_iter, counters)
        state = rep.state
        trace.append(_checkpoint(state, eff, cfg))
    else:
        phi_prev = None
        for _ in range(tol.max_outer_iter):
            phi = phases.phi
            if scheme == Scheme.JOINT and phi_prev is not None:
                # Secant acceleration of the outer fixed point: jump along
                # the previous outer move and keep the jump only if the
                # re-adapted transceivers improve the SWSR, so the outer
                # trace stays monotone.
                drift = np.mod(phi - phi_prev + np.pi, 2.0 * np.pi) - np.pi
                for theta in (16.0, 8.0, 4.0, 2.0):
                    cand = PhaseVector(phi + theta * drift)
                    eff_try = compose_effective_channels(channels, cand)
                    rep_try = wmmse.run_wmmse(state, eff_try, cfg, tol.eps_wmmse,
                                              tol.max_wmmse_iter, counters)
                    if swsr(rep_try.state, eff_try, cfg) > trace[-1][0]:
                        phases, eff, state = cand, eff_try, rep_try.state
                        break
            phi_prev = phi
            ascent = phaseopt.gradient_ascent(
                state, channels, cfg, phases, tol.eps_grad,
                tol.max_ascent_iter, counters=counters)
            phases = ascent.phases
            eff = compose_effective_channels(channels, phases)
            if scheme == Scheme.JOINT:
                rep = wmmse.run_wmmse(state, eff, cfg, tol.eps_wmmse,
                                      tol.max_wmmse_iter, counters)
                state = rep.state
            else:
                state = mrt_mrc_state(eff, cfg)
            trace.append(_checkpoint(state, eff, cfg))
            if abs(trace[-1][0] - trace[-2][0]) < tol.eps_outer * max(1.0, abs(trace[-1][0])):
                break

    return RunResult(
        scheme=scheme, duplex="fd",
        swsr=trace[-1][0],
        dl_rates=dl_rates(state, eff, cfg),
        ul_rates=ul_rates(state, eff, cfg),
        outer_trace=np.asarray(trace),
        outer_iterations=len(trace) - 1,
        counters=counters,
        wall_time=time.perf_counter() - t0,
        state=state, phases=phases)


def _dl_only(channels: ChannelSet, cfg: SystemConfig) -> tuple[ChannelSet, SystemConfig]:
    n_t = cfg.n_tx
    ch = replace(channels,
                 g_direct=np.zeros((0, n_t), dtype=complex),
                 f_uu=np.zeros((0, cfg.n_dl_users), dtype=complex),
                 g_irs_ul=())
    c = replace(cfg, n_ul_users=0, p_max_ul=(), beta_ul=())
    return ch, c


def _ul_only(channels: ChannelSet, cfg: SystemConfig) -> tuple[ChannelSet, SystemConfig]:
    n_t = cfg.n_tx
    ch = replace(channels,
                 h_direct=np.zeros((0, n_t), dtype=complex),
                 f_uu=np.zeros((cfg.n_ul_users, 0), dtype=complex),
                 h_irs_dl=())
    # No downlink transmission in the uplink slot: no self-interference path.
    c = replace(cfg, n_dl_users=0, beta_dl=(), rsi_variance=0.0)
    return ch, c


def run_half_duplex(channels: ChannelSet, cfg: SystemConfig,
                    scheme: Scheme = Scheme.JOINT,
                    tol: Tolerances = Tolerances()) -> RunResult:
    """Time-shared baseline: independent DL-only and UL-only optimizations
    in two equal slots, each with its full per-slot power budget; all rates
    carry the 1/2 time-sharing factor."""
    t0 = time.perf_counter()
    r_dl = run_joint(*_dl_only(channels, cfg), scheme=scheme, tol=tol) \
        if cfg.n_dl_users else None
    r_ul = run_joint(*_ul_only(channels, cfg), scheme=scheme, tol=tol) \
        if cfg.n_ul_users else None

    counters = Counters()
    dl = 0.5 * r_dl.dl_rates if r_dl else np.zeros(0)
    ul = 0.5 * r_ul.ul_rates if r_ul else np.zeros(0)
    total = 0.0
    steps = 1
    for r in (r_dl, r_ul):
        if r is not None:
            counters.merge(r.counters)
            total += 0.5 * r.swsr
            steps = max(steps, r.outer_trace.shape[0])

    def padded(r: RunResult | None) -> np.ndarray:
        if r is None:
            return np.zeros((steps, 3))
        t = r.outer_trace
        pad = np.repeat(t[-1][None, :], steps - t.shape[0], axis=0)
        return np.vstack([t, pad]) if steps > t.shape[0] else t

    trace = 0.5 * (padded(r_dl) + padded(r_ul))
    return RunResult(
        scheme=scheme, duplex="hd",
        swsr=total, dl_rates=dl, ul_rates=ul,
        outer_trace=trace,
        outer_iterations=max(r.outer_iterations for r in (r_dl, r_ul) if r is not None),
        counters=counters,
        wall_time=time.perf_counter() - t0)


def run_optimization(channels: ChannelSet, cfg: SystemConfig,
                     scheme: Scheme = Scheme.JOINT, duplex: str = "fd",
                     tol: Tolerances = Tolerances(),
                     phases0: PhaseVector | None = None,
                     state0: SolverState | None = None) -> RunResult:
    """Dispatch one run by scheme and duplex mode.

    `phases0`/`state0` warm-start the optimization (and `phases0` fixes the
    phases for FIXED_PHASE runs); the half-duplex slots always cold-start.
    """
    if duplex == "fd":
        return run_joint(channels, cfg, scheme, tol, phases0, state0)
    if duplex == "hd":
        return run_half_duplex(channels, cfg, scheme, tol)
    raise ValueError(f"unknown duplex mode {duplex!r}")
