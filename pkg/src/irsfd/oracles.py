"""Monte-Carlo simulators of the hardware-distortion signal model.

These estimate the expectations that the closed-form variance/MSE/RSI
expressions evaluate, by drawing symbols, distortion noises and
self-interference channels from the stated distributions.  They are the
independent side of the dual-route checks used by the selftest command and
the verification suite, and deliberately share no code with the closed
forms in `model`/`wmmse`.

Convention notes (mirrors how the closed forms combine the moments): the BS
transmit distortion is white across antennas with per-element variance
(1-xi) * sum_k |w_k|^2, except in the coherent self-interference path where
the transmit chain is treated as power-preserving (total distortion power
(1-xi) * sum_k |w_k|^2 spread over the array).
"""

from __future__ import annotations

import numpy as np

from .model import EffectiveChannels, SolverState, SystemConfig

_BATCH = 50_000


def _cn(rng: np.random.Generator, *shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _batches(samples: int):
    done = 0
    while done < samples:
        b = min(_BATCH, samples - done)
        done += b
        yield b


def _draw_ul_symbols(state: SolverState, cfg: SystemConfig, b: int,
                     rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """(x, q): distorted uplink transmit signals and clean symbols, (b, L)."""
    hw = cfg.hw
    q = _cn(rng, b, cfg.n_ul_users)
    z = _cn(rng, b, cfg.n_ul_users) * np.sqrt(hw.bar_ue_ul * state.rho)[None, :]
    x = np.sqrt(hw.xi_ue_ul) * state.p[None, :] * q + z
    return x, q


def _draw_bs_signal(state: SolverState, cfg: SystemConfig, b: int,
                    rng: np.random.Generator,
                    spread_distortion: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """(x_dl, s): distorted BS transmit vectors (b, N_t) and symbols (b, K).

    With spread_distortion the transmit-distortion power is split across the
    array (power-preserving cascade); otherwise each element carries the full
    (1-xi) * sum|w|^2 variance.
    """
    hw = cfg.hw
    s = _cn(rng, b, cfg.n_dl_users)
    var = hw.bar_bs_dl * state.bs_power()
    if spread_distortion:
        var /= cfg.n_tx
    z = _cn(rng, b, cfg.n_tx) * np.sqrt(var)
    x = np.sqrt(hw.xi_bs_dl) * s @ state.w + z
    return x, s


def _dl_incident(k: int, state: SolverState, eff: EffectiveChannels,
                 cfg: SystemConfig, b: int, rng: np.random.Generator,
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Pre-distortion incident signal at DL user k and the symbols, (b,)."""
    x_dl, s = _draw_bs_signal(state, cfg, b, rng)
    x_ul, _ = _draw_ul_symbols(state, cfg, b, rng)
    incident = x_dl @ np.conj(eff.h_bar[k]) + x_ul @ eff.f_bar[:, k]
    return incident, s


def mc_dl_distortion(k: int, state: SolverState, eff: EffectiveChannels,
                     cfg: SystemConfig, samples: int,
                     rng: np.random.Generator) -> float:
    """Estimate the receive-distortion variance at DL user k."""
    acc = 0.0
    for b in _batches(samples):
        incident, _ = _dl_incident(k, state, eff, cfg, b, rng)
        acc += float(np.sum(np.abs(incident) ** 2))
    return cfg.hw.bar_ue_dl * acc / samples


def mc_ul_distortion(state: SolverState, eff: EffectiveChannels,
                     cfg: SystemConfig, samples: int,
                     rng: np.random.Generator) -> float:
    """Estimate the BS receive-distortion variance.

    The uplink contribution enters with its total array power, the
    self-interference contribution with its per-antenna power.
    """
    acc_ul = 0.0
    acc_si = 0.0
    for b in _batches(samples):
        x_ul, _ = _draw_ul_symbols(state, cfg, b, rng)
        y = x_ul @ eff.g_bar
        acc_ul += float(np.sum(np.abs(y) ** 2))
        x_dl, _ = _draw_bs_signal(state, cfg, b, rng)
        acc_si += float(np.sum(np.abs(x_dl) ** 2))
    return cfg.hw.bar_bs_ul * (acc_ul / samples
                               + cfg.rsi_variance * acc_si / samples)


def _si_contraction(u_l: np.ndarray, x_dl: np.ndarray, b: int, n_t: int,
                    rng: np.random.Generator, rsi_variance: float) -> np.ndarray:
    """u^H H_si x_dl with a fresh self-interference channel per draw, (b,)."""
    h_si = _cn(rng, b, n_t, n_t) * np.sqrt(rsi_variance)
    return np.einsum('i,bij,bj->b', np.conj(u_l), h_si, x_dl)


def mc_rsi_power(u_l: np.ndarray, state: SolverState, cfg: SystemConfig,
                 samples: int, rng: np.random.Generator) -> float:
    """Estimate the average combined self-interference power."""
    hw = cfg.hw
    u_norm2 = float(np.sum(np.abs(u_l) ** 2))
    rx_var = (hw.bar_bs_ul * cfg.rsi_variance * state.bs_power()
              * (hw.xi_bs_dl + hw.bar_bs_dl * cfg.n_tx))
    acc = 0.0
    for b in _batches(samples):
        x_dl, _ = _draw_bs_signal(state, cfg, b, rng, spread_distortion=True)
        coherent = np.sqrt(hw.xi_bs_ul) * _si_contraction(
            u_l, x_dl, b, cfg.n_tx, rng, cfg.rsi_variance)
        z_rx = _cn(rng, b) * np.sqrt(rx_var * u_norm2)
        acc += float(np.sum(np.abs(coherent + z_rx) ** 2))
    return acc / samples


def mc_mse_dl(k: int, state: SolverState, eff: EffectiveChannels,
              cfg: SystemConfig, samples: int,
              rng: np.random.Generator) -> float:
    """Estimate E|u1_k y_k - s_k|^2 by simulating the full receive signal.

    The user's own distortion variance is taken as (1-xi) times the
    empirical mean incident power of the same simulation, keeping the
    estimate independent of the closed forms.
    """
    hw = cfg.hw
    incidents = []
    symbols = []
    for b in _batches(samples):
        incident, s = _dl_incident(k, state, eff, cfg, b, rng)
        incidents.append(incident)
        symbols.append(s[:, k])
    incident = np.concatenate(incidents)
    s_k = np.concatenate(symbols)
    var_z = hw.bar_ue_dl * float(np.mean(np.abs(incident) ** 2))
    z_ue = _cn(rng, incident.shape[0]) * np.sqrt(var_z)
    noise = _cn(rng, incident.shape[0]) * np.sqrt(cfg.noise_dl)
    y = np.sqrt(hw.xi_ue_dl) * incident + z_ue + noise
    return float(np.mean(np.abs(state.u1[k] * y - s_k) ** 2))


def mc_mse_ul(l: int, state: SolverState, eff: EffectiveChannels,
              cfg: SystemConfig, samples: int,
              rng: np.random.Generator) -> float:
    """Estimate E|u_l^H y - q_l|^2 including the self-interference path."""
    hw = cfg.hw
    u_l = state.u[l]
    acc = 0.0
    # Receive-distortion variance per element: uplink total power plus
    # per-antenna self-interference power (estimated empirically).
    var_parts = 0.0
    probe = 20_000
    x_probe, _ = _draw_ul_symbols(state, cfg, probe, rng)
    var_parts += float(np.mean(np.sum(np.abs(x_probe @ eff.g_bar) ** 2, axis=1)))
    x_dl_probe, _ = _draw_bs_signal(state, cfg, probe, rng)
    var_parts += cfg.rsi_variance * float(np.mean(np.sum(np.abs(x_dl_probe) ** 2, axis=1)))
    rx_var = hw.bar_bs_ul * var_parts
    for b in _batches(samples):
        x_ul, q = _draw_ul_symbols(state, cfg, b, rng)
        y = np.sqrt(hw.xi_bs_ul) * x_ul @ eff.g_bar
        x_dl, _ = _draw_bs_signal(state, cfg, b, rng, spread_distortion=True)
        si = np.sqrt(hw.xi_bs_ul) * _si_contraction(
            u_l, x_dl, b, cfg.n_tx, rng, cfg.rsi_variance)
        z_rx = _cn(rng, b, cfg.n_tx) * np.sqrt(rx_var)
        noise = _cn(rng, b, cfg.n_tx) * np.sqrt(cfg.noise_ul)
        q_hat = (y + z_rx + noise) @ np.conj(u_l) + si
        acc += float(np.sum(np.abs(q_hat - q[:, l]) ** 2))
    return acc / samples
