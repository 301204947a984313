"""Gradient ascent over surface phase angles for fixed transceivers.

For fixed beamformers, combiners and uplink powers, every squared channel
magnitude entering the SINRs is a quadratic form in the reflection vector
v = exp(j*phi).  Caching the quadratic/linear/constant coefficients of each
term makes the objective and its analytic gradient O(M^2) per evaluation;
internally all forward-pattern terms are stacked into one tensor so an
evaluation is a handful of fused matmuls.  The angles are unconstrained;
wrap-around to [0, 2pi) keeps them canonical without changing the objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (ChannelSet, ConfigError, PhaseVector, SolverState,
                    SystemConfig, rsi_power)
from .wmmse import Counters

LN2 = math.log(2.0)

# Uplink SINR denominators below this are treated as a switched-off user
# (zero combiner); keeps the masked lanes clear of denormal underflow.
ACTIVE_FLOOR = 1e-150


@dataclass(frozen=True)
class ArmijoParams:
    """Backtracking line-search constants."""

    eta0: float = 1.0
    shrink: float = 0.5
    c: float = 1e-4
    max_backtracks: int = 40


@dataclass(frozen=True)
class QuadraticTermCache:
    """Coefficients of every SINR term as a quadratic form in exp(j*phi).

    Forward-pattern terms (beam gains `a/c`, channel-power `m/y`, cross
    interference `b/f`, uplink beam gains `z/d`) are stacked along the first
    axis of `fwd_mats`/`fwd_lins`/`fwd_consts` in that order; the per-family
    views below recover the named coefficient arrays.  The uplink
    array-power term (`x/e`) uses the conjugated sign pattern and is kept
    separate.  All M-by-M coefficient matrices are Hermitian.
    """

    n_dl: int
    n_ul: int
    m: int
    fwd_mats: np.ndarray    # (K^2 + K + L*K + L^2, M, M)
    fwd_lins: np.ndarray    # (..., M)
    fwd_consts: np.ndarray  # (...,)
    x_tilde: np.ndarray     # (L, M, M)
    e_tilde: np.ndarray     # (L, M)
    t_const: np.ndarray     # (L,)
    # hardware/noise constants of the rate expressions
    f1: float
    f2: float
    f3: float
    e1: float
    e2: float
    e3: np.ndarray          # (L,)
    e4: np.ndarray          # (L,)
    xi_bs_dl: float
    xi_bs_ul: float
    noise_dl: float
    w_dl: np.ndarray        # (K,) alpha_dl * beta_dl
    w_ul: np.ndarray        # (L,) alpha_ul * beta_ul
    sl_b: slice
    sl_q: slice
    sl_c: slice
    sl_bt: slice

    @property
    def a_tilde(self) -> np.ndarray:
        k, m = self.n_dl, self.m
        return self.fwd_mats[self.sl_b].reshape(k, k, m, m)

    @property
    def c_tilde(self) -> np.ndarray:
        k, m = self.n_dl, self.m
        return self.fwd_lins[self.sl_b].reshape(k, k, m)

    @property
    def m_tilde(self) -> np.ndarray:
        return self.fwd_mats[self.sl_q]

    @property
    def y_tilde(self) -> np.ndarray:
        return self.fwd_lins[self.sl_q]

    @property
    def b_tilde(self) -> np.ndarray:
        k, l, m = self.n_dl, self.n_ul, self.m
        return self.fwd_mats[self.sl_c].reshape(l, k, m, m)

    @property
    def f_tilde(self) -> np.ndarray:
        k, l, m = self.n_dl, self.n_ul, self.m
        return self.fwd_lins[self.sl_c].reshape(l, k, m)

    @property
    def z_tilde(self) -> np.ndarray:
        l, m = self.n_ul, self.m
        return self.fwd_mats[self.sl_bt].reshape(l, l, m, m)

    @property
    def d_tilde(self) -> np.ndarray:
        l, m = self.n_ul, self.m
        return self.fwd_lins[self.sl_bt].reshape(l, l, m)


@dataclass(frozen=True)
class TermValues:
    """Evaluated scalar terms at one phase vector."""

    b: np.ndarray    # (K, K) beam gains |h_bar_k^H w_i|^2
    q: np.ndarray    # (K,)   channel powers ||h_bar_k||^2
    c: np.ndarray    # (L, K) cross interference |f_bar_{l,k}|^2 rho_l
    bt: np.ndarray   # (L, L) uplink beam gains |u_l^H g_bar_j|^2 rho_j
    t: np.ndarray    # (L,)   uplink array powers ||g_bar_j||^2 rho_j


@dataclass(frozen=True)
class AscentReport:
    """Outcome of one gradient-ascent call."""

    iterations: int
    objective_trace: np.ndarray
    grad_norm: float
    step_sizes: np.ndarray
    phases: PhaseVector


def build_cache(state: SolverState, channels: ChannelSet,
                cfg: SystemConfig) -> QuadraticTermCache:
    """Precompute all quadratic-form coefficients for the current state."""
    k_users, l_users, m = cfg.n_dl_users, cfg.n_ul_users, channels.m_total
    if m != cfg.m_total:
        raise ConfigError(
            f"channel set has {m} surface elements, config expects {cfg.m_total}")
    hw = cfg.hw
    hhat, ghat, hst = channels.h_hat, channels.g_hat, channels.h_stack
    sqrt_rho = state.p

    hw_beams = hst @ state.w.T                                    # (M, K): col i = H w_i
    # a[k, i] = diag(hhat_k^H) H w_i; c[k, i] = h_k^H w_i
    a_all = np.conj(hhat)[:, None, :] * hw_beams.T[None, :, :]    # (K, K, M)
    c_all = np.conj(channels.h_direct) @ state.w.T                # (K, K)

    m_all = np.conj(hhat)[:, :, None] * hst[None, :, :]           # (K, M, N_t)
    y_tilde = np.einsum('kmj,kj->km', m_all, channels.h_direct)

    # b[l, k] = diag(hhat_k^H) ghat_l sqrt(rho_l); f1[l, k] = f_{l,k} sqrt(rho_l)
    b_all = np.conj(hhat)[None, :, :] * ghat[:, None, :] * sqrt_rho[:, None, None]
    f1_all = channels.f_uu * sqrt_rho[:, None]

    # z[l, j] = diag(u_l^H H^H) ghat_j sqrt(rho_j); d[l, j] = u_l^H g_j sqrt(rho_j)
    hu = np.conj(hst @ state.u.T)                                 # (M, L): col l = conj(H u_l)
    z_all = hu.T[:, None, :] * ghat[None, :, :] * sqrt_rho[None, :, None]
    d_all = np.conj(state.u) @ channels.g_direct.T * sqrt_rho[None, :]

    s_all = np.conj(hst).T[None, :, :] * ghat[:, None, :] * sqrt_rho[:, None, None]
    x_tilde = np.einsum('ljm,ljn->lmn', np.conj(s_all), s_all)
    e_tilde = np.einsum('ljm,lj->lm', np.conj(s_all), channels.g_direct) * sqrt_rho[:, None]
    t_const = np.sum(np.abs(channels.g_direct) ** 2, axis=1) * state.rho

    # rank-1 outer products for a/b/z; the channel-power family is built from
    # its (M, N_t) factor separately since it is not rank-1 in general
    rank1 = np.concatenate([a_all.reshape(-1, m), b_all.reshape(-1, m),
                            z_all.reshape(-1, m)])
    rank1_mats = rank1[:, :, None] * np.conj(rank1)[:, None, :]
    m_tilde = np.einsum('kmj,knj->kmn', m_all, np.conj(m_all))
    n_b, n_c = k_users * k_users, l_users * k_users
    fwd_mats = np.concatenate([rank1_mats[:n_b], m_tilde,
                               rank1_mats[n_b:n_b + n_c], rank1_mats[n_b + n_c:]])
    fwd_lins = np.concatenate([
        (a_all * np.conj(c_all)[:, :, None]).reshape(-1, m),
        y_tilde,
        (b_all * np.conj(f1_all)[:, :, None]).reshape(-1, m),
        (z_all * np.conj(d_all)[:, :, None]).reshape(-1, m)])
    fwd_consts = np.concatenate([
        (np.abs(c_all) ** 2).ravel(),
        np.sum(np.abs(channels.h_direct) ** 2, axis=1),
        (np.abs(f1_all) ** 2).ravel(),
        (np.abs(d_all) ** 2).ravel()])

    u_norm2 = np.sum(np.abs(state.u) ** 2, axis=1)
    e4 = np.array([rsi_power(state.u[l], state, cfg) for l in range(l_users)])
    e4 = e4 + cfg.noise_ul * u_norm2
    n_b, n_q = k_users * k_users, k_users
    return QuadraticTermCache(
        n_dl=k_users, n_ul=l_users, m=m,
        fwd_mats=fwd_mats, fwd_lins=fwd_lins, fwd_consts=fwd_consts,
        x_tilde=x_tilde, e_tilde=e_tilde, t_const=t_const,
        f1=hw.xi_ue_dl * hw.xi_bs_dl,
        f2=hw.bar_ue_dl * hw.xi_bs_dl,
        f3=hw.bar_bs_dl * state.bs_power(),
        e1=hw.xi_ue_ul * hw.xi_bs_ul,
        e2=hw.bar_ue_ul * hw.xi_bs_ul,
        e3=hw.bar_bs_ul * u_norm2,
        e4=e4,
        xi_bs_dl=hw.xi_bs_dl, xi_bs_ul=hw.xi_bs_ul, noise_dl=cfg.noise_dl,
        w_dl=cfg.alpha_dl * cfg.beta_dl_arr,
        w_ul=cfg.alpha_ul * cfg.beta_ul_arr,
        sl_b=slice(0, n_b), sl_q=slice(n_b, n_b + n_q),
        sl_c=slice(n_b + n_q, n_b + n_q + n_c),
        sl_bt=slice(n_b + n_q + n_c, n_b + n_q + n_c + l_users * l_users),
    )


def _term_values(cache: QuadraticTermCache,
                 v: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(forward stack values, T values, forward contraction) at v."""
    vc = np.conj(v)
    rf = cache.fwd_mats @ vc
    vals_f = (rf @ v).real + 2.0 * (cache.fwd_lins @ v).real + cache.fwd_consts
    rt = cache.x_tilde @ v
    vals_t = (rt @ vc).real + 2.0 * (cache.e_tilde @ vc).real + cache.t_const
    return vals_f, vals_t, rf


def eval_terms(cache: QuadraticTermCache, phases: PhaseVector) -> TermValues:
    """Evaluate every cached quadratic term at the given phases."""
    vals_f, vals_t, _ = _term_values(cache, phases.v)
    k, l = cache.n_dl, cache.n_ul
    return TermValues(
        b=vals_f[cache.sl_b].reshape(k, k),
        q=vals_f[cache.sl_q],
        c=vals_f[cache.sl_c].reshape(l, k),
        bt=vals_f[cache.sl_bt].reshape(l, l),
        t=vals_t)


def _sinr_pieces(cache: QuadraticTermCache, vals_f: np.ndarray,
                 vals_t: np.ndarray):
    """(own-signal, denominator) pairs of the DL and UL SINRs."""
    k, l = cache.n_dl, cache.n_ul
    if k:
        b = vals_f[cache.sl_b].reshape(k, k)
        own_dl = b.diagonal()
        d_dl = (cache.xi_bs_dl * (b.sum(axis=1) - own_dl)
                + cache.f2 * own_dl + cache.f3 * vals_f[cache.sl_q]
                + vals_f[cache.sl_c].reshape(l, k).sum(axis=0) + cache.noise_dl)
    else:
        own_dl = d_dl = np.zeros(0)
    if l:
        bt = vals_f[cache.sl_bt].reshape(l, l)
        own_ul = bt.diagonal()
        d_ul = (cache.xi_bs_ul * (bt.sum(axis=1) - own_ul)
                + cache.e2 * own_ul + cache.e3 * vals_t.sum() + cache.e4)
    else:
        own_ul = d_ul = np.zeros(0)
    return own_dl, d_dl, own_ul, d_ul


def _objective_from_v(cache: QuadraticTermCache, v: np.ndarray) -> float:
    vals_f, vals_t, _ = _term_values(cache, v)
    own_dl, d_dl, own_ul, d_ul = _sinr_pieces(cache, vals_f, vals_t)
    total = 0.0
    if cache.n_dl:
        total += float(cache.w_dl @ np.log2(1.0 + cache.f1 * own_dl / d_dl))
    if cache.n_ul:
        # A (near-)zeroed combiner nulls numerator and denominator together;
        # that user's rate is identically zero.
        active = d_ul > ACTIVE_FLOOR
        safe = np.where(active, d_ul, 1.0)
        gam = np.where(active, cache.e1 * own_ul / safe, 0.0)
        total += float(cache.w_ul @ np.log2(1.0 + gam))
    return total


def objective_f(cache: QuadraticTermCache, phases: PhaseVector,
                cfg: SystemConfig) -> float:
    """Weighted sum-rate as a function of the phases alone."""
    return _objective_from_v(cache, phases.v)


def term_derivative(cache: QuadraticTermCache, phases: PhaseVector, n: int,
                    which: str, index: tuple[int, ...] | int) -> float:
    """Partial derivative of one cached term w.r.t. phase angle n.

    `which` selects the term family: 'b', 'q', 'c', 'bt' (forward pattern)
    or 't' (conjugated pattern); `index` carries the user/beam indices.
    """
    v = phases.v
    if which == 't':
        mat, lin = cache.x_tilde[index], cache.e_tilde[index]
        s = lin[n] + mat[n] @ v - mat[n, n] * v[n]
        return float(2.0 * np.real(-1j * np.conj(v[n]) * s))
    mat, lin = {
        'b': (cache.a_tilde, cache.c_tilde),
        'q': (cache.m_tilde, cache.y_tilde),
        'c': (cache.b_tilde, cache.f_tilde),
        'bt': (cache.z_tilde, cache.d_tilde),
    }[which]
    mat, lin = mat[index], lin[index]
    s = lin[n] + mat[n] @ np.conj(v) - mat[n, n] * np.conj(v[n])
    return float(2.0 * np.real(1j * v[n] * s))


def _rate_partial_arrays(cache: QuadraticTermCache,
                         v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """d(rate)/d(phi_n) for every DL user (K, M) and UL user (L, M).

    The Hermitian diagonals contribute purely imaginary summands under j*,
    so they drop from the real part and no t != n exclusion is needed in
    the stacked derivative formulas.
    """
    k_users, l_users, m = cache.n_dl, cache.n_ul, cache.m
    vals_f, vals_t, rf = _term_values(cache, v)
    own_dl, d_dl, own_ul, d_ul = _sinr_pieces(cache, vals_f, vals_t)
    d_f = -2.0 * np.imag(v[None, :] * (cache.fwd_lins + rf))
    d_t = 2.0 * np.imag(np.conj(v)[None, :] * (cache.e_tilde + cache.x_tilde @ v))

    dl = np.zeros((k_users, m))
    if k_users:
        db = d_f[cache.sl_b].reshape(k_users, k_users, m)
        dq = d_f[cache.sl_q]
        dc = d_f[cache.sl_c].reshape(l_users, k_users, m)
        own = np.einsum('kkm->km', db)
        d_prime = (cache.xi_bs_dl * (db.sum(axis=1) - own)
                   + cache.f2 * own + cache.f3 * dq + dc.sum(axis=0))
        num = cache.f1 * (own * d_dl[:, None] - own_dl[:, None] * d_prime)
        dl = num / (LN2 * d_dl * (d_dl + cache.f1 * own_dl))[:, None]

    ul = np.zeros((l_users, m))
    if l_users:
        dbt = d_f[cache.sl_bt].reshape(l_users, l_users, m)
        own = np.einsum('llm->lm', dbt)
        d_prime = (cache.xi_bs_ul * (dbt.sum(axis=1) - own) + cache.e2 * own
                   + cache.e3[:, None] * d_t.sum(axis=0)[None, :])
        num = cache.e1 * (own * d_ul[:, None] - own_ul[:, None] * d_prime)
        # Zeroed combiner: the user's rate is identically zero in the phases.
        active = d_ul > ACTIVE_FLOOR
        safe = np.where(active, d_ul, 1.0)
        den = (LN2 * safe * (safe + cache.e1 * own_ul))[:, None]
        ul = np.where(active[:, None], num / den, 0.0)
    return dl, ul


def rate_partials(cache: QuadraticTermCache, phases: PhaseVector, n: int,
                  cfg: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-user rate partials w.r.t. a single phase angle n."""
    dl, ul = _rate_partial_arrays(cache, phases.v)
    return dl[:, n], ul[:, n]


def _gradient_from_v(cache: QuadraticTermCache, v: np.ndarray) -> np.ndarray:
    dl, ul = _rate_partial_arrays(cache, v)
    g = np.zeros(cache.m)
    if cache.n_dl:
        g += cache.w_dl @ dl
    if cache.n_ul:
        g += cache.w_ul @ ul
    return g


def gradient(cache: QuadraticTermCache, phases: PhaseVector,
             cfg: SystemConfig) -> np.ndarray:
    """Analytic gradient of the weighted sum-rate w.r.t. all phase angles."""
    return _gradient_from_v(cache, phases.v)


# ---------------------------------------------------------------------------
# Ascent loop
# ---------------------------------------------------------------------------

def _line_search_raw(cache: QuadraticTermCache, phi: np.ndarray,
                     direction: np.ndarray, f0: float, params: ArmijoParams,
                     counters: Counters | None = None) -> float:
    d2 = float(direction @ direction)
    eta = params.eta0
    for _ in range(params.max_backtracks + 1):
        trial = _objective_from_v(cache, np.exp(1j * (phi + eta * direction)))
        if counters is not None:
            counters.objective_evals += 1
        if trial >= f0 + params.c * eta * d2:
            return eta
        eta *= params.shrink
    return 0.0


def armijo_line_search(cache: QuadraticTermCache, phases: PhaseVector,
                       direction: np.ndarray, cfg: SystemConfig,
                       params: ArmijoParams = ArmijoParams(),
                       counters: Counters | None = None) -> float:
    """Largest backtracked step satisfying the sufficient-increase condition.

    Returns 0.0 when no tested step improves the objective enough, which the
    caller treats as convergence.
    """
    f0 = _objective_from_v(cache, phases.v)
    return _line_search_raw(cache, phases.phi, direction, f0, params, counters)


def gradient_ascent(state: SolverState, channels: ChannelSet,
                    cfg: SystemConfig, phases0: PhaseVector,
                    eps2: float = 1e-4, max_iter: int = 300,
                    params: ArmijoParams = ArmijoParams(),
                    counters: Counters | None = None) -> AscentReport:
    """Maximize the sum-rate over phases for the given transceiver state.

    The term cache is built once per call and reused by every step; each
    accepted step strictly increases the objective.  Stops when the gradient
    norm falls below eps2, no improving step exists, or max_iter is reached.
    """
    cache = build_cache(state, channels, cfg)
    phi = phases0.phi
    trace = [_objective_from_v(cache, np.exp(1j * phi))]
    steps = []
    iters = 0
    g = _gradient_from_v(cache, np.exp(1j * phi))
    start = params.eta0
    for _ in range(max_iter):
        if counters is not None:
            counters.gradient_evals += 1
        grad_norm = float(np.linalg.norm(g))
        if grad_norm < eps2:
            break
        local = params if start == params.eta0 else \
            ArmijoParams(eta0=start, shrink=params.shrink, c=params.c,
                         max_backtracks=params.max_backtracks)
        eta = _line_search_raw(cache, phi, g, trace[-1], local, counters)
        if eta == 0.0:
            break
        phi_new = phi + eta * g
        g_new = _gradient_from_v(cache, np.exp(1j * phi_new))
        # Curvature-seeded start for the next backtracking pass
        # (secant step along the last move); the Armijo test still gates
        # every accepted step, so monotone ascent is preserved.
        s_vec = phi_new - phi
        y_vec = g - g_new
        sy = float(s_vec @ y_vec)
        start = min(params.eta0, float(s_vec @ s_vec) / sy) if sy > 1e-300 \
            else params.eta0
        phi, g = phi_new, g_new
        trace.append(_objective_from_v(cache, np.exp(1j * phi)))
        steps.append(eta)
        iters += 1
        if counters is not None:
            counters.ascent_iters += 1
    phases = PhaseVector(phi)
    grad_norm = float(np.linalg.norm(_gradient_from_v(cache, phases.v)))
    return AscentReport(iterations=iters, objective_trace=np.asarray(trace),
                        grad_norm=grad_norm, step_sizes=np.asarray(steps),
                        phases=phases)
