"""Alternating weighted-MMSE solver for fixed surface phases.

For given effective channels, the weighted sum-rate problem is equivalent to
minimizing the weighted-MSE objective

    alpha1 * sum_k beta_k (mu_k e_k - ln mu_k) + alpha2 * sum_l beta_l (mu_l e_l - ln mu_l)

over beamformers, combiners, decoding scalars, uplink amplitudes and MSE
weights.  Each block has a closed-form minimizer; cycling through them is a
block-coordinate descent whose objective never increases.  The beamformer
block is solved through its Lagrangian: a single Hermitian eigendecomposition
turns the power constraint into a scalar equation J(lambda) = P solved by
bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .model import (EffectiveChannels, SolverError, SolverState, SystemConfig,
                    swsr)

# Eigenvalues below this fraction of the largest are treated as zero when
# forming the positive-eigenvalue basis.
RANK_THRESHOLD = 1e-10
BISECTION_TOL = 1e-8
MAX_BRACKET_DOUBLINGS = 60


@dataclass
class Counters:
    """Operation counters for complexity reporting."""

    matrix_solves: int = 0
    eig_decomps: int = 0
    gradient_evals: int = 0
    objective_evals: int = 0
    wmmse_iters: int = 0
    ascent_iters: int = 0

    def merge(self, other: "Counters") -> None:
        for name in self.__dataclass_fields__:
            setattr(self, name, getattr(self, name) + getattr(other, name))


@dataclass(frozen=True)
class BeamformerSubproblem:
    """Precomputed pieces of the beamformer block for one set of weights.

    `a_matrix` is the Hermitian PSD quadratic form of the Lagrangian;
    `eigvecs_pos`/`eigvals_pos` span its strictly positive eigenspace, and
    `h_tilde` holds the projected channel outer products whose diagonals give
    the spectral form of the transmit power J(lambda).
    """

    a_matrix: np.ndarray        # (N_t, N_t)
    eigvecs_pos: np.ndarray     # (N_t, N_tau)
    eigvals_pos: np.ndarray     # (N_tau,)
    rhs: np.ndarray             # (K, N_t)
    h_tilde: np.ndarray         # (K, N_tau, N_tau)
    j_scale: np.ndarray         # (K,) coefficients of the spectral power sum

    @property
    def n_tau(self) -> int:
        return self.eigvals_pos.shape[0]


@dataclass(frozen=True)
class WmmseReport:
    """Outcome of one alternating-solver run."""

    iterations: int
    swsr_trace: np.ndarray
    objective_trace: np.ndarray
    converged: bool
    state: SolverState


# ---------------------------------------------------------------------------
# MSE expressions
# ---------------------------------------------------------------------------

def _dl_mse_quadratic(k: int, state: SolverState, eff: EffectiveChannels,
                      cfg: SystemConfig) -> float:
    """Total received-power term multiplying |u1_k|^2 in the DL MSE."""
    hw = cfg.hw
    gains = np.abs(np.conj(eff.h_bar[k]) @ state.w.T) ** 2
    return (hw.xi_bs_dl * float(np.sum(gains))
            + hw.bar_bs_dl * float(eff.h_bar_norm2[k]) * state.bs_power()
            + float(np.sum(state.rho * np.abs(eff.f_bar[:, k]) ** 2))
            + cfg.noise_dl)


def mse_dl(k: int, state: SolverState, eff: EffectiveChannels,
           cfg: SystemConfig) -> float:
    """Mean-square symbol error of downlink user k."""
    hw = cfg.hw
    d = _dl_mse_quadratic(k, state, eff, cfg)
    desired = np.conj(eff.h_bar[k]) @ state.w[k]
    return (abs(state.u1[k]) ** 2 * d
            - 2.0 * math.sqrt(hw.xi_ue_dl * hw.xi_bs_dl)
            * float(np.real(state.u1[k] * desired)) + 1.0)


def _ul_noise_floor(state: SolverState, eff: EffectiveChannels,
                    cfg: SystemConfig) -> float:
    """Scalar multiplying |u_l|^2 in the UL MSE (distortion + RSI + noise)."""
    hw = cfg.hw
    return (hw.bar_bs_ul * float(np.sum(eff.g_bar_norm2 * state.rho))
            + state.bs_power() * cfg.rsi_variance * hw.rsi_bracket(cfg.n_tx)
            + cfg.noise_ul)


def mse_ul(l: int, state: SolverState, eff: EffectiveChannels,
           cfg: SystemConfig) -> float:
    """Mean-square symbol error of uplink user l."""
    hw = cfg.hw
    u_l = state.u[l]
    gains = np.abs(np.conj(u_l) @ eff.g_bar.T) ** 2
    quad = (hw.xi_bs_ul * float(np.sum(gains * state.rho))
            + float(np.sum(np.abs(u_l) ** 2)) * _ul_noise_floor(state, eff, cfg))
    desired = np.conj(u_l) @ eff.g_bar[l]
    return (quad - 2.0 * math.sqrt(hw.xi_ue_ul * hw.xi_bs_ul) * state.p[l]
            * float(np.real(desired)) + 1.0)


def p2_objective(state: SolverState, eff: EffectiveChannels,
                 cfg: SystemConfig) -> float:
    """Weighted-MSE objective minimized by the alternating solver."""
    total = 0.0
    for k in range(cfg.n_dl_users):
        total += cfg.alpha_dl * cfg.beta_dl[k] * (
            state.mu_dl[k] * mse_dl(k, state, eff, cfg) - math.log(state.mu_dl[k]))
    for l in range(cfg.n_ul_users):
        total += cfg.alpha_ul * cfg.beta_ul[l] * (
            state.mu_ul[l] * mse_ul(l, state, eff, cfg) - math.log(state.mu_ul[l]))
    return total


# ---------------------------------------------------------------------------
# Closed-form block updates
# ---------------------------------------------------------------------------

def update_u1k(k: int, state: SolverState, eff: EffectiveChannels,
               cfg: SystemConfig) -> complex:
    """MMSE-optimal scalar decoding coefficient for downlink user k."""
    hw = cfg.hw
    d = _dl_mse_quadratic(k, state, eff, cfg)
    num = math.sqrt(hw.xi_ue_dl * hw.xi_bs_dl) * (np.conj(state.w[k]) @ eff.h_bar[k])
    return complex(num / d)


def _ul_system_matrix(state: SolverState, eff: EffectiveChannels,
                      cfg: SystemConfig) -> np.ndarray:
    hw = cfg.hw
    m = np.eye(cfg.n_tx, dtype=complex) * _ul_noise_floor(state, eff, cfg)
    if cfg.n_ul_users:
        m += hw.xi_bs_ul * (eff.g_bar.T * state.rho) @ np.conj(eff.g_bar)
    return m


def update_ul(l: int, state: SolverState, eff: EffectiveChannels,
              cfg: SystemConfig) -> np.ndarray:
    """MMSE combining vector for uplink user l (linear solve, no inverse)."""
    hw = cfg.hw
    rhs = math.sqrt(hw.xi_ue_ul * hw.xi_bs_ul) * state.p[l] * eff.g_bar[l]
    try:
        return np.linalg.solve(_ul_system_matrix(state, eff, cfg), rhs)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - PD by sigma_UL > 0
        raise SolverError(f"combiner solve failed for user {l}: {exc}") from exc


def _update_all_ul(state: SolverState, eff: EffectiveChannels,
                   cfg: SystemConfig) -> np.ndarray:
    """All L combiners with a single factorization of the shared matrix."""
    if cfg.n_ul_users == 0:
        return state.u
    hw = cfg.hw
    rhs = (math.sqrt(hw.xi_ue_ul * hw.xi_bs_ul) * state.p[:, None] * eff.g_bar).T
    try:
        return np.linalg.solve(_ul_system_matrix(state, eff, cfg), rhs).T
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise SolverError(f"combiner solve failed: {exc}") from exc


def update_weights(state: SolverState, eff: EffectiveChannels,
                   cfg: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    """Optimal MSE weights mu = 1/e for both link directions."""
    e_dl = np.array([mse_dl(k, state, eff, cfg) for k in range(cfg.n_dl_users)])
    e_ul = np.array([mse_ul(l, state, eff, cfg) for l in range(cfg.n_ul_users)])
    for e in (e_dl, e_ul):
        if np.any(e <= 1e-12):
            raise SolverError(f"degenerate MSE {e.min() if e.size else 0.0} <= 1e-12")
    return 1.0 / e_dl, 1.0 / e_ul


# ---------------------------------------------------------------------------
# Beamformer block
# ---------------------------------------------------------------------------

def build_beamformer_subproblem(state: SolverState, eff: EffectiveChannels,
                                cfg: SystemConfig,
                                counters: Counters | None = None) -> BeamformerSubproblem:
    """Assemble and eigendecompose the quadratic form of the beamformer block."""
    hw = cfg.hw
    n_t = cfg.n_tx
    coeff = cfg.alpha_dl * cfg.beta_dl_arr * state.mu_dl * np.abs(state.u1) ** 2  # (K,)
    a = np.zeros((n_t, n_t), dtype=complex)
    if cfg.n_dl_users:
        a += hw.xi_bs_dl * (eff.h_bar.T * coeff) @ np.conj(eff.h_bar)
        a += hw.bar_bs_dl * float(coeff @ eff.h_bar_norm2) * np.eye(n_t)
    if cfg.n_ul_users:
        u_norm2 = np.sum(np.abs(state.u) ** 2, axis=1)
        ul_coeff = cfg.alpha_ul * float(cfg.beta_ul_arr @ (state.mu_ul * u_norm2))
        a += (cfg.rsi_variance * hw.rsi_bracket(n_t) * ul_coeff) * np.eye(n_t)
    a = 0.5 * (a + np.conj(a.T))  # enforce exact Hermitian symmetry
    try:
        eigvals, eigvecs = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise SolverError(f"eigendecomposition failed: {exc}") from exc
    if counters is not None:
        counters.eig_decomps += 1
    cutoff = RANK_THRESHOLD * max(float(eigvals[-1]), 0.0)
    keep = eigvals > cutoff
    t1 = eigvecs[:, keep]
    lam1 = eigvals[keep]
    scale = math.sqrt(hw.xi_ue_dl * hw.xi_bs_dl) * cfg.alpha_dl
    rhs = (scale * cfg.beta_dl_arr * state.mu_dl * np.conj(state.u1))[:, None] * eff.h_bar
    proj = np.conj(t1.T) @ eff.h_bar.T                      # (N_tau, K)
    h_tilde = np.einsum('ik,jk->kij', proj, np.conj(proj))  # (K, N_tau, N_tau)
    j_scale = (hw.xi_ue_dl * hw.xi_bs_dl * cfg.alpha_dl ** 2
               * cfg.beta_dl_arr ** 2 * state.mu_dl ** 2 * np.abs(state.u1) ** 2)
    return BeamformerSubproblem(a_matrix=a, eigvecs_pos=t1, eigvals_pos=lam1,
                                rhs=rhs, h_tilde=h_tilde, j_scale=j_scale)


def w_of_lambda(sub: BeamformerSubproblem, lam: float) -> np.ndarray:
    """Stationary beamformers (A + lambda I)^{-1} rhs_k for all k.

    Solved in the positive-eigenvalue basis.  At lambda = 0 with singular A
    the null-space component is dropped (regularized limit); by construction
    the right-hand sides lie in the range of A, so nothing is lost.
    """
    if lam < 0:
        raise SolverError(f"lambda must be nonnegative, got {lam}")
    proj = np.conj(sub.eigvecs_pos.T) @ sub.rhs.T          # (N_tau, K)
    w = (sub.eigvecs_pos @ (proj / (sub.eigvals_pos + lam)[:, None])).T
    if sub.n_tau < sub.a_matrix.shape[0]:
        residual = sub.rhs - (sub.eigvecs_pos @ proj).T
        if lam > 0:
            w = w + residual / lam
        # lam == 0: residual is the null-space component, dropped by the limit
    return w


def j_of_lambda(sub: BeamformerSubproblem, lam: float) -> float:
    """Total transmit power of w(lambda), via the spectral diagonal form."""
    if sub.n_tau == 0:
        return 0.0
    diag = np.einsum('kii->ki', sub.h_tilde).real           # (K, N_tau)
    weights = 1.0 / (sub.eigvals_pos + lam) ** 2
    return float(np.sum(sub.j_scale @ (diag * weights[None, :])))


def lambda_upper_bound(sub: BeamformerSubproblem, p_max_bs: float) -> float:
    """Bisection bracket: smallest lambda with guaranteed J(lambda) <= P."""
    if sub.n_tau == 0:
        return 0.0
    diag = np.einsum('kii->ki', sub.h_tilde).real
    total = float(np.sum(sub.j_scale @ diag))
    return math.sqrt(total / p_max_bs)


def solve_beamformer(sub: BeamformerSubproblem, p_max_bs: float,
                     tol: float = BISECTION_TOL,
                     counters: Counters | None = None) -> tuple[np.ndarray, float]:
    """Power-constrained beamformer update.

    Returns the unconstrained stationary point when it is feasible
    (complementary slackness with lambda = 0); otherwise bisects J(lambda) = P
    on [0, lambda_max].  The returned beamformers never exceed the budget.
    """
    if p_max_bs <= 0:
        raise SolverError("p_max_bs must be positive")
    if counters is not None:
        counters.matrix_solves += sub.rhs.shape[0]
    if j_of_lambda(sub, 0.0) <= p_max_bs:
        return w_of_lambda(sub, 0.0), 0.0
    lam_hi = lambda_upper_bound(sub, p_max_bs)
    doublings = 0
    while j_of_lambda(sub, lam_hi) > p_max_bs:
        lam_hi *= 2.0
        doublings += 1
        if doublings > MAX_BRACKET_DOUBLINGS:
            raise SolverError("could not bracket the power constraint")
    lam_lo = 0.0
    for _ in range(300):
        if abs(j_of_lambda(sub, lam_hi) - p_max_bs) <= tol * p_max_bs:
            break
        mid = 0.5 * (lam_lo + lam_hi)
        if j_of_lambda(sub, mid) > p_max_bs:
            lam_lo = mid
        else:
            lam_hi = mid
    return w_of_lambda(sub, lam_hi), lam_hi


# ---------------------------------------------------------------------------
# Uplink power block
# ---------------------------------------------------------------------------

def update_power(l: int, state: SolverState, eff: EffectiveChannels,
                 cfg: SystemConfig) -> float:
    """Clamped stationary uplink amplitude for user l."""
    hw = cfg.hw
    num = (cfg.alpha_ul * math.sqrt(hw.xi_ue_ul * hw.xi_bs_ul) * cfg.beta_ul[l]
           * state.mu_ul[l] * float(np.real(np.conj(state.u[l]) @ eff.g_bar[l])))
    den = 0.0
    if cfg.n_dl_users:
        den += cfg.alpha_dl * float(
            (cfg.beta_dl_arr * state.mu_dl * np.abs(state.u1) ** 2)
            @ (np.abs(eff.f_bar[l]) ** 2))
    combine_gains = np.abs(state.u @ np.conj(eff.g_bar[l])) ** 2       # |g_l^H u_j|^2
    u_norm2 = np.sum(np.abs(state.u) ** 2, axis=1)
    ul_w = cfg.beta_ul_arr * state.mu_ul
    den += cfg.alpha_ul * hw.xi_bs_ul * float(ul_w @ combine_gains)
    den += cfg.alpha_ul * hw.bar_bs_ul * float(eff.g_bar_norm2[l]) * float(ul_w @ u_norm2)
    p_cap = math.sqrt(cfg.p_max_ul[l])
    if den <= 0.0:
        return 0.0 if num <= 0.0 else p_cap
    return min(max(num / den, 0.0), p_cap)


# ---------------------------------------------------------------------------
# Full alternating loop
# ---------------------------------------------------------------------------

def init_state(eff: EffectiveChannels, cfg: SystemConfig) -> SolverState:
    """Starting point: matched-filter beams with an equal power split,
    full uplink amplitudes, unit weights, one combiner pass."""
    k_users, l_users, n_t = cfg.n_dl_users, cfg.n_ul_users, cfg.n_tx
    w = np.zeros((k_users, n_t), dtype=complex)
    if k_users:
        per_beam = cfg.p_max_bs / k_users
        for k in range(k_users):
            norm = math.sqrt(float(eff.h_bar_norm2[k]))
            if norm > 1e-300:
                w[k] = math.sqrt(per_beam) * eff.h_bar[k] / norm
    state = SolverState(
        w=w,
        u=np.zeros((l_users, n_t), dtype=complex),
        u1=np.zeros(k_users, dtype=complex),
        p=np.sqrt(np.asarray(cfg.p_max_ul, dtype=float)),
        mu_dl=np.ones(k_users),
        mu_ul=np.ones(l_users),
    )
    return replace(state, u=_update_all_ul(state, eff, cfg))


def run_wmmse(state0: SolverState, eff: EffectiveChannels, cfg: SystemConfig,
              eps1: float = 1e-3, max_iter: int = 200,
              counters: Counters | None = None) -> WmmseReport:
    """Cycle the closed-form updates until the SWSR change drops below eps1.

    Update order per iteration: decoding scalars, combiners, MSE weights,
    beamformers (with the per-iteration feasibility check), uplink
    amplitudes.  The weighted-MSE objective is non-increasing across cycles.
    """
    state0.validate(cfg)
    state = state0
    swsr_trace = [swsr(state, eff, cfg)]
    obj_trace = [p2_objective(state, eff, cfg)]
    converged = False
    iters = 0
    for _ in range(max_iter):
        iters += 1
        if cfg.n_dl_users:
            u1 = np.array([update_u1k(k, state, eff, cfg)
                           for k in range(cfg.n_dl_users)])
            state = replace(state, u1=u1)
        if cfg.n_ul_users:
            state = replace(state, u=_update_all_ul(state, eff, cfg))
            if counters is not None:
                counters.matrix_solves += cfg.n_ul_users
        mu_dl, mu_ul = update_weights(state, eff, cfg)
        state = replace(state, mu_dl=mu_dl, mu_ul=mu_ul)
        if cfg.n_dl_users:
            sub = build_beamformer_subproblem(state, eff, cfg, counters)
            w, _ = solve_beamformer(sub, cfg.p_max_bs, counters=counters)
            state = replace(state, w=w)
        if cfg.n_ul_users:
            p = np.array([update_power(l, state, eff, cfg)
                          for l in range(cfg.n_ul_users)])
            state = replace(state, p=p)
        swsr_trace.append(swsr(state, eff, cfg))
        obj_trace.append(p2_objective(state, eff, cfg))
        if counters is not None:
            counters.wmmse_iters += 1
        if abs(swsr_trace[-1] - swsr_trace[-2]) < eps1:
            converged = True
            break
    # Final receiver refresh: match decoders/combiners/weights to the final
    # transmitters.  The combiner update maximizes each uplink SINR and the
    # scalars/weights leave the SWSR unchanged, so this never lowers the
    # reported operating point.
    if cfg.n_dl_users:
        u1 = np.array([update_u1k(k, state, eff, cfg)
                       for k in range(cfg.n_dl_users)])
        state = replace(state, u1=u1)
    if cfg.n_ul_users:
        state = replace(state, u=_update_all_ul(state, eff, cfg))
        if counters is not None:
            counters.matrix_solves += cfg.n_ul_users
    mu_dl, mu_ul = update_weights(state, eff, cfg)
    state = replace(state, mu_dl=mu_dl, mu_ul=mu_ul)
    swsr_trace.append(swsr(state, eff, cfg))
    obj_trace.append(p2_objective(state, eff, cfg))
    return WmmseReport(iterations=iters,
                       swsr_trace=np.asarray(swsr_trace),
                       objective_trace=np.asarray(obj_trace),
                       converged=converged,
                       state=state)
