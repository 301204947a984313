"""Domain types and closed-form physical-layer math.

Implements the signal model of a full-duplex multi-user system assisted by
multiple reflecting surfaces: effective (surface-composed) channels, hardware
distortion variances, residual self-interference, per-user SINRs and the
system weighted sum-rate (SWSR, in bits per channel use).

All powers are linear watts throughout; dBm only appears at config parsing.
Every type is an immutable value object and every operation is a pure
function, so evaluation is thread-safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

LOG2 = math.log(2.0)

# Denominators below this are treated as a corrupted configuration rather
# than returning inf.
DENOM_FLOOR = 1e-300


class ConfigError(ValueError):
    """Invalid or inconsistent configuration/dimension data."""


class SolverError(RuntimeError):
    """Numerical failure that indicates a degenerate problem instance."""


def _as_complex_matrix(x, rows: int, cols: int, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=complex)
    if a.shape != (rows, cols):
        raise ConfigError(f"{name}: expected shape {(rows, cols)}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ConfigError(f"{name}: non-finite entries")
    return a


@dataclass(frozen=True)
class HardwareQuality:
    """Transceiver quality factors, each in [0, 1] (1 = ideal hardware).

    A factor xi means a fraction xi of the signal power passes undistorted;
    the complement 1 - xi becomes additive Gaussian distortion.
    """

    xi_ue_dl: float = 1.0
    xi_ue_ul: float = 1.0
    xi_bs_dl: float = 1.0
    xi_bs_ul: float = 1.0

    def __post_init__(self):
        for name in ("xi_ue_dl", "xi_ue_ul", "xi_bs_dl", "xi_bs_ul"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigError(f"hardware quality factor {name}={v} outside [0, 1]")

    @property
    def bar_ue_dl(self) -> float:
        return 1.0 - self.xi_ue_dl

    @property
    def bar_ue_ul(self) -> float:
        return 1.0 - self.xi_ue_ul

    @property
    def bar_bs_dl(self) -> float:
        return 1.0 - self.xi_bs_dl

    @property
    def bar_bs_ul(self) -> float:
        return 1.0 - self.xi_bs_ul

    def rsi_bracket(self, n_tx: int) -> float:
        """Hardware-dependent factor multiplying the self-interference power."""
        return (self.xi_bs_ul + self.xi_bs_dl - self.xi_bs_ul * self.xi_bs_dl
                + self.bar_bs_ul * self.bar_bs_dl * n_tx)


@dataclass(frozen=True)
class SystemConfig:
    """All scalar system parameters (linear watts for powers/noises)."""

    n_tx: int
    n_dl_users: int
    n_ul_users: int
    irs_sizes: tuple[int, ...]
    p_max_bs: float
    p_max_ul: tuple[float, ...]
    noise_dl: float
    noise_ul: float
    rsi_variance: float
    hw: HardwareQuality = field(default_factory=HardwareQuality)
    alpha_dl: float = 1.0
    alpha_ul: float = 1.0
    beta_dl: tuple[float, ...] = ()
    beta_ul: tuple[float, ...] = ()

    def __post_init__(self):
        if self.n_tx < 1:
            raise ConfigError("n_tx must be positive")
        if self.n_dl_users < 0 or self.n_ul_users < 0:
            raise ConfigError("user counts must be nonnegative")
        if len(self.irs_sizes) < 1 or any(m < 1 for m in self.irs_sizes):
            raise ConfigError("irs_sizes must be a nonempty list of positive ints")
        object.__setattr__(self, "irs_sizes", tuple(int(m) for m in self.irs_sizes))
        if not self.beta_dl:
            object.__setattr__(self, "beta_dl", (1.0,) * self.n_dl_users)
        if not self.beta_ul:
            object.__setattr__(self, "beta_ul", (1.0,) * self.n_ul_users)
        object.__setattr__(self, "p_max_ul", tuple(float(p) for p in self.p_max_ul))
        if len(self.p_max_ul) != self.n_ul_users:
            raise ConfigError("p_max_ul length must equal n_ul_users")
        if len(self.beta_dl) != self.n_dl_users or len(self.beta_ul) != self.n_ul_users:
            raise ConfigError("beta weight lengths must match user counts")
        for name in ("p_max_bs", "noise_dl", "noise_ul", "rsi_variance",
                     "alpha_dl", "alpha_ul"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ConfigError(f"{name}={v} must be finite and nonnegative")
        if self.noise_dl <= 0 or self.noise_ul <= 0:
            raise ConfigError("noise powers must be strictly positive")
        if any(w < 0 for w in self.beta_dl) or any(w < 0 for w in self.beta_ul):
            raise ConfigError("beta weights must be nonnegative")
        object.__setattr__(self, "_m_total", int(sum(self.irs_sizes)))

    @property
    def n_irs(self) -> int:
        return len(self.irs_sizes)

    @property
    def m_total(self) -> int:
        """Total number of reflecting elements across all surfaces."""
        return self._m_total

    @property
    def beta_dl_arr(self) -> np.ndarray:
        return np.asarray(self.beta_dl, dtype=float)

    @property
    def beta_ul_arr(self) -> np.ndarray:
        return np.asarray(self.beta_ul, dtype=float)


@dataclass(frozen=True)
class ChannelSet:
    """One realization of all raw channels.

    Per-surface blocks are the constructor inputs; stacked views over the
    surface index (``h_hat``, ``g_hat``, ``h_stack``) are derived once and
    drive all composed-channel math.  `f_uu[l, k]` is the scalar channel from
    uplink user l to downlink user k.
    """

    h_direct: np.ndarray          # (K, N_t) BS -> DL user k
    g_direct: np.ndarray          # (L, N_t) UL user l -> BS
    f_uu: np.ndarray              # (L, K)
    h_bs_irs: tuple[np.ndarray, ...]     # R blocks, each (M_r, N_t)
    h_irs_dl: tuple[tuple[np.ndarray, ...], ...]  # [k][r] -> (M_r,)
    g_irs_ul: tuple[tuple[np.ndarray, ...], ...]  # [l][r] -> (M_r,)

    def __post_init__(self):
        k = self.h_direct.shape[0]
        l = self.g_direct.shape[0]
        n_t = self.h_direct.shape[1] if k else self.g_direct.shape[1]
        sizes = tuple(int(b.shape[0]) for b in self.h_bs_irs)
        for r, b in enumerate(self.h_bs_irs):
            _as_complex_matrix(b, sizes[r], n_t, f"h_bs_irs[{r}]")
        for arrs, n_users, name in ((self.h_irs_dl, k, "h_irs_dl"),
                                    (self.g_irs_ul, l, "g_irs_ul")):
            if len(arrs) != n_users:
                raise ConfigError(f"{name}: expected {n_users} user entries, got {len(arrs)}")
            for u, blocks in enumerate(arrs):
                if len(blocks) != len(sizes):
                    raise ConfigError(f"{name}[{u}]: expected {len(sizes)} surface blocks")
                for r, b in enumerate(blocks):
                    if b.shape != (sizes[r],):
                        raise ConfigError(
                            f"{name}[{u}][{r}]: expected shape {(sizes[r],)}, got {b.shape}")
        if self.f_uu.shape != (l, k):
            raise ConfigError(f"f_uu: expected shape {(l, k)}, got {self.f_uu.shape}")
        for name in ("h_direct", "g_direct", "f_uu"):
            if not np.all(np.isfinite(np.asarray(getattr(self, name)))):
                raise ConfigError(f"{name}: non-finite entries")
        m = int(sum(sizes))
        object.__setattr__(self, "_sizes", sizes)
        object.__setattr__(self, "h_stack",
                           np.vstack(self.h_bs_irs) if m else np.zeros((0, n_t), complex))
        h_hat = (np.stack([np.concatenate(blocks) for blocks in self.h_irs_dl])
                 if k else np.zeros((0, m), complex))
        g_hat = (np.stack([np.concatenate(blocks) for blocks in self.g_irs_ul])
                 if l else np.zeros((0, m), complex))
        object.__setattr__(self, "h_hat", h_hat)  # (K, M)
        object.__setattr__(self, "g_hat", g_hat)  # (L, M)

    @property
    def n_tx(self) -> int:
        return self.h_stack.shape[1]

    @property
    def m_total(self) -> int:
        return self.h_stack.shape[0]

    def irs_block(self, stacked: np.ndarray, r: int) -> np.ndarray:
        """Extract the rows of a stacked view belonging to surface r."""
        start = int(sum(self._sizes[:r]))
        return stacked[start:start + self._sizes[r]]

    def without_irs(self) -> "ChannelSet":
        """Copy with all surface links zeroed (direct channels only)."""
        return replace(
            self,
            h_bs_irs=tuple(np.zeros_like(b) for b in self.h_bs_irs),
            h_irs_dl=tuple(tuple(np.zeros_like(b) for b in blocks)
                           for blocks in self.h_irs_dl),
            g_irs_ul=tuple(tuple(np.zeros_like(b) for b in blocks)
                           for blocks in self.g_irs_ul),
        )


@dataclass(frozen=True)
class PhaseVector:
    """Per-element phase angles of all surfaces and the reflection vector.

    Angles are stored canonically in [0, 2pi); `v` is the unit-modulus
    complex reflection vector exp(j*phi).
    """

    phi: np.ndarray

    def __post_init__(self):
        phi = np.mod(np.asarray(self.phi, dtype=float), 2.0 * np.pi)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "v", np.exp(1j * phi))

    @staticmethod
    def zeros(m: int) -> "PhaseVector":
        return PhaseVector(np.zeros(m))

    def shifted(self, delta: np.ndarray) -> "PhaseVector":
        """New vector with angles phi + delta, wrapped to [0, 2pi)."""
        return PhaseVector(self.phi + delta)


@dataclass(frozen=True)
class EffectiveChannels:
    """Surface-composed channels used by every SINR/MSE formula."""

    h_bar: np.ndarray   # (K, N_t)
    g_bar: np.ndarray   # (L, N_t)
    f_bar: np.ndarray   # (L, K)

    @property
    def h_bar_norm2(self) -> np.ndarray:
        return np.sum(np.abs(self.h_bar) ** 2, axis=1)

    @property
    def g_bar_norm2(self) -> np.ndarray:
        return np.sum(np.abs(self.g_bar) ** 2, axis=1)


@dataclass(frozen=True)
class SolverState:
    """Current transceiver variables of the alternating solver.

    `p` holds uplink amplitude variables; the transmitted power of user l is
    p[l]**2.  `mu_*` are the weighted-MSE weights.
    """

    w: np.ndarray       # (K, N_t) beamformers
    u: np.ndarray       # (L, N_t) combiners
    u1: np.ndarray      # (K,) scalar decoding coefficients
    p: np.ndarray       # (L,) nonnegative amplitudes
    mu_dl: np.ndarray   # (K,)
    mu_ul: np.ndarray   # (L,)

    @property
    def rho(self) -> np.ndarray:
        return self.p ** 2

    def bs_power(self) -> float:
        return float(np.sum(np.abs(self.w) ** 2))

    def validate(self, cfg: SystemConfig) -> None:
        if self.bs_power() > cfg.p_max_bs * (1.0 + 1e-9) + 1e-30:
            raise ConfigError(
                f"BS power {self.bs_power():.6g} exceeds budget {cfg.p_max_bs:.6g}")
        pmax = np.sqrt(np.asarray(cfg.p_max_ul))
        if np.any(self.p < -1e-15) or np.any(self.p > pmax * (1.0 + 1e-9) + 1e-30):
            raise ConfigError("uplink amplitude outside [0, sqrt(P_max)]")
        if np.any(self.mu_dl <= 0) or np.any(self.mu_ul <= 0):
            raise ConfigError("MSE weights must be strictly positive")


# ---------------------------------------------------------------------------
# Effective channel composition
# ---------------------------------------------------------------------------

def compose_effective_channels(channels: ChannelSet, phases: PhaseVector) -> EffectiveChannels:
    """Combine direct channels with surface paths through the phase vector.

    h_bar_k^H = h_k^H + sum_r (surface-k channel)^H Theta_r (BS-surface block),
    evaluated via the stacked diagonal phase matrix; analogously for g_bar
    and the scalar cross channels f_bar.
    """
    v = phases.v
    if v.shape[0] != channels.m_total:
        raise ConfigError(
            f"phase vector length {v.shape[0]} != total surface elements {channels.m_total}")
    # h_bar = h + H_stack^H (h_hat ⊙ conj(v)); conjugation follows from
    # writing the row-form composition and transposing.
    h_bar = channels.h_direct + (channels.h_hat * np.conj(v)) @ np.conj(channels.h_stack)
    g_bar = channels.g_direct + (channels.g_hat * v) @ np.conj(channels.h_stack)
    f_bar = channels.f_uu + channels.g_hat @ (np.conj(channels.h_hat) * v).T
    return EffectiveChannels(h_bar=h_bar, g_bar=g_bar, f_bar=f_bar)


# ---------------------------------------------------------------------------
# Distortion variances and residual self-interference
# ---------------------------------------------------------------------------

def _w_gains(k: int, state: SolverState, eff: EffectiveChannels) -> np.ndarray:
    """|h_bar_k^H w_i|^2 for all beams i."""
    return np.abs(np.conj(eff.h_bar[k]) @ state.w.T) ** 2


def dl_distortion_variance(k: int, state: SolverState, eff: EffectiveChannels,
                           cfg: SystemConfig) -> float:
    """Receive-hardware distortion variance at downlink user k."""
    hw = cfg.hw
    gains = _w_gains(k, state, eff)
    total_w = state.bs_power()
    cross = float(np.sum(np.abs(eff.f_bar[:, k]) ** 2 * state.rho))
    return hw.bar_ue_dl * (hw.xi_bs_dl * float(np.sum(gains))
                           + hw.bar_bs_dl * float(eff.h_bar_norm2[k]) * total_w
                           + cross)


def ul_distortion_variance(state: SolverState, eff: EffectiveChannels,
                           cfg: SystemConfig) -> float:
    """Per-element distortion variance at the BS receive chain."""
    hw = cfg.hw
    ul_power = float(np.sum(eff.g_bar_norm2 * state.rho))
    si_power = cfg.rsi_variance * state.bs_power() * (hw.xi_bs_dl + hw.bar_bs_dl * cfg.n_tx)
    return hw.bar_bs_ul * (ul_power + si_power)


def rsi_power(u_l: np.ndarray, state: SolverState, cfg: SystemConfig) -> float:
    """Average residual self-interference power after combining with u_l."""
    u_norm2 = float(np.sum(np.abs(u_l) ** 2))
    return (cfg.rsi_variance * u_norm2 * state.bs_power()
            * cfg.hw.rsi_bracket(cfg.n_tx))


# ---------------------------------------------------------------------------
# SINRs and rates
# ---------------------------------------------------------------------------

def dl_sinr(k: int, state: SolverState, eff: EffectiveChannels,
            cfg: SystemConfig) -> float:
    """SINR of downlink user k under hardware impairments."""
    hw = cfg.hw
    gains = _w_gains(k, state, eff)
    own = float(gains[k])
    interference = float(np.sum(gains)) - own
    cross = float(np.sum(np.abs(eff.f_bar[:, k]) ** 2 * state.rho))
    num = hw.xi_ue_dl * hw.xi_bs_dl * own
    den = (hw.xi_bs_dl * interference
           + hw.bar_ue_dl * hw.xi_bs_dl * own
           + hw.bar_bs_dl * float(eff.h_bar_norm2[k]) * state.bs_power()
           + cross + cfg.noise_dl)
    if num == 0.0:
        return 0.0
    if den < DENOM_FLOOR:
        raise SolverError(f"dl_sinr[{k}]: nonpositive denominator {den!r}")
    return num / den


def ul_sinr(l: int, state: SolverState, eff: EffectiveChannels,
            cfg: SystemConfig) -> float:
    """SINR of uplink user l after combining, including self-interference."""
    hw = cfg.hw
    u_l = state.u[l]
    gains = np.abs(np.conj(u_l) @ eff.g_bar.T) ** 2 * state.rho
    own = float(gains[l])
    interference = float(np.sum(gains)) - own
    u_norm2 = float(np.sum(np.abs(u_l) ** 2))
    num = hw.xi_ue_ul * hw.xi_bs_ul * own
    if num == 0.0:
        return 0.0
    den = (hw.xi_bs_ul * interference
           + hw.bar_ue_ul * hw.xi_bs_ul * own
           + u_norm2 * hw.bar_bs_ul * float(np.sum(eff.g_bar_norm2 * state.rho))
           + rsi_power(u_l, state, cfg)
           + cfg.noise_ul * u_norm2)
    if den < DENOM_FLOOR:
        raise SolverError(f"ul_sinr[{l}]: nonpositive denominator {den!r}")
    return num / den


def dl_rates(state: SolverState, eff: EffectiveChannels, cfg: SystemConfig) -> np.ndarray:
    return np.array([math.log2(1.0 + dl_sinr(k, state, eff, cfg))
                     for k in range(cfg.n_dl_users)])


def ul_rates(state: SolverState, eff: EffectiveChannels, cfg: SystemConfig) -> np.ndarray:
    return np.array([math.log2(1.0 + ul_sinr(l, state, eff, cfg))
                     for l in range(cfg.n_ul_users)])


def swsr(state: SolverState, eff: EffectiveChannels, cfg: SystemConfig) -> float:
    """Weighted sum of downlink and uplink user rates, in bpcu."""
    total = 0.0
    if cfg.n_dl_users:
        total += cfg.alpha_dl * float(cfg.beta_dl_arr @ dl_rates(state, eff, cfg))
    if cfg.n_ul_users:
        total += cfg.alpha_ul * float(cfg.beta_ul_arr @ ul_rates(state, eff, cfg))
    return total
