"""Random channel generation from scenario geometry.

Large-scale path loss follows PL = -35.6 - 10*alpha*log10(d) dB.  Links that
involve a reflecting surface use Rician fading with steering-vector LOS
components; direct BS-user and user-user links are Rayleigh.  All draws go
through an explicit numpy Generator so channel sets are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ChannelSet, ConfigError, SystemConfig

# Default Rician factor: 6 dB for the reflecting links.
DEFAULT_RICIAN_K = 10.0 ** 0.6


@dataclass(frozen=True)
class RngSeed:
    """(seed, stream) pair; identical pairs reproduce identical channels."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class Disk:
    """Uniform-by-area user placement region."""

    center: tuple[float, float]
    radius: float


@dataclass(frozen=True)
class ScenarioGeometry:
    """Node positions (meters) and propagation parameters.

    Users are either pinned (`*_user_pos`) or drawn uniformly from `*_disk`
    on every channel realization; exactly one of the two must be set per
    link direction.
    """

    irs_pos: tuple[tuple[float, float], ...]
    bs_pos: tuple[float, float] = (0.0, 0.0)
    dl_user_pos: tuple[tuple[float, float], ...] | None = None
    ul_user_pos: tuple[tuple[float, float], ...] | None = None
    dl_disk: Disk | None = None
    ul_disk: Disk | None = None
    alpha_bs_irs: float = 2.1
    alpha_irs_user: float = 2.2
    alpha_bs_user: float = 4.0
    alpha_user_user: float = 3.1
    rician_k: float = DEFAULT_RICIAN_K
    antenna_spacing_ratio: float = 0.5
    blocked_direct: bool = False

    def __post_init__(self):
        for name in ("alpha_bs_irs", "alpha_irs_user", "alpha_bs_user", "alpha_user_user"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.rician_k < 0:
            raise ConfigError("rician_k must be nonnegative")
        if self.dl_user_pos is None and self.dl_disk is None:
            raise ConfigError("need dl_user_pos or dl_disk")
        if self.ul_user_pos is None and self.ul_disk is None:
            raise ConfigError("need ul_user_pos or ul_disk")


def path_loss_gain(d: float, alpha: float) -> float:
    """Linear power gain of a link of length d meters with exponent alpha."""
    if d <= 0:
        raise ConfigError(f"link distance must be positive, got {d}")
    pl_db = -35.6 - 10.0 * alpha * math.log10(d)
    return 10.0 ** (pl_db / 10.0)


def steering_vector(n: int, theta: float, spacing_ratio: float = 0.5) -> np.ndarray:
    """Uniform linear array response: entry m = exp(j*2pi*ratio*m*sin(theta))."""
    m = np.arange(n)
    return np.exp(1j * 2.0 * np.pi * spacing_ratio * m * math.sin(theta))


def _cn_matrix(shape, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. complex Gaussian entries, zero mean, unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def rician_matrix(rows: int, cols: int, theta_aoa: float, theta_aod: float,
                  kappa: float, rng: np.random.Generator,
                  spacing_ratio: float = 0.5) -> np.ndarray:
    """Rician-faded matrix with a rank-1 steering LOS component."""
    los = np.outer(steering_vector(rows, theta_aoa, spacing_ratio),
                   np.conj(steering_vector(cols, theta_aod, spacing_ratio)))
    nlos = _cn_matrix((rows, cols), rng)
    return (math.sqrt(kappa / (1.0 + kappa)) * los
            + math.sqrt(1.0 / (1.0 + kappa)) * nlos)


def rician_vector(length: int, theta_aoa: float, kappa: float,
                  rng: np.random.Generator, spacing_ratio: float = 0.5) -> np.ndarray:
    """Rician-faded vector with a steering-vector LOS component."""
    los = steering_vector(length, theta_aoa, spacing_ratio)
    nlos = _cn_matrix((length,), rng)
    return (math.sqrt(kappa / (1.0 + kappa)) * los
            + math.sqrt(1.0 / (1.0 + kappa)) * nlos)


def _dist(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def _draw_positions(fixed, disk: Disk | None, count: int,
                    rng: np.random.Generator) -> list[tuple[float, float]]:
    if fixed is not None:
        if len(fixed) != count:
            raise ConfigError(f"{count} users configured but {len(fixed)} positions given")
        return [tuple(p) for p in fixed]
    # Uniform by area: radius via square-root transform.
    radii = disk.radius * np.sqrt(rng.uniform(size=count))
    angles = rng.uniform(0.0, 2.0 * np.pi, size=count)
    return [(disk.center[0] + float(r * np.cos(a)), disk.center[1] + float(r * np.sin(a)))
            for r, a in zip(radii, angles)]


def generate_channels(geometry: ScenarioGeometry, cfg: SystemConfig,
                      rng: np.random.Generator) -> ChannelSet:
    """Draw one full channel realization for the configured topology.

    Surface-involved links are sqrt(pathloss) * Rician with fresh uniform
    angles of arrival/departure; direct links are sqrt(pathloss) * Rayleigh.
    With `geometry.blocked_direct`, the BS-user direct channels are zeroed
    (surface and user-user links unchanged).
    """
    if len(geometry.irs_pos) != cfg.n_irs:
        raise ConfigError(
            f"geometry has {len(geometry.irs_pos)} surfaces, config expects {cfg.n_irs}")
    k_users, l_users, n_t = cfg.n_dl_users, cfg.n_ul_users, cfg.n_tx
    kappa = geometry.rician_k
    ratio = geometry.antenna_spacing_ratio

    dl_pos = _draw_positions(geometry.dl_user_pos, geometry.dl_disk, k_users, rng)
    ul_pos = _draw_positions(geometry.ul_user_pos, geometry.ul_disk, l_users, rng)

    def angle() -> float:
        return float(rng.uniform(0.0, 2.0 * np.pi))

    h_bs_irs = []
    for r, irs in enumerate(geometry.irs_pos):
        amp = math.sqrt(path_loss_gain(_dist(geometry.bs_pos, irs), geometry.alpha_bs_irs))
        h_bs_irs.append(amp * rician_matrix(cfg.irs_sizes[r], n_t, angle(), angle(),
                                            kappa, rng, ratio))

    h_irs_dl = tuple(
        tuple(math.sqrt(path_loss_gain(_dist(irs, pos), geometry.alpha_irs_user))
              * rician_vector(cfg.irs_sizes[r], angle(), kappa, rng, ratio)
              for r, irs in enumerate(geometry.irs_pos))
        for pos in dl_pos)
    g_irs_ul = tuple(
        tuple(math.sqrt(path_loss_gain(_dist(irs, pos), geometry.alpha_irs_user))
              * rician_vector(cfg.irs_sizes[r], angle(), kappa, rng, ratio)
              for r, irs in enumerate(geometry.irs_pos))
        for pos in ul_pos)

    h_direct = np.zeros((k_users, n_t), dtype=complex)
    g_direct = np.zeros((l_users, n_t), dtype=complex)
    f_uu = np.zeros((l_users, k_users), dtype=complex)
    for k, pos in enumerate(dl_pos):
        amp = math.sqrt(path_loss_gain(_dist(geometry.bs_pos, pos), geometry.alpha_bs_user))
        h_direct[k] = amp * _cn_matrix((n_t,), rng)
    for l, pos in enumerate(ul_pos):
        amp = math.sqrt(path_loss_gain(_dist(geometry.bs_pos, pos), geometry.alpha_bs_user))
        g_direct[l] = amp * _cn_matrix((n_t,), rng)
    for l, upos in enumerate(ul_pos):
        for k, dpos in enumerate(dl_pos):
            amp = math.sqrt(path_loss_gain(_dist(upos, dpos), geometry.alpha_user_user))
            f_uu[l, k] = amp * _cn_matrix((), rng)
    if geometry.blocked_direct:
        h_direct[:] = 0.0
        g_direct[:] = 0.0

    return ChannelSet(h_direct=h_direct, g_direct=g_direct, f_uu=f_uu,
                      h_bs_irs=tuple(h_bs_irs), h_irs_dl=h_irs_dl, g_irs_ul=g_irs_ul)
