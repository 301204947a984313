"""Sum-rate optimization for multi-surface-assisted full-duplex systems."""

__version__ = "0.1.0"

from .channelgen import (RngSeed, ScenarioGeometry, generate_channels,
                         path_loss_gain, rician_matrix, rician_vector,
                         steering_vector)
from .model import (ChannelSet, ConfigError, EffectiveChannels,
                    HardwareQuality, PhaseVector, SolverError, SolverState,
                    SystemConfig, compose_effective_channels,
                    dl_distortion_variance, dl_sinr, rsi_power, swsr,
                    ul_distortion_variance, ul_sinr)
from .orchestrator import (RunResult, Scheme, Tolerances, run_half_duplex,
                           run_joint, run_optimization)

__all__ = [
    "ChannelSet", "ConfigError", "EffectiveChannels", "HardwareQuality",
    "PhaseVector", "RngSeed", "RunResult", "ScenarioGeometry", "Scheme",
    "SolverError", "SolverState", "SystemConfig", "Tolerances",
    "compose_effective_channels", "dl_distortion_variance", "dl_sinr",
    "generate_channels", "path_loss_gain", "rician_matrix", "rician_vector",
    "rsi_power", "run_half_duplex", "run_joint", "run_optimization",
    "steering_vector", "swsr", "ul_distortion_variance", "ul_sinr",
]
