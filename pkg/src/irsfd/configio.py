"""Config-file parsing, dBm conversion and built-in presets.

Scenario and experiment files are JSON; all powers in files are dBm and are
converted to linear watts here, at the boundary, so the rest of the library
never sees dBm.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path


from .channelgen import DEFAULT_RICIAN_K, Disk, ScenarioGeometry
from .model import ConfigError, HardwareQuality, SystemConfig
from .orchestrator import Scheme, Tolerances

EXPERIMENT_KINDS = ("convergence", "swsr_vs_irs_size", "swsr_vs_bs_power",
                    "swsr_vs_ul_power", "rate_region", "cdf", "irs_location")


def dbm_to_watt(x: float) -> float:
    return 10.0 ** ((x - 30.0) / 10.0)


def watt_to_dbm(x: float) -> float:
    return 10.0 * math.log10(x) + 30.0


@dataclass(frozen=True)
class Scenario:
    """Parsed system + geometry + tolerances."""

    system: SystemConfig
    geometry: ScenarioGeometry
    tolerances: Tolerances = field(default_factory=Tolerances)


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment family: a sweep grid, trial count and scheme list."""

    kind: str
    grid: tuple[float, ...]
    trials: int
    schemes: tuple[tuple[Scheme, str], ...]
    scenario: Scenario
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; "
                              f"expected one of {EXPERIMENT_KINDS}")
        if not self.grid:
            raise ConfigError("experiment grid must be nonempty")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")


def _get(d: dict, key: str, default=None, required: bool = False):
    if required and key not in d:
        raise ConfigError(f"missing required config field {key!r}")
    return d.get(key, default)


def parse_system(d: dict) -> SystemConfig:
    n_ul = int(_get(d, "n_ul_users", required=True))
    p_ul = _get(d, "p_max_ul_dbm", 11.0)
    if not isinstance(p_ul, (list, tuple)):
        p_ul = [p_ul] * n_ul
    hw = _get(d, "hw", {})
    return SystemConfig(
        n_tx=int(_get(d, "n_tx", required=True)),
        n_dl_users=int(_get(d, "n_dl_users", required=True)),
        n_ul_users=n_ul,
        irs_sizes=tuple(int(m) for m in _get(d, "irs_sizes", required=True)),
        p_max_bs=dbm_to_watt(float(_get(d, "p_max_bs_dbm", 35.0))),
        p_max_ul=tuple(dbm_to_watt(float(p)) for p in p_ul),
        noise_dl=dbm_to_watt(float(_get(d, "noise_dl_dbm", -100.0))),
        noise_ul=dbm_to_watt(float(_get(d, "noise_ul_dbm", -110.0))),
        rsi_variance=dbm_to_watt(float(_get(d, "rsi_variance_dbm", -95.0))),
        hw=HardwareQuality(
            xi_ue_dl=float(_get(hw, "xi_ue_dl", 1.0)),
            xi_ue_ul=float(_get(hw, "xi_ue_ul", 1.0)),
            xi_bs_dl=float(_get(hw, "xi_bs_dl", 1.0)),
            xi_bs_ul=float(_get(hw, "xi_bs_ul", 1.0))),
        alpha_dl=float(_get(d, "alpha_dl", 1.0)),
        alpha_ul=float(_get(d, "alpha_ul", 1.0)),
        beta_dl=tuple(_get(d, "beta_dl", ())),
        beta_ul=tuple(_get(d, "beta_ul", ())),
    )


def _parse_disk(d) -> Disk | None:
    if d is None:
        return None
    return Disk(center=tuple(d["center"]), radius=float(d["radius"]))


def parse_geometry(d: dict) -> ScenarioGeometry:
    exps = _get(d, "exponents", {})
    kappa = d.get("rician_k")
    if kappa is None:
        kappa_db = d.get("rician_k_db")
        kappa = DEFAULT_RICIAN_K if kappa_db is None else 10.0 ** (float(kappa_db) / 10.0)
    pos = _get(d, "dl_user_pos")
    ul_pos = _get(d, "ul_user_pos")
    return ScenarioGeometry(
        irs_pos=tuple(tuple(p) for p in _get(d, "irs_pos", required=True)),
        bs_pos=tuple(_get(d, "bs_pos", (0.0, 0.0))),
        dl_user_pos=tuple(tuple(p) for p in pos) if pos else None,
        ul_user_pos=tuple(tuple(p) for p in ul_pos) if ul_pos else None,
        dl_disk=_parse_disk(_get(d, "dl_disk")),
        ul_disk=_parse_disk(_get(d, "ul_disk")),
        alpha_bs_irs=float(_get(exps, "bs_irs", 2.1)),
        alpha_irs_user=float(_get(exps, "irs_user", 2.2)),
        alpha_bs_user=float(_get(exps, "bs_user", 4.0)),
        alpha_user_user=float(_get(exps, "user_user", 3.1)),
        rician_k=float(kappa),
        antenna_spacing_ratio=float(_get(d, "antenna_spacing_ratio", 0.5)),
        blocked_direct=bool(_get(d, "blocked_direct", False)),
    )


def parse_tolerances(d: dict) -> Tolerances:
    return Tolerances(
        eps_wmmse=float(_get(d, "eps_wmmse", 1e-3)),
        eps_grad=float(_get(d, "eps_grad", 1e-4)),
        eps_outer=float(_get(d, "eps_outer", 1e-3)),
        max_wmmse_iter=int(_get(d, "max_wmmse_iter", 200)),
        max_ascent_iter=int(_get(d, "max_ascent_iter", 300)),
        max_outer_iter=int(_get(d, "max_outer_iter", 100)),
    )


def parse_scenario(d: dict) -> Scenario:
    return Scenario(system=parse_system(_get(d, "system", required=True)),
                    geometry=parse_geometry(_get(d, "geometry", required=True)),
                    tolerances=parse_tolerances(_get(d, "tolerances", {})))


def parse_schemes(entries) -> tuple[tuple[Scheme, str], ...]:
    out = []
    for e in entries:
        scheme = Scheme(int(e["scheme"]))
        duplex = str(e.get("duplex", "fd")).lower()
        if duplex not in ("fd", "hd"):
            raise ConfigError(f"duplex must be 'fd' or 'hd', got {duplex!r}")
        out.append((scheme, duplex))
    if not out:
        raise ConfigError("schemes list must be nonempty")
    return tuple(out)


def parse_experiment(d: dict) -> ExperimentSpec:
    return ExperimentSpec(
        kind=str(_get(d, "kind", required=True)),
        grid=tuple(float(x) for x in _get(d, "grid", required=True)),
        trials=int(_get(d, "trials", 1)),
        schemes=parse_schemes(_get(d, "schemes", [{"scheme": 1, "duplex": "fd"}])),
        scenario=parse_scenario(d),
        seed=int(_get(d, "seed", 0)),
        extra=dict(_get(d, "extra", {})),
    )


# ---------------------------------------------------------------------------
# Built-in presets
# ---------------------------------------------------------------------------

def table1_scenario_dict() -> dict:
    """Baseline simulation setup as a config dictionary."""
    return {
        "system": {
            "n_tx": 4, "n_dl_users": 2, "n_ul_users": 3,
            "irs_sizes": [10, 10],
            "p_max_bs_dbm": 35.0, "p_max_ul_dbm": 11.0,
            "noise_dl_dbm": -100.0, "noise_ul_dbm": -110.0,
            "rsi_variance_dbm": -95.0,
            "hw": {"xi_ue_dl": 1.0, "xi_ue_ul": 1.0, "xi_bs_dl": 1.0, "xi_bs_ul": 1.0},
            "alpha_dl": 1.0, "alpha_ul": 1.0,
        },
        "geometry": {
            "bs_pos": [0.0, 0.0],
            "irs_pos": [[100.0, 0.0], [-100.0, 0.0]],
            "dl_disk": {"center": [100.0, 5.0], "radius": 10.0},
            "ul_disk": {"center": [-100.0, 5.0], "radius": 10.0},
            "rician_k_db": 6.0,
        },
        "tolerances": {"eps_wmmse": 1e-3, "eps_grad": 1e-4, "eps_outer": 1e-3},
    }


PRESETS = {"table1": table1_scenario_dict}


def load_scenario(path_or_preset: str) -> Scenario:
    """Load a scenario file, or a named built-in preset."""
    p = Path(path_or_preset)
    if p.exists():
        with open(p) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path_or_preset}: invalid JSON ({exc})") from exc
        return parse_scenario(data)
    if path_or_preset in PRESETS:
        return parse_scenario(PRESETS[path_or_preset]())
    raise ConfigError(f"config file not found: {path_or_preset}")


def load_experiment(path: str) -> ExperimentSpec:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"experiment spec not found: {path}")
    with open(p) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_experiment(data)
