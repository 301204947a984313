"""Monte-Carlo parameter sweeps over channel draws, emitting CSV records.

Every (grid point, scheme, trial) job draws its own RNG stream from
(seed, job index), so record values are independent of execution order and
worker count; rows are assembled in deterministic grid-major order.
"""

from __future__ import annotations

import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .channelgen import RngSeed, generate_channels
from .configio import ExperimentSpec, Scenario, dbm_to_watt
from .model import ConfigError
from .orchestrator import RunResult, Scheme, run_optimization

CSV_COLUMNS = ("experiment", "sweep_param", "sweep_value", "scheme", "duplex",
               "trial", "trace_step", "swsr", "dl_sum_rate", "ul_sum_rate",
               "outer_iters", "wmmse_iters", "gradient_evals", "matrix_solves",
               "error")

SWEEP_PARAM = {
    "convergence": "variant",
    "swsr_vs_irs_size": "elements_per_irs",
    "swsr_vs_bs_power": "p_max_bs_dbm",
    "swsr_vs_ul_power": "p_max_ul_dbm",
    "rate_region": "alpha_dl",
    "cdf": "placement",
    "irs_location": "x_irs",
}


@dataclass(frozen=True)
class SweepRecord:
    """One CSV row."""

    experiment: str
    sweep_param: str
    sweep_value: float
    scheme: int
    duplex: str
    trial: int
    trace_step: int
    swsr: float
    dl_sum_rate: float
    ul_sum_rate: float
    outer_iters: int
    wmmse_iters: int
    gradient_evals: int
    matrix_solves: int
    error: str = ""


def _apply_grid_point(spec: ExperimentSpec, value: float) -> Scenario:
    """Specialize the base scenario to one sweep coordinate."""
    scn = spec.scenario
    cfg, geo = scn.system, scn.geometry
    kind = spec.kind
    if kind == "swsr_vs_irs_size":
        cfg = replace(cfg, irs_sizes=(int(value),) * cfg.n_irs)
    elif kind == "swsr_vs_bs_power":
        cfg = replace(cfg, p_max_bs=dbm_to_watt(value))
    elif kind == "swsr_vs_ul_power":
        cfg = replace(cfg, p_max_ul=(dbm_to_watt(value),) * cfg.n_ul_users)
    elif kind == "rate_region":
        cfg = replace(cfg, alpha_dl=value, alpha_ul=1.0 - value)
    elif kind == "convergence":
        over = spec.extra.get("variants", [{}])[int(value)]
        counts = {}
        if "n_dl_users" in over:
            counts.update(n_dl_users=int(over["n_dl_users"]), beta_dl=())
        if "n_ul_users" in over:
            n_ul = int(over["n_ul_users"])
            counts.update(n_ul_users=n_ul, beta_ul=(),
                          p_max_ul=(cfg.p_max_ul[0],) * n_ul)
        if "n_tx" in over:
            counts.update(n_tx=int(over["n_tx"]))
        if "irs_sizes" in over:
            counts.update(irs_sizes=tuple(int(m) for m in over["irs_sizes"]))
        cfg = replace(cfg, **counts)
    elif kind == "irs_location":
        idx = int(spec.extra.get("move_irs", 0))
        y = float(spec.extra.get("irs_y", geo.irs_pos[idx][1]))
        pos = list(geo.irs_pos)
        pos[idx] = (float(value), y)
        geo = replace(geo, irs_pos=tuple(pos))
    # cdf: nothing varies with the grid; trials carry the randomness
    return Scenario(system=cfg, geometry=geo, tolerances=scn.tolerances)


def _records_for_run(spec: ExperimentSpec, value: float, scheme: Scheme,
                     duplex: str, trial: int, result: RunResult) -> list[SweepRecord]:
    common = dict(experiment=spec.kind, sweep_param=SWEEP_PARAM[spec.kind],
                  sweep_value=float(value), scheme=int(scheme), duplex=duplex,
                  trial=trial, outer_iters=result.outer_iterations,
                  wmmse_iters=result.counters.wmmse_iters,
                  gradient_evals=result.counters.gradient_evals,
                  matrix_solves=result.counters.matrix_solves)
    if spec.kind == "convergence":
        return [SweepRecord(trace_step=i, swsr=float(row[0]),
                            dl_sum_rate=float(row[1]), ul_sum_rate=float(row[2]),
                            **common)
                for i, row in enumerate(result.outer_trace)]
    return [SweepRecord(trace_step=-1, swsr=result.swsr,
                        dl_sum_rate=result.dl_sum_rate,
                        ul_sum_rate=result.ul_sum_rate, **common)]


# Sweeps whose scheme-1 runs are warm-started from the previous grid point
# (continuation): grid points share identical channels per trial, so carrying
# the solution along the sweep makes paired comparisons track the swept
# parameter instead of local-optimum jitter.  The BS-power sweep is left
# cold-started: its directional effects dwarf the jitter, and continuation
# would pin it to one optimum branch instead of the best found per point.
CONTINUATION_KINDS = ("swsr_vs_ul_power", "rate_region")


def _error_record(spec: ExperimentSpec, value: float, scheme: Scheme,
                  duplex: str, trial: int, exc: Exception) -> SweepRecord:
    return SweepRecord(experiment=spec.kind, sweep_param=SWEEP_PARAM[spec.kind],
                       sweep_value=float(value), scheme=int(scheme),
                       duplex=duplex, trial=trial, trace_step=-1,
                       swsr=0.0, dl_sum_rate=0.0, ul_sum_rate=0.0,
                       outer_iters=0, wmmse_iters=0, gradient_evals=0,
                       matrix_solves=0, error=f"{type(exc).__name__}: {exc}")


def _run_chain(spec: ExperimentSpec, scheme: Scheme, duplex: str,
               trial: int) -> list[list[SweepRecord]]:
    """All grid points of one (scheme, duplex, trial), in grid order."""
    continues = (spec.kind in CONTINUATION_KINDS and duplex == "fd"
                 and scheme in (Scheme.JOINT, Scheme.MRT_PHASE_ONLY))
    carry_phases = None
    carry_state = None
    batches = []
    for value in spec.grid:
        try:
            scn = _apply_grid_point(spec, value)
            # Stream keyed by trial only: trial t sees the same randomness
            # at every grid point and scheme (paired comparisons).
            rng = RngSeed(spec.seed, trial).generator()
            channels = generate_channels(scn.geometry, scn.system, rng)
            result = run_optimization(
                channels, scn.system, scheme, duplex, scn.tolerances,
                phases0=carry_phases if continues else None,
                state0=carry_state if continues else None)
            if continues:
                carry_phases = result.phases
                if scheme == Scheme.JOINT:
                    carry_state = result.state
            batches.append(_records_for_run(spec, value, scheme, duplex,
                                            trial, result))
        except Exception as exc:  # noqa: BLE001 - failures become tagged records
            batches.append([_error_record(spec, value, scheme, duplex, trial, exc)])
            carry_phases = carry_state = None
    return batches


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> list[SweepRecord]:
    """Execute the sweep; rows come out grid-major, then scheme, then trial."""
    plan = [(scheme, duplex, trial)
            for scheme, duplex in spec.schemes
            for trial in range(spec.trials)]
    if jobs <= 1:
        chains = [_run_chain(spec, *args) for args in plan]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_chain, spec, *args) for args in plan]
            chains = [f.result() for f in futures]
    ordered = []
    for gi in range(len(spec.grid)):
        for chain in chains:
            ordered.extend(chain[gi])
    return ordered


def _format_value(v) -> str:
    if isinstance(v, float):
        return f"{v:.9g}"
    return str(v)


def write_records(records: list[SweepRecord], path: str) -> None:
    """Write CSV atomically (temp file + rename); 9 significant digits."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".csv.tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for rec in records:
                fh.write(",".join(_format_value(getattr(rec, col))
                                  for col in CSV_COLUMNS) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_records(path: str) -> list[SweepRecord]:
    """Parse a CSV produced by write_records back into records."""
    import csv

    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ConfigError(f"{path}: unexpected CSV header {reader.fieldnames}")
        out = []
        for row in reader:
            out.append(SweepRecord(
                experiment=row["experiment"], sweep_param=row["sweep_param"],
                sweep_value=float(row["sweep_value"]), scheme=int(row["scheme"]),
                duplex=row["duplex"], trial=int(row["trial"]),
                trace_step=int(row["trace_step"]), swsr=float(row["swsr"]),
                dl_sum_rate=float(row["dl_sum_rate"]),
                ul_sum_rate=float(row["ul_sum_rate"]),
                outer_iters=int(row["outer_iters"]),
                wmmse_iters=int(row["wmmse_iters"]),
                gradient_evals=int(row["gradient_evals"]),
                matrix_solves=int(row["matrix_solves"]),
                error=row["error"]))
        return out
