"""Reading and validating sweep CSVs.

The input schema is the sweep-harness contract: one row per (sweep point,
scheme, duplex, trial), plus per-iteration trace rows for convergence runs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

EXPECTED_COLUMNS = ("experiment", "sweep_param", "sweep_value", "scheme",
                    "duplex", "trial", "trace_step", "swsr", "dl_sum_rate",
                    "ul_sum_rate", "outer_iters", "wmmse_iters",
                    "gradient_evals", "matrix_solves", "error")

KNOWN_KINDS = ("convergence", "swsr_vs_irs_size", "swsr_vs_bs_power",
               "swsr_vs_ul_power", "rate_region", "cdf", "irs_location")


class SchemaError(ValueError):
    """CSV does not match the documented sweep schema."""


@dataclass(frozen=True)
class Row:
    experiment: str
    sweep_value: float
    scheme: int
    duplex: str
    trial: int
    trace_step: int
    swsr: float
    dl_sum_rate: float
    ul_sum_rate: float


def read_rows(path: str) -> list[Row]:
    """Parse a sweep CSV; errored records are dropped."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        names = tuple(reader.fieldnames or ())
        missing = [c for c in EXPECTED_COLUMNS if c not in names]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        rows = []
        for raw in reader:
            if raw["error"]:
                continue
            rows.append(Row(
                experiment=raw["experiment"],
                sweep_value=float(raw["sweep_value"]),
                scheme=int(raw["scheme"]),
                duplex=raw["duplex"],
                trial=int(raw["trial"]),
                trace_step=int(raw["trace_step"]),
                swsr=float(raw["swsr"]),
                dl_sum_rate=float(raw["dl_sum_rate"]),
                ul_sum_rate=float(raw["ul_sum_rate"])))
        return rows


def kind_of(rows: list[Row], path: str = "<csv>") -> str:
    kinds = sorted({r.experiment for r in rows})
    if len(kinds) > 1:
        raise SchemaError(f"{path}: mixed experiment kinds {kinds}")
    if kinds and kinds[0] not in KNOWN_KINDS:
        raise SchemaError(f"{path}: unknown experiment kind {kinds[0]!r}")
    return kinds[0] if kinds else ""
