"""Pure series computations behind the figures.

Everything here is deterministic array math on parsed rows, kept separate
from rendering so the plotted quantities can be asserted directly.
"""

from __future__ import annotations

import numpy as np

from .records import Row


def series_keys(rows: list[Row]) -> list[tuple[int, str]]:
    """Sorted (scheme, duplex) groups present in the rows."""
    return sorted({(r.scheme, r.duplex) for r in rows})


def _select(rows, scheme, duplex):
    return [r for r in rows if r.scheme == scheme and r.duplex == duplex]


def mean_curve(rows: list[Row], scheme: int, duplex: str,
               field: str = "swsr") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(x, mean, std) of a record field vs the sweep coordinate."""
    sel = _select(rows, scheme, duplex)
    xs = sorted({r.sweep_value for r in sel})
    means, stds = [], []
    for x in xs:
        vals = [getattr(r, field) for r in sel if r.sweep_value == x]
        means.append(float(np.mean(vals)))
        stds.append(float(np.std(vals)))
    return np.asarray(xs), np.asarray(means), np.asarray(stds)


def convergence_curve(rows: list[Row], scheme: int, duplex: str,
                      variant: float) -> tuple[np.ndarray, np.ndarray]:
    """(iteration, mean SWSR) trace for one configuration variant.

    Trials may stop at different outer iterations; shorter traces hold their
    final value, matching how a converged run would continue.
    """
    sel = [r for r in _select(rows, scheme, duplex) if r.sweep_value == variant]
    trials = sorted({r.trial for r in sel})
    traces = []
    for t in trials:
        tr = sorted((r.trace_step, r.swsr) for r in sel if r.trial == t)
        traces.append([v for _, v in tr])
    depth = max(len(t) for t in traces)
    padded = np.array([t + [t[-1]] * (depth - len(t)) for t in traces])
    return np.arange(depth), padded.mean(axis=0)


def empirical_cdf(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Right-continuous empirical CDF; ends exactly at 1."""
    x = np.sort(np.asarray(values, dtype=float))
    y = np.arange(1, x.size + 1) / x.size
    return x, y


def cdf_curves(rows: list[Row]) -> dict[tuple[int, str], tuple[np.ndarray, np.ndarray]]:
    return {key: empirical_cdf(np.array([r.swsr for r in _select(rows, *key)]))
            for key in series_keys(rows)}


def region_curve(rows: list[Row], scheme: int,
                 duplex: str) -> tuple[np.ndarray, np.ndarray]:
    """(mean DL sum-rate, mean UL sum-rate) parameterized by the weight sweep."""
    sel = _select(rows, scheme, duplex)
    alphas = sorted({r.sweep_value for r in sel})
    dl, ul = [], []
    for a in alphas:
        pts = [r for r in sel if r.sweep_value == a]
        dl.append(float(np.mean([r.dl_sum_rate for r in pts])))
        ul.append(float(np.mean([r.ul_sum_rate for r in pts])))
    return np.asarray(dl), np.asarray(ul)
