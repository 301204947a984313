"""Figure rendering: one deterministic image per experiment kind.

Rendering is a pure function of the CSV bytes and the FigureSpec: fixed
style, sorted series, no timestamps in image metadata.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from . import series
from .records import Row, SchemaError, kind_of, read_rows  # noqa: E402

SCHEME_LABEL = {1: "Scheme 1", 2: "Scheme 2", 3: "Scheme 3", 4: "Scheme 4"}
STYLE = {1: "-o", 2: "-s", 3: "-^", 4: "-d"}
X_LABEL = {
    "swsr_vs_irs_size": "Elements per surface",
    "swsr_vs_bs_power": "Max BS transmit power [dBm]",
    "swsr_vs_ul_power": "Max UL transmit power [dBm]",
    "irs_location": "Surface x-position [m]",
}


@dataclass(frozen=True)
class FigureSpec:
    """Inputs of one figure: CSVs with series-label suffixes and the output."""

    inputs: tuple[tuple[str, str], ...]   # (csv path, label suffix)
    kind: str
    output: str
    error_bars: bool = False
    title: str = ""


def _new_axes():
    fig, ax = plt.subplots(figsize=(6.0, 4.2), dpi=120)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _label(key, suffix):
    scheme, duplex = key
    base = SCHEME_LABEL.get(scheme, f"Scheme {scheme}")
    tag = " HD" if duplex == "hd" else ""
    return base + tag + suffix


def _load(spec: FigureSpec) -> list[tuple[str, list[Row]]]:
    loaded = []
    for path, suffix in spec.inputs:
        rows = read_rows(path)
        if rows and kind_of(rows, path) != spec.kind:
            raise SchemaError(
                f"{path}: experiment kind {kind_of(rows, path)!r} does not "
                f"match figure kind {spec.kind!r}")
        loaded.append((suffix, rows))
    return loaded


def _plot_sweep(ax, loaded, spec):
    for suffix, rows in loaded:
        for key in series.series_keys(rows):
            x, mean, std = series.mean_curve(rows, *key)
            style = STYLE.get(key[0], "-x")
            if spec.error_bars:
                ax.errorbar(x, mean, yerr=std, fmt=style,
                            label=_label(key, suffix), capsize=3)
            else:
                ax.plot(x, mean, style, label=_label(key, suffix))
    ax.set_xlabel(X_LABEL.get(spec.kind, "Sweep value"))
    ax.set_ylabel("SWSR [bpcu]")


def _plot_convergence(ax, loaded, spec):
    for suffix, rows in loaded:
        variants = sorted({r.sweep_value for r in rows})
        for key in series.series_keys(rows):
            for variant in variants:
                it, mean = series.convergence_curve(rows, *key, variant)
                ax.plot(it, mean, "-", marker=".",
                        label=_label(key, suffix) + f" cfg {int(variant)}")
    ax.set_xlabel("Outer iteration")
    ax.set_ylabel("SWSR [bpcu]")


def _plot_cdf(ax, loaded, spec):
    for suffix, rows in loaded:
        for key, (x, y) in series.cdf_curves(rows).items():
            ax.step(x, y, where="post", label=_label(key, suffix))
    ax.set_xlabel("SWSR [bpcu]")
    ax.set_ylabel("CDF")
    ax.set_ylim(0.0, 1.05)


def _plot_region(ax, loaded, spec):
    for suffix, rows in loaded:
        for key in series.series_keys(rows):
            dl, ul = series.region_curve(rows, *key)
            ax.plot(dl, ul, STYLE.get(key[0], "-x"), label=_label(key, suffix))
    ax.set_xlabel("Downlink sum-rate [bpcu]")
    ax.set_ylabel("Uplink sum-rate [bpcu]")


def _plot_location(ax, loaded, spec):
    for suffix, rows in loaded:
        for key in series.series_keys(rows):
            x, dl, _ = series.mean_curve(rows, *key, field="dl_sum_rate")
            _, ul, _ = series.mean_curve(rows, *key, field="ul_sum_rate")
            ax.plot(x, dl, "-o", label=_label(key, suffix) + " DL")
            ax.plot(x, ul, "--s", label=_label(key, suffix) + " UL")
    ax.set_xlabel(X_LABEL["irs_location"])
    ax.set_ylabel("Sum-rate [bpcu]")


def _plot_power_rates(ax, loaded, spec):
    _plot_sweep(ax, loaded, spec)


_PLOTTERS = {
    "convergence": _plot_convergence,
    "swsr_vs_irs_size": _plot_sweep,
    "swsr_vs_bs_power": _plot_power_rates,
    "swsr_vs_ul_power": _plot_power_rates,
    "rate_region": _plot_region,
    "cdf": _plot_cdf,
    "irs_location": _plot_location,
}


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the output path.

    Header-only inputs produce an empty-axes figure with a warning rather
    than an error.
    """
    if spec.kind not in _PLOTTERS:
        raise SchemaError(f"unknown figure kind {spec.kind!r}")
    loaded = _load(spec)
    fig, ax = _new_axes()
    try:
        if all(not rows for _, rows in loaded):
            warnings.warn(f"{spec.output}: no data rows; rendering empty axes")
        else:
            _PLOTTERS[spec.kind](ax, loaded, spec)
            ax.legend(fontsize=7)
        if spec.title:
            ax.set_title(spec.title)
        fig.tight_layout()
        fig.savefig(spec.output, metadata={"Software": "figgen"})
    finally:
        plt.close(fig)
    return spec.output
