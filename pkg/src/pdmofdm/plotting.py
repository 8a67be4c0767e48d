"""Figure rendering for sweep and constellation reports.

Figures are written next to the delimited outputs; the CSV files remain the
primary, machine-readable artifacts.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import FEC_LIMIT, SweepResult, wilson_interval

_AXIS_LABELS = {
    "pdr": "power division ratio P1/P2",
    "snr_db": "SNR (dB)",
    "osnr_db": "OSNR (dB)",
    "fiber_length_km": "fiber length (km)",
}

_LANE_STYLE = {
    (1, "x"): dict(color="tab:blue", marker="o", ls="-"),
    (1, "y"): dict(color="tab:blue", marker="s", ls="--"),
    (2, "x"): dict(color="tab:red", marker="o", ls="-"),
    (2, "y"): dict(color="tab:red", marker="s", ls="--"),
}


def render_sweep(result: SweepResult, path) -> None:
    """BER-vs-axis curves per branch and polarization, log BER axis."""
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    lanes = sorted({(lr.branch, lr.pol) for p in result.points for lr in p.lanes})
    floor = None
    for key in lanes:
        xs, ys, lo, hi = [], [], [], []
        for point in result.points:
            lr = point.lane(*key)
            xs.append(point.axis_value)
            ys.append(lr.ber)
            ci = wilson_interval(lr.errors, lr.bits)
            lo.append(ci[0])
            hi.append(ci[1])
            if lr.ber > 0:
                floor = lr.ber if floor is None else min(floor, lr.ber)
        ys = np.asarray(ys)
        # Zero-error points sit on the plot floor so the curve stays visible.
        plot_floor = max((floor or 1e-6) / 10, 1e-12)
        shown = np.where(ys > 0, ys, plot_floor)
        err_lo = np.clip(shown - np.asarray(lo), 0, None)
        err_hi = np.clip(np.asarray(hi) - shown, 0, None)
        style = _LANE_STYLE.get(key, {})
        ax.errorbar(
            xs,
            shown,
            yerr=[err_lo, err_hi],
            label=f"branch {key[0]}, pol {key[1].upper()}",
            capsize=2,
            ms=4,
            **style,
        )
    ax.axhline(FEC_LIMIT, color="gray", lw=1, ls=":", label=f"FEC limit {FEC_LIMIT:g}")
    ax.set_yscale("log")
    ax.set_xlabel(_AXIS_LABELS.get(result.axis, result.axis))
    ax.set_ylabel("BER")
    ax.set_title(f"{result.method} detection (seed {result.seed})")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_constellation(points, path, max_points: int = 4000) -> None:
    """Scatter panels per (branch, pol) tap output."""
    keys = sorted(points)
    n = len(keys)
    ncols = 2 if n > 1 else 1
    nrows = (n + ncols - 1) // ncols
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(3.2 * ncols, 3.2 * nrows), squeeze=False
    )
    for ax in axes.ravel()[n:]:
        ax.axis("off")
    for ax, key in zip(axes.ravel(), keys):
        vals = points[key]
        if vals.size > max_points:
            vals = vals[:: vals.size // max_points + 1]
        ax.scatter(vals.real, vals.imag, s=2, alpha=0.4, color="tab:blue")
        branch, pol = key
        name = "composite" if branch == 0 else f"branch {branch}"
        ax.set_title(f"{name}, pol {pol.upper()}", fontsize=9)
        ax.set_aspect("equal")
        ax.grid(True, alpha=0.3)
        ax.axhline(0, color="gray", lw=0.5)
        ax.axvline(0, color="gray", lw=0.5)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
