"""PNG renderings of the CSV outputs (headless matplotlib)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .curves import CurveTable  # noqa: E402
from .simulator import DelayErrorCurve  # noqa: E402


def plot_curves(table: CurveTable, path: str | Path) -> Path:
    """Exponent against rate, one line per curve; zero-exponent tails are not drawn."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    rate = table.rate
    for name in table.columns[1:]:
        y = table.column(name).astype(float)
        y = np.where(y > 0, y, np.nan)
        ru, eu = table.curve_units[name]
        label = name if ru == table.units and eu == table.units else f"{name} ({ru.value}/{eu.value})"
        style = "--" if "envelope" in name else "-"
        ax.plot(rate, y, style, label=label, lw=1.4)
    ax.set_xlabel(f"rate ({table.units.value} units)")
    ax.set_ylabel("fixed-delay exponent (nats per use)")
    ax.set_title(table.scenario.value)
    ax.set_xlim(left=0)
    ax.set_ylim(bottom=0)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_delay_curve(curve: DelayErrorCurve, k_f: int, path: str | Path,
                     reference_slope: float | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    d = curve.delays * k_f
    eps = curve.epsilons
    keep = eps > 0
    ax.semilogy(d[keep], eps[keep], "o-", label="measured")
    if reference_slope is not None and keep.any():
        d0, e0 = d[keep][0], eps[keep][0]
        ax.semilogy(d, e0 * np.exp(-reference_slope * (d - d0)), ":", label=f"slope {reference_slope:.3f}")
    ax.set_xlabel("delay (forward uses)")
    ax.set_ylabel("max bit error probability")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_ccdfs(ccdfs: dict[str, tuple[np.ndarray, np.ndarray]], path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, (t, p) in ccdfs.items():
        keep = p > 0
        ax.semilogy(t[keep], p[keep], ".-", label=name)
    ax.set_xlabel("t (forward uses)")
    ax.set_ylabel("P(T > t)")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
