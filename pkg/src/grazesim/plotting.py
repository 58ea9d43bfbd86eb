"""PNG rendering of CLI results (matplotlib, Agg backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def bifurcation(scatter, branches, path, ylabel: str = "x") -> Path:
    """Noisy iterates as dots; deterministic branches with +-1 std bands.

    ``branches`` rows are (mu, x, std_x, group) where ``group`` labels the
    continuous branch a point belongs to.
    """
    fig, ax = plt.subplots(figsize=(7, 4.5))
    scatter = np.asarray(scatter)
    if len(scatter):
        ax.plot(scatter[:, 0], scatter[:, 1], ",", color="k", alpha=0.5)
    groups: dict = {}
    for mu, x, sx, g in branches:
        groups.setdefault(g, []).append((mu, x, sx))
    for rows in groups.values():
        r = np.array(sorted(rows))
        ax.plot(r[:, 0], r[:, 1], color="tab:blue", lw=1.2)
        ax.plot(r[:, 0], r[:, 1] + r[:, 2], color="tab:red", lw=0.8)
        ax.plot(r[:, 0], r[:, 1] - r[:, 2], color="tab:red", lw=0.8)
    ax.set_xlabel("mu")
    ax.set_ylabel(ylabel)
    return _save(fig, path)


def density(hist, path, switching_line: bool = True) -> Path:
    fig, ax = plt.subplots(figsize=(6, 5))
    g = hist.grid
    prob = hist.probability().T
    # square-root scale keeps faint tails visible next to sharp peaks
    im = ax.imshow(np.sqrt(prob), origin="lower", aspect="auto", cmap="jet",
                   extent=(g.xlim[0], g.xlim[1], g.ylim[0], g.ylim[1]))
    if switching_line and g.xlim[0] < 0.0 < g.xlim[1]:
        ax.axvline(0.0, color="0.6", lw=1)
    fig.colorbar(im, ax=ax, label="sqrt(probability per bin)")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    return _save(fig, path)


def sections(pi_rows, prime_rows, path) -> Path:
    """Oscillator Pi (top) and Pi' (bottom) against the forcing amplitude."""
    fig, (a1, a2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    pi_rows, prime_rows = np.asarray(pi_rows), np.asarray(prime_rows)
    if len(pi_rows):
        a1.plot(pi_rows[:, 0], pi_rows[:, 1], ",", color="k")
    if len(prime_rows):
        a2.plot(prime_rows[:, 0], prime_rows[:, 1], ",", color="k")
    a2.axhline(0.0, color="0.6", lw=1)
    a1.set_ylabel("u on Pi")
    a2.set_ylabel("u1 on Pi'")
    a2.set_xlabel("F")
    return _save(fig, path)


def compare(sde_points: dict, map_points: dict, path) -> Path:
    """u1 distributions on Pi' from the SDE and the map, one panel per forcing.

    Only u1 is comparable: the map's second coordinate is not the SDE phase.
    """
    Fs = sorted(sde_points)
    fig, axes = plt.subplots(1, len(Fs), figsize=(4.5 * len(Fs), 4), squeeze=False)
    for ax, F in zip(axes[0], Fs):
        s, m = sde_points[F][:, 0], map_points[F][:, 0]
        bins = np.linspace(min(s.min(), m.min()), max(s.max(), m.max()), 40)
        ax.hist(s, bins, density=True, histtype="step", color="tab:blue", label="SDE")
        ax.hist(m, bins, density=True, histtype="step", color="tab:orange", label="map")
        ax.set_title(f"F = {F:.4f}")
        ax.set_xlabel("u1")
        ax.xaxis.set_major_locator(plt.MaxNLocator(4))
    axes[0, 0].set_ylabel("density")
    axes[0, 0].legend()
    return _save(fig, path)


def curve(x, ys: dict, path, xlabel: str, ylabel: str, loglog: bool = False) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in ys.items():
        ax.plot(x, y, "o-", ms=3, label=label)
    if loglog:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(ys) > 1:
        ax.legend()
    return _save(fig, path)
