"""Plot CSV output written by the grazesim CLI.

    python docs/plot_results.py OUT_DIR [--dest DIR]

Looks for the files each subcommand writes in OUT_DIR and renders whatever
it finds. The CLI's own ``--plot`` flag draws the same figures in one step;
this script is for re-plotting saved runs or as a starting point for custom
figures.
"""
from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from grazesim import plotting
from grazesim.density import Grid, Histogram2D
from grazesim.output import read_csv


def _floats(rows, cols):
    return np.array([[float(r[c]) for c in cols] for r in rows]) if rows else np.empty((0, len(cols)))


def bifurcation(src: Path, dest: Path) -> None:
    _, scatter = read_csv(src / "bifurcation_scatter.csv")
    _, branches = read_csv(src / "bifurcation_branches.csv")
    curves = [(float(b[0]), float(b[4]), float(b[6]), f"{b[1]}-{b[2]}-{b[3]}") for b in branches]
    plotting.bifurcation(_floats(scatter, (0, 1)), curves, dest / "bifurcation.png")


def density(src: Path, dest: Path) -> None:
    # the CSV stores occupied bins only; rebuild the grid from bin centres
    _, rows = read_csv(src / "density_histogram.csv")
    a = _floats(rows, (0, 1, 2))
    xs, ys = np.unique(a[:, 0]), np.unique(a[:, 1])
    dx = np.min(np.diff(xs)) if len(xs) > 1 else 1.0
    dy = np.min(np.diff(ys)) if len(ys) > 1 else 1.0
    nx = int(round((xs[-1] - xs[0]) / dx)) + 1
    ny = int(round((ys[-1] - ys[0]) / dy)) + 1
    grid = Grid((xs[0] - dx / 2, xs[-1] + dx / 2), (ys[0] - dy / 2, ys[-1] + dy / 2), nx, ny)
    hist = Histogram2D.empty(grid)
    ix = np.rint((a[:, 0] - xs[0]) / dx).astype(int)
    iy = np.rint((a[:, 1] - ys[0]) / dy).astype(int)
    hist.counts[ix, iy] = a[:, 2].astype(np.int64)
    hist.total = int(a[:, 2].sum())
    plotting.density(hist, dest / "density.png")


def oscillator(src: Path, dest: Path) -> None:
    _, pi = read_csv(src / "oscillator_pi.csv")
    _, pp = read_csv(src / "oscillator_pi_prime.csv")
    plotting.sections(_floats(pi, (0, 1)), _floats(pp, (0, 1)), dest / "oscillator.png")


def compare(src: Path, dest: Path) -> None:
    _, rows = read_csv(src / "compare_points.csv")
    sde, mp = {}, {}
    for source, F, u1, w1 in rows:
        (sde if source == "sde" else mp).setdefault(float(F), []).append((float(u1), float(w1)))
    plotting.compare({k: np.array(v) for k, v in sde.items()},
                     {k: np.array(v) for k, v in mp.items()}, dest / "compare.png")


def fraction(src: Path, dest: Path) -> None:
    _, rows = read_csv(src / "fraction_fraction.csv")
    a = _floats(rows, (0, 1))
    plotting.curve(a[:, 0], {"fraction": a[:, 1]}, dest / "fraction.png", "eps", "fraction")


def scaling(src: Path, dest: Path) -> None:
    _, rows = read_csv(src / "scaling_std.csv")
    a = _floats(rows, (0, 1, 2))
    plotting.curve(a[:, 0], {"std x": a[:, 1], "std y": a[:, 2]}, dest / "scaling.png",
                   "eps", "marginal std", loglog=True)


PLOTS = {
    "bifurcation_scatter.csv": bifurcation,
    "density_histogram.csv": density,
    "oscillator_pi.csv": oscillator,
    "compare_points.csv": compare,
    "fraction_fraction.csv": fraction,
    "scaling_std.csv": scaling,
}


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("src", type=Path)
    ap.add_argument("--dest", type=Path, default=None)
    args = ap.parse_args(argv)
    dest = args.dest or args.src
    dest.mkdir(parents=True, exist_ok=True)
    for name, fn in PLOTS.items():
        if (args.src / name).exists():
            fn(args.src, dest)
            print(f"plotted {name}")


if __name__ == "__main__":
    main()
