"""Command-line front end.

    grazesim <subcommand> --config cfg.json [--seed N] [--out DIR] [--plot]

Exit status: 0 on success, 2 for configuration errors, 3 for numerical
failures (divergence, singular systems and the like).
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import covariance as cov
from . import density as dens
from . import oscillator as osc
from . import periodic as per
from .errors import ConfigError, GrazesimError
from .noise import NoiseSpec, NoiseStream, parse_uint64, split
from .nordmark import MapParams, iterate, left_fixed_point
from .output import check_keys, dump_config, load_json_config, write_csv, write_json
from .smallmat import SymMat2

log = logging.getLogger("grazesim")

_GRID = {"start": None, "stop": None, "num": None}

MAP_SCHEMA = {
    "description": None,
    "map": {"tau": None, "delta": None, "chi": None, "mu": None},
    "noise": {"eps": None, "theta": None},
    "seed": None,
    "mu_grid": _GRID,
    "eps_list": None,
    "eps_grid": _GRID,
    "iterates": None,
    "discard": None,
    "n_max": None,
    "period": None,
    "histogram": {"nx": None, "ny": None, "xlim": None, "ylim": None},
    "clusters": None,
    "attractors": None,
}

OSC_SCHEMA = {
    "description": None,
    "oscillator": {"k_osc": None, "b_osc": None, "k_supp": None, "b_supp": None, "d": None},
    "eps": None,
    "seed": None,
    "forcing_grid": _GRID,
    "etas": None,
    "periods": None,
    "transient": None,
    "steps_per_period": None,
    "max_crossings": None,
    "map_iterates": None,
    "map_discard": None,
}


# ------------------------------------------------------------ config access

def _get(cfg: dict, key: str, kind=float, default=None, required: bool = True):
    node = cfg
    for part in key.split("."):
        if not isinstance(node, dict) or part not in node:
            if default is not None or not required:
                return default
            raise ConfigError(f"missing key '{key}'")
        node = node[part]
    try:
        if kind is int:
            if isinstance(node, bool) or float(node) != int(node):
                raise ValueError
            return int(node)
        if kind is bool:
            if not isinstance(node, bool):
                raise ValueError
            return node
        return kind(node)
    except (TypeError, ValueError):
        raise ConfigError(f"'{key}' has invalid value {node!r}") from None


def _positive_int(cfg, key, default=None) -> int:
    v = _get(cfg, key, int, default)
    if v < 1:
        raise ConfigError(f"'{key}' must be >= 1")
    return v


def _grid(cfg, key) -> np.ndarray:
    start, stop = _get(cfg, f"{key}.start"), _get(cfg, f"{key}.stop")
    num = _positive_int(cfg, f"{key}.num")
    return np.linspace(start, stop, num)


def _map_params(cfg, mu_required: bool = False) -> MapParams:
    try:
        return MapParams(_get(cfg, "map.tau"), _get(cfg, "map.delta"), _get(cfg, "map.chi", int),
                         _get(cfg, "map.mu", float, None if mu_required else 0.0, required=mu_required))
    except ValueError as exc:
        raise ConfigError(f"map: {exc}") from exc


def _theta(cfg) -> SymMat2:
    raw = cfg.get("noise", {}).get("theta", [1.0, 0.0, 1.0])
    try:
        arr = np.asarray(raw, dtype=float)
        if arr.shape == (3,):
            return SymMat2(*map(float, arr))
        if arr.shape == (2, 2) and arr[0, 1] == arr[1, 0]:
            return SymMat2.from_array(arr)
    except (TypeError, ValueError):
        pass
    raise ConfigError("'noise.theta' must be [t11, t12, t22] or a symmetric 2x2 list")


def _noise(cfg, eps_required: bool = True) -> NoiseSpec:
    eps = _get(cfg, "noise.eps", float, None if eps_required else 0.0, required=eps_required)
    try:
        return NoiseSpec(eps, _theta(cfg))
    except (ValueError, GrazesimError) as exc:
        raise ConfigError(f"noise: {exc}") from exc


def _eps_values(cfg) -> np.ndarray:
    if "eps_list" in cfg:
        try:
            vals = np.asarray(cfg["eps_list"], dtype=float)
        except (TypeError, ValueError):
            raise ConfigError("'eps_list' must be a list of numbers") from None
    elif "eps_grid" in cfg:
        vals = _grid(cfg, "eps_grid")
    else:
        raise ConfigError("need 'eps_list' or 'eps_grid'")
    if vals.ndim != 1 or len(vals) == 0 or np.any(vals <= 0.0):
        raise ConfigError("noise amplitudes must be a non-empty list of positive numbers")
    return vals


def _osc_params(cfg) -> osc.OscillatorParams:
    try:
        return osc.OscillatorParams(
            _get(cfg, "oscillator.k_osc"), _get(cfg, "oscillator.b_osc"),
            _get(cfg, "oscillator.k_supp"), _get(cfg, "oscillator.b_supp"),
            _get(cfg, "oscillator.d"), 0.0, _get(cfg, "eps", float, 0.0, required=False))
    except ValueError as exc:
        raise ConfigError(f"oscillator: {exc}") from exc


@dataclass
class Context:
    name: str
    cfg: dict
    seed: int
    out: Path
    plot: bool

    def meta(self, **extra) -> dict:
        m = {"grazesim": __version__, "subcommand": self.name, "seed": self.seed,
             "config": json.dumps(self.cfg, sort_keys=True, separators=(",", ":"))}
        m.update(extra)
        return m

    def csv(self, suffix: str, header, rows, **extra) -> Path:
        path = write_csv(self.out / f"{self.name}_{suffix}.csv", header, rows, self.meta(**extra))
        log.info("wrote %s", path)
        return path

    def png(self, fn, *args, suffix: str = "", **kw) -> None:
        if not self.plot:
            return
        from . import plotting
        name = f"{self.name}{'_' + suffix if suffix else ''}.png"
        log.info("wrote %s", getattr(plotting, fn)(*args, self.out / name, **kw))

    def stream(self) -> NoiseStream:
        return NoiseStream(self.seed)


# ----------------------------------------------------------------- commands

def cmd_bifurcation(ctx: Context) -> None:
    p0 = _map_params(ctx.cfg)
    noise = _noise(ctx.cfg)
    mus = _grid(ctx.cfg, "mu_grid")
    iterates = _positive_int(ctx.cfg, "iterates")
    discard = _get(ctx.cfg, "discard", int, dens.DEFAULT_DISCARD)
    n_max = _positive_int(ctx.cfg, "n_max", per.DEFAULT_N_MAX)
    children = split(ctx.stream(), len(mus))
    scatter = []
    for mu, child in zip(mus, children):
        xs, ys = iterate(p0.with_mu(float(mu)), noise, child, (0.0, 0.0), iterates, discard)
        scatter.extend((float(mu), float(x), float(y)) for x, y in zip(xs, ys))
    branches, curves = [], []
    for mu in mus:
        p = p0.with_mu(float(mu))
        fp, ok = left_fixed_point(p)
        if ok and p.grazing_orbit_attracting:
            lam = cov.fixed_point_covariance(p, noise.theta).scaled(noise.eps**2)
            sx, sy = math.sqrt(lam.s11), math.sqrt(lam.s22)
            branches.append((float(mu), "fixed", 1, 0, fp[0], fp[1], sx, sy))
            curves.append((float(mu), fp[0], sx, "fixed"))
        for sol in per.attracting_solutions(p, n_max):
            chain = cov.covariance_chain(p, noise.theta, sol).scaled(noise.eps**2)
            for i, (pt, lam) in enumerate(zip(sol.points, chain)):
                sx, sy = math.sqrt(max(lam.s11, 0.0)), math.sqrt(max(lam.s22, 0.0))
                branches.append((float(mu), "periodic", sol.n, i, pt[0], pt[1], sx, sy))
                curves.append((float(mu), pt[0], sx, f"{sol.n}-{i}"))
    ctx.csv("scatter", ["mu", "x", "y"], scatter, iterates_per_mu=iterates, discard=discard)
    ctx.csv("branches", ["mu", "kind", "n", "index", "x", "y", "std_x", "std_y"], branches)
    ctx.png("bifurcation", [r[:2] for r in scatter], curves)


def cmd_density(ctx: Context) -> None:
    p = _map_params(ctx.cfg, mu_required=True)
    noise = _noise(ctx.cfg)
    iterates = _positive_int(ctx.cfg, "iterates")
    discard = _get(ctx.cfg, "discard", int, dens.DEFAULT_DISCARD)
    n_max = _positive_int(ctx.cfg, "n_max", per.DEFAULT_N_MAX)
    grid = None
    if "histogram" in ctx.cfg:
        h = ctx.cfg["histogram"]
        nx = _positive_int(ctx.cfg, "histogram.nx", dens.DEFAULT_BINS)
        ny = _positive_int(ctx.cfg, "histogram.ny", dens.DEFAULT_BINS)
        if "xlim" in h and "ylim" in h:
            try:
                grid = dens.Grid(tuple(map(float, h["xlim"])), tuple(map(float, h["ylim"])), nx, ny)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"histogram: {exc}") from exc
    s_hist, s_clu, s_att = split(ctx.stream(), 3)
    hist = dens.estimate_density(p, noise, s_hist, (0.0, 0.0), iterates, discard, grid)
    xc, yc = hist.centers()
    prob = hist.probability()
    ii, jj = np.nonzero(hist.counts)
    rows = [(xc[i], yc[j], int(hist.counts[i, j]), prob[i, j]) for i, j in zip(ii, jj)]
    ctx.csv("histogram", ["x_center", "y_center", "count", "probability"], rows,
            iterates=iterates, out_of_range=hist.out_of_range, bins=f"{hist.grid.nx}x{hist.grid.ny}",
            note="bins with zero count omitted")
    ctx.png("density", hist)
    sols = per.attracting_solutions(p, n_max)
    if _get(ctx.cfg, "clusters", bool, False, required=False):
        if len(sols) != 1:
            raise ConfigError(f"'clusters' needs exactly one attracting solution, found {len(sols)}")
        sol = sols[0]
        chain = cov.covariance_chain(p, noise.theta, sol)
        stats, unassigned = dens.cluster_stats_stream(p, noise, s_clu, sol, iterates, discard)
        tv = dens.total_variation(hist, dens.mixture_from_chain(sol, chain, noise.eps))
        rows = []
        for i, (st, lam) in enumerate(zip(stats, chain.scaled(noise.eps))):
            rows.append((i, st.center[0], st.center[1], st.weight, st.mean[0], st.mean[1],
                         st.cov.s11, st.cov.s12, st.cov.s22, lam.s11, lam.s12, lam.s22))
        ctx.csv("clusters", ["index", "x_star", "y_star", "weight", "mean_x", "mean_y",
                             "cov_xx", "cov_xy", "cov_yy", "pred_xx", "pred_xy", "pred_yy"], rows,
                period=sol.n, unassigned=unassigned, total_variation=tv)
    if _get(ctx.cfg, "attractors", bool, False, required=False):
        if not sols:
            raise ConfigError("'attractors' needs at least one attracting solution")
        w, other = dens.attractor_weights(p, noise, s_att, sols, iterates, discard)
        rows = [(f"period-{s.n}", s.x_star, s.y_star, wi) for s, wi in zip(sols, w)]
        rows.append(("other", float("nan"), float("nan"), other))
        ctx.csv("attractors", ["attractor", "x_star", "y_star", "weight"], rows)


def cmd_periodic(ctx: Context) -> None:
    p0 = _map_params(ctx.cfg)
    n_max = _positive_int(ctx.cfg, "n_max", per.DEFAULT_N_MAX)
    mus = _grid(ctx.cfg, "mu_grid") if "mu_grid" in ctx.cfg else np.array([p0.mu])
    rows = []
    for mu in mus:
        p = p0.with_mu(float(mu))
        for n in range(1, n_max + 1):
            for sol in per.maximal_solutions(p, n):
                m1, m2 = sol.multipliers
                rows.append((float(mu), n, sol.x_star, sol.y_star, sol.stable, sol.admissible,
                             abs(m1), abs(m2)))
    ctx.csv("solutions", ["mu", "n", "x_star", "y_star", "stable", "admissible",
                          "abs_multiplier_1", "abs_multiplier_2"], rows)
    wins = per.period_windows(p0, mus, n_max)
    ctx.csv("windows", ["n", "mu_min", "mu_max"], [(n, a, b) for n, (a, b) in wins.items()])


def cmd_covariance(ctx: Context) -> None:
    p = _map_params(ctx.cfg, mu_required=True)
    noise = _noise(ctx.cfg, eps_required=False)
    n_max = _positive_int(ctx.cfg, "n_max", per.DEFAULT_N_MAX)
    rows = []
    fp, ok = left_fixed_point(p)
    if ok and p.grazing_orbit_attracting:
        lam = cov.fixed_point_covariance(p, noise.theta)
        rows.append((0, 0, fp[0], fp[1], lam.s11, lam.s12, lam.s22, float("nan"), float("nan")))
    for sol in per.attracting_solutions(p, n_max):
        chain = cov.covariance_chain(p, noise.theta, sol)
        err = cov.approximation_error(p, noise.theta, sol)
        for i, (pt, lam) in enumerate(zip(sol.points, chain.lam)):
            rows.append((sol.n, i, pt[0], pt[1], lam.s11, lam.s12, lam.s22, chain.det_guard, err))
    ctx.csv("lambda", ["n", "index", "x", "y", "lambda11", "lambda12", "lambda22",
                       "det_i_minus_m", "approx_rel_error"], rows,
            note="unscaled; multiply by eps^2 for the physical covariance; n = 0 is the left fixed point")


def cmd_derive_params(ctx: Context) -> None:
    nf = osc.derive_normal_form(_osc_params(ctx.cfg))
    path = write_json(ctx.out / "derive-params.json", nf.as_dict())
    log.info("wrote %s", path)


def _osc_run_settings(cfg):
    spp = _positive_int(cfg, "steps_per_period", 4096)
    return dict(
        periods=_positive_int(cfg, "periods"),
        transient=_get(cfg, "transient", int, 100),
        h=osc.TWO_PI / spp,
        max_crossings=_positive_int(cfg, "max_crossings", 1),
    )


def cmd_oscillator(ctx: Context) -> None:
    p = _osc_params(ctx.cfg)
    Fs = _grid(ctx.cfg, "forcing_grid")
    run = _osc_run_settings(ctx.cfg)
    s_sde, s_map = split(ctx.stream(), 2)
    pi_rows, pp_rows = osc.section_sweep(p, Fs, s_sde, **run)
    ctx.csv("pi", ["F", "u"], [tuple(r) for r in pi_rows])
    ctx.csv("pi_prime", ["F", "u1", "w1", "virtual"],
            [(r[0], r[1], r[2], int(r[3])) for r in pp_rows])
    ctx.png("sections", pi_rows, pp_rows)
    map_iterates = _get(ctx.cfg, "map_iterates", int, 0, required=False)
    if map_iterates > 0:
        nf = osc.derive_normal_form(p)
        noise = NoiseSpec(p.eps, nf.theta)
        discard = _get(ctx.cfg, "map_discard", int, 1000)
        rows = []
        for F, child in zip(Fs, split(s_map, len(Fs))):
            eta = float(F) - nf.F_graz
            mp = nf.map_params(eta)
            xs, ys = iterate(mp, noise, child, (0.0, 0.0), map_iterates, discard)
            u1, w1, _ = osc.from_normal_form(nf, xs, ys, mp.mu)
            rows.extend(zip(np.full(len(xs), F), xs, ys, u1, w1))
        ctx.csv("map", ["F", "x", "y", "u1", "w1"], rows,
                tau=nf.tau, delta=nf.delta, chi=nf.chi)


def cmd_compare(ctx: Context) -> None:
    p = _osc_params(ctx.cfg)
    try:
        etas = [float(e) for e in ctx.cfg.get("etas", [0.15, 0.3])]
    except (TypeError, ValueError):
        raise ConfigError("'etas' must be a list of numbers") from None
    run = _osc_run_settings(ctx.cfg)
    res = osc.compare(p, etas, ctx.stream(), map_discard=_get(ctx.cfg, "map_discard", int, 1000), **run)
    rows = []
    for r in res.rows:
        gm, gs = r.rel_gap()
        rows.append((r.F, r.eta, r.sde_count, r.sde_mean, r.sde_std,
                     r.map_count, r.map_mean, r.map_std, gm, gs))
    ctx.csv("summary", ["F", "eta", "sde_count", "sde_mean_u1", "sde_std_u1", "map_count",
                        "map_mean_u1", "map_std_u1", "rel_gap_mean", "rel_gap_std"], rows)
    pts = []
    for F in res.sde_points:
        pts.extend(("sde", F, u, w) for u, w in res.sde_points[F])
        pts.extend(("map", F, u, w) for u, w in res.map_points[F])
    ctx.csv("points", ["source", "F", "u1", "w1"], pts,
            note="map w1 is the second coordinate of the global map, not the SDE phase; compare u1")
    ctx.png("compare", res.sde_points, res.map_points)


def cmd_fraction(ctx: Context) -> None:
    p = _map_params(ctx.cfg, mu_required=True)
    noise = _noise(ctx.cfg, eps_required=False)
    n = _positive_int(ctx.cfg, "period", 4)
    eps = _eps_values(ctx.cfg)
    iterates = _positive_int(ctx.cfg, "iterates")
    if iterates < 10_000:
        raise ConfigError("'iterates' must be at least 10000")
    discard = _get(ctx.cfg, "discard", int, dens.DEFAULT_DISCARD)
    res = dens.fraction_sweep(p, noise, ctx.stream(), n, eps, iterates, discard)
    rows = [(e, r.fraction, n, iterates, ctx.seed) for e, r in res]
    extra = {}
    if len(eps) >= 3:
        extra["steepest_descent_eps"] = dens.steepest_descent(eps, [r.fraction for _, r in res])
    ctx.csv("fraction", ["eps", "fraction", "n", "iterates", "seed"], rows, **extra)
    ctx.png("curve", eps, {"fraction": [r.fraction for _, r in res]},
            xlabel="eps", ylabel=f"fraction of returns in {n} steps")


def cmd_scaling(ctx: Context) -> None:
    p = _map_params(ctx.cfg)
    noise = _noise(ctx.cfg, eps_required=False)
    eps = _eps_values(ctx.cfg)
    iterates = _positive_int(ctx.cfg, "iterates")
    discard = _get(ctx.cfg, "discard", int, dens.DEFAULT_DISCARD)
    rows = dens.marginal_std_sweep(p, noise, ctx.stream(), eps, iterates, discard)
    extra = {}
    if len(rows) >= 2:
        extra["slope_x"] = dens.loglog_slope(eps, [r[1] for r in rows])
        extra["slope_y"] = dens.loglog_slope(eps, [r[2] for r in rows])
    ctx.csv("std", ["eps", "std_x", "std_y"], rows, **extra)
    ctx.png("curve", eps, {"std x": [r[1] for r in rows], "std y": [r[2] for r in rows]},
            xlabel="eps", ylabel="marginal std", loglog=True)


COMMANDS = {
    "bifurcation": (cmd_bifurcation, MAP_SCHEMA, "noisy bifurcation diagram with analytic branches"),
    "density": (cmd_density, MAP_SCHEMA, "invariant-density histogram and cluster statistics"),
    "periodic": (cmd_periodic, MAP_SCHEMA, "maximal periodic solutions and period windows"),
    "covariance": (cmd_covariance, MAP_SCHEMA, "Gaussian covariances about attracting solutions"),
    "derive-params": (cmd_derive_params, OSC_SCHEMA, "map parameters of the impact oscillator"),
    "oscillator": (cmd_oscillator, OSC_SCHEMA, "SDE Poincare sections over a forcing grid"),
    "compare": (cmd_compare, OSC_SCHEMA, "SDE versus derived-map statistics on Pi'"),
    "fraction": (cmd_fraction, MAP_SCHEMA, "fraction of returns in exactly n steps vs eps"),
    "scaling": (cmd_scaling, MAP_SCHEMA, "marginal standard deviations vs eps"),
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="grazesim", description="Stochastic grazing-bifurcation toolkit.")
    ap.add_argument("--version", action="version", version=f"grazesim {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, (_, _, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="JSON config file or preset name (fig2, fig3, fig5-fig9)")
        sp.add_argument("--seed", default=None, help="uint64 seed, overrides the config")
        sp.add_argument("--out", default=".", help="output directory (default: .)")
        sp.add_argument("--plot", action="store_true", help="also render PNG figures")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


PRESET_DIR = Path(__file__).parent / "presets"


def resolve_config(path) -> Path:
    """A file path, or the name of a shipped preset such as ``fig2``."""
    p = Path(path)
    if not p.exists() and (PRESET_DIR / f"{p.stem}.json").exists() and p.parent == Path("."):
        return PRESET_DIR / f"{p.stem}.json"
    return p


def load_config(name: str, path) -> dict:
    cfg = load_json_config(resolve_config(path))
    check_keys(cfg, COMMANDS[name][1])
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    fn = COMMANDS[args.command][0]
    try:
        cfg = load_config(args.command, args.config)
        try:
            seed = parse_uint64(args.seed if args.seed is not None else cfg.get("seed", 0))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"seed: {exc}") from exc
        ctx = Context(args.command, cfg, seed, Path(args.out), args.plot)
        fn(ctx)
    except ConfigError as exc:
        print(f"grazesim: config error: {exc}", file=sys.stderr)
        return 2
    except GrazesimError as exc:
        print(f"grazesim: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())


__all__ = ["main", "build_parser", "load_config", "dump_config", "COMMANDS"]
