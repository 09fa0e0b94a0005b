"""Command-line experiment runner.

    oproute approx      --config cfg.json [--out out.csv]
    oproute simulate    --config cfg.json [--seed N] [--trials N] [--jobs N]
    oproute optimize    --config cfg.json
    oproute contour     --config cfg.json
    oproute noise-sweep --config cfg.json [--jobs N]

Every CSV starts with a ``#`` comment line carrying the config digest and the
seed, followed by a header row.  Exit codes: 0 success, 1 configuration
error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import logging
import math
import sys

import numpy as np

from . import analytic
from .config import ConfigError, ExperimentConfig, axis_from_spec, axis_values
from .optimize import (
    Axis,
    GridSpec,
    SimulatedObjective,
    analytic_objective,
    argmax_beta_given_p,
    argmax_joint,
    argmax_p_given_beta,
    argmax_table,
    evaluate_grid,
)
from .simulate import simulate_surface, snr_nn_to_sigma2

log = logging.getLogger("oproute")

APPROX_COLUMNS = ["lambda", "alpha", "p", "beta", "g_alpha", "v0", "c", "max_relay",
                  "fraction", "d_sq", "f_sq", "k_sq"]
SIMULATE_COLUMNS = ["p", "beta", "alpha", "lambda", "sigma2", "metric", "mean", "stderr",
                    "n", "trunc_bound", "seed"]
OPTIMIZE_COLUMNS = ["alpha", "objective", "p_star", "beta_star", "spectral_eff", "value",
                    "boundary_flag"]
CONTOUR_COLUMNS = ["alpha", "p", "beta", "k_sq", "k_norm", "near_optimal"]
NOISE_COLUMNS = ["snr_nn", "sigma2", "k_max", "p_star", "beta_star"]

DEFAULT_NOISE_DB = [3.0, 10.0, 30.0, 100.0, math.inf]
DEFAULT_NOISE_P = {"min": 0.02, "max": 0.5, "count": 12, "scale": "log"}
DEFAULT_NOISE_BETA = {"min": 0.125, "max": 8.0, "count": 13, "scale": "log"}


@dataclasses.dataclass
class Table:
    columns: list
    rows: list


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def render_csv(table: Table, command: str, cfg: ExperimentConfig) -> str:
    buf = io.StringIO()
    buf.write(f"# oproute {command} config_sha256={cfg.digest()} seed={cfg.sim.seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _require_noiseless(cfg: ExperimentConfig, command: str):
    if cfg.noise_power > 0:
        raise ConfigError(f"{command}: the analytic approximation requires sigma2 = 0")


def _axis_list(cfg, name, default):
    spec = cfg.sweep.get(name)
    return axis_values(spec) if spec else [default]


def _grid(cfg, default_p=None, default_beta=None) -> GridSpec:
    base = GridSpec.default()
    p = cfg.sweep.get("p", default_p)
    b = cfg.sweep.get("beta", default_beta)
    try:
        return GridSpec(axis_from_spec(p) if p else base.p,
                        axis_from_spec(b) if b else base.beta,
                        cfg.sweep.get("refinement_rounds", base.refinement_rounds))
    except ValueError as exc:
        raise ConfigError(f"sweep grid: {exc}") from None


def _alphas(cfg):
    return cfg.sweep.get("alpha", [cfg.alpha])


def cmd_approx(cfg: ExperimentConfig, jobs: int = 1) -> Table:
    """Analytic chain on the (alpha, p, beta) sweep."""
    _require_noiseless(cfg, "approx")
    rows = []
    for alpha in _alphas(cfg):
        for p in _axis_list(cfg, "p", cfg.p):
            for beta in _axis_list(cfg, "beta", cfg.beta):
                try:
                    params = cfg.system_params(alpha=alpha, p=p, beta=beta)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from None
                bd = analytic.breakdown(params)
                rows.append([cfg.lam, alpha, p, beta, bd.g_alpha, bd.v0, bd.c, bd.max_relay,
                             bd.fraction, bd.d_sq, bd.f_sq, bd.k_sq])
    return Table(APPROX_COLUMNS, rows)


def cmd_simulate(cfg: ExperimentConfig, jobs: int = 1) -> Table:
    """Simulated progress, density and K on the (p, beta) sweep.

    In the interference-limited case a ``density_approx`` row carries the
    analytic progress density for comparison.
    """
    ps = _axis_list(cfg, "p", cfg.p)
    bs = _axis_list(cfg, "beta", cfg.beta)
    sigma2 = cfg.noise_power
    for p in ps:
        for b in bs:
            try:
                cfg.system_params(p=p, beta=b)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
    surf = simulate_surface(cfg.lam, cfg.alpha, ps, bs, [sigma2], cfg.sim.trials, cfg.sim.seed,
                            cfg.fading, cfg.sim.window_factor, cfg.sim.interferer_radius_factor,
                            jobs)
    rows = []
    for i, p in enumerate(ps):
        for j, b in enumerate(bs):
            common = [p, b, cfg.alpha, cfg.lam, sigma2]
            for metric in ("progress", "density", "krate"):
                rows.append(common + [metric, surf.mean(metric)[i, j, 0],
                                      surf.stderr(metric)[i, j, 0], cfg.sim.trials,
                                      surf.truncation[i], cfg.sim.seed])
            if sigma2 == 0:
                f = analytic.progress_density(cfg.system_params(p=p, beta=b))
                rows.append(common + ["density_approx", f, 0.0, 0, 0.0, cfg.sim.seed])
    return Table(SIMULATE_COLUMNS, rows)


def _objective(cfg, alpha, jobs, beta_window):
    kind = cfg.sweep.get("objective", "analytic")
    if kind == "analytic":
        _require_noiseless(cfg, "optimize (analytic objective)")
        return analytic_objective(alpha, cfg.lam)
    return SimulatedObjective(alpha, cfg.lam, cfg.noise_power, cfg.sim.trials, cfg.sim.seed,
                              cfg.fading, beta_window, cfg.sim.window_factor,
                              cfg.sim.interferer_radius_factor, jobs)


def _search_axis(cfg, name, default: Axis) -> Axis:
    spec = cfg.sweep.get(name)
    if not spec:
        return default
    try:
        return axis_from_spec(spec)
    except ValueError as exc:
        raise ConfigError(f"sweep.{name}: {exc}") from None


def cmd_optimize(cfg: ExperimentConfig, jobs: int = 1) -> Table:
    """Joint or conditional optima for each alpha in the sweep."""
    mode = cfg.sweep.get("mode", "joint")
    base = GridSpec.default()
    rounds = cfg.sweep.get("refinement_rounds", base.refinement_rounds)
    rows = []
    for alpha in _alphas(cfg):
        if mode == "joint":
            grid = _grid(cfg)
            obj = _objective(cfg, alpha, jobs, grid.beta.lo)
            results = [argmax_joint(obj, grid)]
        elif mode == "p_given_beta":
            # the beta sweep lists the fixed thresholds
            betas = _axis_list(cfg, "beta", cfg.beta)
            obj = _objective(cfg, alpha, jobs, min(betas))
            p_axis = _search_axis(cfg, "p", base.p)
            results = [argmax_p_given_beta(obj, b, p_axis, rounds) for b in betas]
        else:
            b_axis = _search_axis(cfg, "beta", base.beta)
            obj = _objective(cfg, alpha, jobs, b_axis.lo)
            results = [argmax_beta_given_p(obj, p, b_axis, rounds)
                       for p in _axis_list(cfg, "p", cfg.p)]
        tag_suffix = "" if mode == "joint" else f"/{mode}"
        for r in results:
            rows.append([alpha, r.objective + tag_suffix, r.p_star, r.beta_star,
                         r.spectral_efficiency_star, r.value, r.boundary])
            if r.boundary:
                log.warning("optimum on the search-box boundary: alpha=%s p=%s beta=%s",
                            alpha, r.p_star, r.beta_star)
    return Table(OPTIMIZE_COLUMNS, rows)


def cmd_contour(cfg: ExperimentConfig, jobs: int = 1) -> Table:
    """Normalized analytic K on the grid, with the near-optimal flag."""
    _require_noiseless(cfg, "contour")
    grid = _grid(cfg)
    threshold = cfg.sweep.get("threshold", 0.9)
    rows = []
    for alpha in _alphas(cfg):
        ps, bs, vals = evaluate_grid(analytic_objective(alpha, cfg.lam), grid)
        norm = analytic.normalize_surface(vals)
        for i, p in enumerate(ps):
            for j, b in enumerate(bs):
                rows.append([alpha, p, b, vals[i, j], norm[i, j], bool(norm[i, j] >= threshold)])
    return Table(CONTOUR_COLUMNS, rows)


def cmd_noise_sweep(cfg: ExperimentConfig, jobs: int = 1) -> Table:
    """Simulated joint optimum for each SNR_NN level, on one shared surface."""
    levels = cfg.sweep.get("snr_nn_db", DEFAULT_NOISE_DB)
    ps = axis_values(cfg.sweep.get("p", DEFAULT_NOISE_P))
    bs = axis_values(cfg.sweep.get("beta", DEFAULT_NOISE_BETA))
    snrs = [math.inf if math.isinf(db) else 10 ** (db / 10) for db in levels]
    sig = [0.0 if math.isinf(s) else snr_nn_to_sigma2(s, cfg.lam, cfg.alpha) for s in snrs]
    try:
        for p in ps:
            for b in (min(bs), max(bs)):
                cfg.system_params(p=p, beta=b, sigma2=0.0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    surf = simulate_surface(cfg.lam, cfg.alpha, ps, bs, sig, cfg.sim.trials, cfg.sim.seed,
                            cfg.fading, cfg.sim.window_factor, cfg.sim.interferer_radius_factor,
                            jobs)
    k = surf.mean("krate")
    rows = []
    for s, (snr, sigma2) in enumerate(zip(snrs, sig)):
        r = argmax_table(k[:, :, s], ps, bs)
        rows.append([snr, sigma2, r.value, r.p_star, r.beta_star])
    return Table(NOISE_COLUMNS, rows)


COMMANDS = {
    "approx": cmd_approx,
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "contour": cmd_contour,
    "noise-sweep": cmd_noise_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oproute", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=COMMANDS[name].__doc__.splitlines()[0])
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out", help="output CSV (default: config 'output', else stdout)")
        sp.add_argument("--seed", type=int, help="master seed, overrides the config")
        sp.add_argument("--trials", type=int, help="Monte Carlo trials per point")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = ExperimentConfig.load(args.config)
        sim = cfg.sim
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            sim = dataclasses.replace(sim, seed=args.seed)
        if args.trials is not None:
            if args.trials < 1:
                raise ConfigError("--trials must be >= 1")
            sim = dataclasses.replace(sim, trials=args.trials)
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        cfg.sim = sim
        table = COMMANDS[args.command](cfg, jobs=args.jobs)
        text = render_csv(table, args.command, cfg)
        out = args.out or cfg.output
        if out:
            with open(out, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime exit code
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
