"""Grid-plus-refinement maximization of K over (p, beta).

An objective is any callable ``f(p, beta)`` that broadcasts numpy arrays and
returns values of the broadcast shape.  Each refinement round shrinks the
search window by a factor of 3 around the incumbent (clipped to the original
box) and re-grids with the same number of points.  Ties go to the smaller p,
then the smaller beta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import krate_surface, normalize_surface
from .simulate import simulate_surface

SHRINK = 3.0


@dataclass(frozen=True)
class Axis:
    """Sampling of one parameter: ``count`` points from ``lo`` to ``hi``."""

    lo: float
    hi: float
    count: int
    log: bool = False

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("axis needs at least one point")
        if self.hi < self.lo or (self.count > 1 and self.hi == self.lo):
            raise ValueError(f"axis bounds must satisfy lo < hi, got {self.lo}, {self.hi}")
        if self.log and self.lo <= 0:
            raise ValueError("log axis needs lo > 0")

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([float(self.lo)])
        if self.log:
            return np.geomspace(self.lo, self.hi, self.count)
        return np.linspace(self.lo, self.hi, self.count)

    def zoom(self, center: float, within: "Axis") -> "Axis":
        """Window of 1/SHRINK the width centred on ``center``, kept inside ``within``."""
        if self.count == 1:
            return self
        fwd, inv = (math.log, math.exp) if self.log else (float, float)
        half = (fwd(self.hi) - fwd(self.lo)) / SHRINK / 2.0
        lo_b, hi_b = fwd(within.lo), fwd(within.hi)
        lo = max(fwd(center) - half, lo_b)
        hi = min(fwd(center) + half, hi_b)
        # keep the full shrunk width when clipped on one side
        if lo == lo_b:
            hi = min(lo + 2 * half, hi_b)
        elif hi == hi_b:
            lo = max(hi - 2 * half, lo_b)
        lo_v, hi_v = inv(lo), inv(hi)
        # exp(log(x)) may drift off the original bounds by an ulp
        lo_v = min(max(lo_v, within.lo), within.hi)
        hi_v = min(max(hi_v, within.lo), within.hi)
        if not hi_v > lo_v:
            return Axis(lo_v, lo_v, 1, self.log)
        return Axis(lo_v, hi_v, self.count, self.log)

    def on_edge(self, x: float) -> bool:
        if self.count == 1:
            return False
        tol = 1e-9 * (self.hi - self.lo)
        return abs(x - self.lo) <= tol or abs(x - self.hi) <= tol


@dataclass(frozen=True)
class GridSpec:
    p: Axis
    beta: Axis
    refinement_rounds: int = 3

    def __post_init__(self):
        if not 0 < self.p.lo < self.p.hi < 1:
            raise ValueError("p range must satisfy 0 < p_min < p_max < 1")
        if not 0 < self.beta.lo < self.beta.hi:
            raise ValueError("beta range must satisfy 0 < beta_min < beta_max")
        if self.p.count < 3 or self.beta.count < 3:
            raise ValueError("grid axes need at least 3 points")
        if self.refinement_rounds < 0:
            raise ValueError("refinement_rounds must be >= 0")

    @classmethod
    def default(cls, p_count=60, beta_count=60, rounds=3):
        return cls(Axis(0.005, 0.5, p_count), Axis(0.1, 30.0, beta_count, log=True), rounds)


@dataclass
class OptResult:
    p_star: float
    beta_star: float
    value: float
    spectral_efficiency_star: float
    objective: str
    boundary: bool
    trace: list = field(default_factory=list, repr=False)


def analytic_objective(alpha: float, lam: float = 1.0):
    """K approximation as a broadcasting objective."""
    def objective(p, beta):
        return krate_surface(p, beta, alpha, lam)
    objective.tag = "analytic"
    return objective


class SimulatedObjective:
    """Monte Carlo K with common random numbers across every call.

    The receiver window for each p is sized for ``beta_window`` so that a
    cell's value depends only on (p, beta) and the seed, not on which other
    cells are evaluated alongside it.
    """

    tag = "simulated"

    def __init__(self, alpha, lam=1.0, sigma2=0.0, n_trials=5000, seed=0, fading=True,
                 beta_window=0.1, window_factor=4.0, radius_factor=12.0, jobs=1):
        self.alpha, self.lam, self.sigma2 = alpha, lam, sigma2
        self.n_trials, self.seed, self.fading = n_trials, seed, fading
        self.beta_window = beta_window
        self.window_factor, self.radius_factor, self.jobs = window_factor, radius_factor, jobs

    def __call__(self, p, beta):
        p, beta = np.broadcast_arrays(np.asarray(p, dtype=float), np.asarray(beta, dtype=float))
        ps, pi = np.unique(p, return_inverse=True)
        bs, bi = np.unique(beta, return_inverse=True)
        if bs.min() < self.beta_window:
            raise ValueError("beta below the window-sizing threshold beta_window")
        surf = simulate_surface(
            self.lam, self.alpha, ps, bs, [self.sigma2], self.n_trials, self.seed,
            self.fading, self.window_factor, self.radius_factor, self.jobs,
            beta_window=self.beta_window)
        table = surf.mean("krate")[:, :, 0]
        return table[pi.reshape(p.shape), bi.reshape(p.shape)]


def _tag(objective) -> str:
    return getattr(objective, "tag", "custom")


def best_cell(values, p_values, beta_values):
    """(i, j) of the maximum of a (len(p), len(beta)) table; first wins ties."""
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("objective must be finite on the grid")
    return np.unravel_index(int(np.argmax(values)), values.shape)


def _better(cand, inc) -> bool:
    # candidates are (value, p, beta); larger value, then smaller p, smaller beta
    if inc is None:
        return True
    return (-cand[0], cand[1], cand[2]) < (-inc[0], inc[1], inc[2])


def _search(objective, p_axis: Axis, b_axis: Axis, rounds: int):
    box_p, box_b = p_axis, b_axis
    inc = None
    trace = []
    for rnd in range(rounds + 1):
        ps, bs = p_axis.values(), b_axis.values()
        vals = np.broadcast_to(objective(ps[:, None], bs[None, :]), (len(ps), len(bs)))
        i, j = best_cell(vals, ps, bs)
        cand = (float(vals[i, j]), float(ps[i]), float(bs[j]))
        if _better(cand, inc):
            inc = cand
        trace.append({"round": rnd, "p_lo": p_axis.lo, "p_hi": p_axis.hi,
                      "beta_lo": b_axis.lo, "beta_hi": b_axis.hi,
                      "p_star": inc[1], "beta_star": inc[2], "value": inc[0]})
        p_axis = p_axis.zoom(inc[1], box_p)
        b_axis = b_axis.zoom(inc[2], box_b)
    _, p_star, b_star = inc
    value = float(objective(p_star, b_star))
    boundary = box_p.on_edge(p_star) or box_b.on_edge(b_star)
    return OptResult(p_star, b_star, value, math.log2(1.0 + b_star), _tag(objective),
                     boundary, trace)


def argmax_joint(objective, grid: GridSpec | None = None) -> OptResult:
    """Joint maximizer (p*, beta*) of ``objective`` over the grid box."""
    grid = grid or GridSpec.default()
    return _search(objective, grid.p, grid.beta, grid.refinement_rounds)


def argmax_p_given_beta(objective, beta: float, p_axis: Axis, rounds: int = 3) -> OptResult:
    return _search(objective, p_axis, Axis(beta, beta, 1), rounds)


def argmax_beta_given_p(objective, p: float, beta_axis: Axis, rounds: int = 3) -> OptResult:
    return _search(objective, Axis(p, p, 1), beta_axis, rounds)


def argmax_table(values, p_values, beta_values, tag="simulated") -> OptResult:
    """Optimum of a precomputed (p, beta) table; no refinement."""
    p_values = np.asarray(p_values, dtype=float)
    beta_values = np.asarray(beta_values, dtype=float)
    i, j = best_cell(values, p_values, beta_values)
    boundary = i in (0, len(p_values) - 1) or j in (0, len(beta_values) - 1)
    b = float(beta_values[j])
    return OptResult(float(p_values[i]), b, float(values[i][j]), math.log2(1.0 + b), tag,
                     bool(boundary))


@dataclass(frozen=True)
class RegionCell:
    p: float
    beta: float
    value: float
    normalized: float


def evaluate_grid(objective, grid: GridSpec):
    ps, bs = grid.p.values(), grid.beta.values()
    vals = np.broadcast_to(objective(ps[:, None], bs[None, :]), (len(ps), len(bs)))
    return ps, bs, np.array(vals, dtype=float)


def near_optimal_region(objective, grid: GridSpec, threshold: float = 0.9) -> list[RegionCell]:
    """Initial-grid cells whose normalized objective is >= ``threshold``."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    ps, bs, vals = evaluate_grid(objective, grid)
    norm = normalize_surface(vals)
    cells = []
    for i, p in enumerate(ps):
        for j, b in enumerate(bs):
            if norm[i, j] >= threshold:
                cells.append(RegionCell(float(p), float(b), float(vals[i, j]), float(norm[i, j])))
    return cells
