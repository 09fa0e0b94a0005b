"""Monte Carlo estimates of forward progress, progress density and K.

Trial ``i`` of a run with master seed ``s`` always uses the realization seed
``trial_seed(s, i)``, and per-trial values are reduced in trial order with
exact (fsum) summation, so results do not depend on how trials are split
across worker processes.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .analytic import SystemParams, check_params
from .channel import DegenerateGeometryError, _interference, _path_gain, best_progress_table
from .point_process import (
    DESIRED_ID,
    PROBE_ID,
    NetworkRealization,
    SimGeometry,
    _pair_mark,
    default_geometry,
    realization_from_parent,
    sample_parent,
    trial_seed,
)

DEFAULT_TRIALS = 20_000


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    n_trials: int
    truncation_bias_bound: float
    seed: int

    def scaled(self, factor: float) -> "Estimate":
        return Estimate(self.mean * factor, self.std_error * abs(factor), self.n_trials,
                        self.truncation_bias_bound, self.seed)


@dataclass(frozen=True)
class NoiseSpec:
    """Noise level expressed both as SNR at the mean nearest-neighbour distance
    and as the equivalent noise power."""

    snr_nn: float
    sigma2: float

    @classmethod
    def from_snr_nn(cls, snr_nn, lam, alpha):
        return cls(snr_nn, snr_nn_to_sigma2(snr_nn, lam, alpha))

    @classmethod
    def from_snr_nn_db(cls, snr_db, lam, alpha):
        return cls.from_snr_nn(10.0 ** (snr_db / 10.0), lam, alpha)


def snr_nn_to_sigma2(snr_nn: float, lam: float, alpha: float) -> float:
    """sigma2 = (lam pi)^(alpha/2) / SNR_NN; infinite SNR maps to 0."""
    if not snr_nn > 0:
        raise ValueError(f"SNR_NN must be > 0, got {snr_nn}")
    return (lam * math.pi) ** (alpha / 2.0) / snr_nn


def sigma2_to_snr_nn(sigma2: float, lam: float, alpha: float) -> float:
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be > 0, got {sigma2}")
    return (lam * math.pi) ** (alpha / 2.0) / sigma2


def tail_interference(params: SystemParams, radius: float) -> float:
    """Mean interference from transmitters beyond ``radius``."""
    a = params.alpha
    return 2.0 * math.pi * params.lam * params.p * radius ** (2.0 - a) / (a - 2.0)


def truncation_bias_bound(params: SystemParams, geom: SimGeometry) -> float:
    """Out-of-disc mean interference relative to the in-disc mean.

    The in-disc mean diverges at the origin, so it is counted from the radius
    holding one interferer on average, 1/sqrt(pi lam p), out to R_I.
    """
    a = params.alpha
    r_in = 1.0 / math.sqrt(math.pi * params.lam * params.p)
    r_out = geom.interferer_radius
    if r_out <= r_in:
        return math.inf
    return r_out ** (2.0 - a) / (r_in ** (2.0 - a) - r_out ** (2.0 - a))


def decode_bias_bound(y: float, params: SystemParams, geom: SimGeometry) -> float:
    """Upper bound on the decode-probability excess caused by truncation.

    With a Rayleigh desired link, dropping tail interference I_t raises the
    success probability by at most 1 - E[exp(-beta y^alpha I_t)]
    <= beta y^alpha E[I_t].
    """
    return min(1.0, params.beta * y**params.alpha * tail_interference(params, geom.interferer_radius))


def forward_progress(realization: NetworkRealization, params: SystemParams) -> float:
    """Largest x among decoding receivers, floored at 0 (hold, don't go back)."""
    if len(realization.receivers) == 0:
        return 0.0
    try:
        table = best_progress_table(
            realization.receivers, realization.receiver_ids, realization.desired_fading,
            realization.interferers, realization.interferer_ids, realization.key,
            0.5 * params.alpha, realization.fading,
            np.array([float(params.beta)]), np.array([float(params.sigma2)]),
        )
    except ValueError as exc:
        raise DegenerateGeometryError(str(exc)) from None
    return float(table[0, 0])


# -- trial engine ----------------------------------------------------------

def _progress_block(seeds, lam, alpha, fading, p_values, geoms, betas, sigma2s):
    """Progress tables for a block of trial seeds: shape (n, np, nb, ns)."""
    radius = max(g.interferer_radius for g in geoms)
    betas = np.asarray(betas, dtype=float)
    sigma2s = np.asarray(sigma2s, dtype=float)
    pars = [SystemParams(lam, alpha, p, float(betas.max()), 0.0, fading) for p in p_values]
    out = np.zeros((len(seeds), len(p_values), len(betas), len(sigma2s)))
    for t, seed in enumerate(seeds):
        parent = sample_parent(lam, radius, seed)
        for i, (par, geom) in enumerate(zip(pars, geoms)):
            r = realization_from_parent(parent, par, geom)
            if len(r.receivers):
                out[t, i] = best_progress_table(
                    r.receivers, r.receiver_ids, r.desired_fading, r.interferers,
                    r.interferer_ids, r.key, 0.5 * alpha, fading, betas, sigma2s)
    return out


def _decode_block(seeds, params, geom, y):
    out = np.zeros(len(seeds))
    half_alpha = 0.5 * params.alpha
    signal_gain = _path_gain(y * y, half_alpha)
    for t, seed in enumerate(seeds):
        parent = sample_parent(params.lam, geom.interferer_radius, seed)
        r = realization_from_parent(parent, params, geom)
        itf = _interference(y, 0.0, PROBE_ID, r.interferers, r.interferer_ids, r.key,
                            half_alpha, params.fading, np.inf)
        h0 = _pair_mark(r.key, DESIRED_ID, PROBE_ID) if params.fading else 1.0
        denom = itf + params.sigma2
        sir = math.inf if denom == 0.0 else h0 * signal_gain / denom
        out[t] = sir >= params.beta
    return out


def run_trials(block_fn, n_trials: int, seed: int, jobs: int = 1, chunk: int = 250):
    """Evaluate ``block_fn(seeds)`` over all trials; stacked in trial order."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    seeds = [trial_seed(seed, i) for i in range(n_trials)]
    blocks = [seeds[i:i + chunk] for i in range(0, n_trials, chunk)]
    if jobs <= 1 or len(blocks) == 1:
        parts = [block_fn(b) for b in blocks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(block_fn, blocks))
    return np.concatenate(parts, axis=0)


def mean_and_stderr(values):
    """Exact-sum mean and standard error along axis 0."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    flat = values.reshape(n, -1)
    means = np.empty(flat.shape[1])
    errs = np.empty(flat.shape[1])
    for c in range(flat.shape[1]):
        col = flat[:, c].tolist()
        m = math.fsum(col) / n
        means[c] = m
        if n > 1:
            ss = math.fsum((v - m) ** 2 for v in col)
            errs[c] = math.sqrt(ss / (n - 1) / n)
        else:
            errs[c] = 0.0
    shape = values.shape[1:]
    return means.reshape(shape), errs.reshape(shape)


def estimate_progress(params: SystemParams, geom: SimGeometry | None = None,
                      n_trials: int = DEFAULT_TRIALS, seed: int = 0, jobs: int = 1) -> Estimate:
    """Monte Carlo estimate of the expected forward progress d(p, beta)."""
    geom = geom or default_geometry(params)
    fn = partial(_progress_block, lam=params.lam, alpha=params.alpha, fading=params.fading,
                 p_values=[params.p], geoms=[geom], betas=[params.beta],
                 sigma2s=[params.sigma2])
    vals = run_trials(fn, n_trials, seed, jobs)[:, 0, 0, 0]
    m, e = mean_and_stderr(vals)
    return Estimate(float(m), float(e), n_trials, truncation_bias_bound(params, geom), seed)


def estimate_density(params: SystemParams, geom: SimGeometry | None = None,
                     n_trials: int = DEFAULT_TRIALS, seed: int = 0, jobs: int = 1) -> Estimate:
    """f(p, beta) = d(p, beta) * lam * p."""
    return estimate_progress(params, geom, n_trials, seed, jobs).scaled(params.lam * params.p)


def estimate_krate(params: SystemParams, geom: SimGeometry | None = None,
                   n_trials: int = DEFAULT_TRIALS, seed: int = 0, jobs: int = 1) -> Estimate:
    """K(p, beta) = f(p, beta) * log2(1 + beta)."""
    f = estimate_density(params, geom, n_trials, seed, jobs)
    return f.scaled(math.log2(1.0 + params.beta))


def estimate_decode_probability(params: SystemParams, y: float,
                                geom: SimGeometry | None = None,
                                n_trials: int = 10_000, seed: int = 0,
                                jobs: int = 1) -> Estimate:
    """Empirical P(SINR >= beta) for a probe receiver at (y, 0).

    The bias bound reported is ``decode_bias_bound`` (a probability).
    """
    if not y > 0:
        raise DegenerateGeometryError("probe must not sit on the transmitter")
    geom = geom or default_geometry(params)
    fn = partial(_decode_block, params=params, geom=geom, y=float(y))
    vals = run_trials(fn, n_trials, seed, jobs)
    m, e = mean_and_stderr(vals)
    return Estimate(float(m), float(e), n_trials, decode_bias_bound(y, params, geom), seed)


@dataclass
class Surface:
    """Simulated progress on a (p, beta, sigma2) grid with shared trial seeds."""

    lam: float
    alpha: float
    p_values: np.ndarray
    beta_values: np.ndarray
    sigma2_values: np.ndarray
    progress: np.ndarray
    progress_stderr: np.ndarray
    n_trials: int
    seed: int
    geometries: list = field(repr=False, default_factory=list)
    truncation: np.ndarray = field(repr=False, default=None)

    def _factor(self, metric):
        p = self.p_values[:, None, None]
        rate = np.log2(1.0 + self.beta_values)[None, :, None]
        if metric == "progress":
            return np.ones_like(p * rate)
        if metric == "density":
            return self.lam * p * np.ones_like(rate)
        if metric == "krate":
            return self.lam * p * rate
        raise ValueError(f"unknown metric {metric!r}")

    def mean(self, metric="krate"):
        return self.progress * self._factor(metric)

    def stderr(self, metric="krate"):
        return self.progress_stderr * self._factor(metric)


def surface_geometries(lam, alpha, p_values, beta_min, window_factor=4.0, radius_factor=12.0):
    """One geometry per p, sized for the smallest threshold on the grid."""
    return [default_geometry(SystemParams(lam, alpha, p, beta_min), window_factor, radius_factor)
            for p in p_values]


def simulate_surface(lam: float, alpha: float, p_values, beta_values, sigma2_values=(0.0,),
                     n_trials: int = 5000, seed: int = 0, fading: bool = True,
                     window_factor: float = 4.0, radius_factor: float = 12.0,
                     jobs: int = 1, beta_window: float | None = None) -> Surface:
    """Progress estimates for every (p, beta, sigma2) from one set of trials.

    Each trial samples a single parent process; every p value thins it, so
    all cells see common random numbers.  Receiver windows are sized for
    ``beta_window`` (default: the smallest beta on the grid).
    """
    p_values = np.asarray(p_values, dtype=float)
    beta_values = np.asarray(beta_values, dtype=float)
    sigma2_values = np.asarray(sigma2_values, dtype=float)
    for p in p_values:
        for b in (beta_values.min(), beta_values.max()):
            check_params(lam, alpha, p, b, float(sigma2_values.min()))
    if beta_window is None:
        beta_window = float(beta_values.min())
    elif beta_window > beta_values.min():
        raise ValueError("beta_window must not exceed the smallest beta")
    geoms = surface_geometries(lam, alpha, p_values, beta_window, window_factor, radius_factor)
    fn = partial(_progress_block, lam=lam, alpha=alpha, fading=fading, p_values=list(p_values),
                 geoms=geoms, betas=beta_values, sigma2s=sigma2_values)
    vals = run_trials(fn, n_trials, seed, jobs)
    m, e = mean_and_stderr(vals)
    trunc = np.array([truncation_bias_bound(SystemParams(lam, alpha, p, 1.0), g)
                      for p, g in zip(p_values, geoms)])
    return Surface(lam, alpha, p_values, beta_values, sigma2_values, m, e, n_trials, seed,
                   geoms, trunc)

