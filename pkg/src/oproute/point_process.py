"""Sampling of network realizations seen by the typical transmitter.

A realization is built from one parent PPP of intensity ``lam`` on a disc of
radius ``interferer_radius``.  The parent is generated in order of increasing
distance from the origin, and each parent point carries a uniform mark that
makes it a transmitter (mark < p) or a receiver.  Thinning yields independent
PPPs of intensity ``lam * p`` and ``lam * (1 - p)``.  Because the k-th parent
point only depends on the k-th block of the random stream, realizations for
different radii or different ``p`` are nested, which couples grid cells that
share a seed.

Fading marks are never stored per pair.  The mark between parent nodes k and
j is a pure function of ``(key, k, j)`` (a splitmix64 hash turned into an
Exp(1) variate), so it does not depend on evaluation order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numba
import numpy as np

from .analytic import SystemParams, interference_constant

# Parent-process draws are made in fixed-size blocks so that point k is
# identical whatever the requested radius.
BLOCK = 4096

# Reserved ids: the desired-link mark of receiver j is keyed (DESIRED_ID, j);
# a probe receiver that is not part of the receiver process uses PROBE_ID.
DESIRED_ID = np.uint64(1 << 63)
PROBE_ID = np.uint64((1 << 63) - 1)

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


class Point2D(NamedTuple):
    x: float
    y: float


@numba.njit(cache=True)
def _mix64(z):
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True)
def _pair_mark(key, k, j):
    h = _mix64(_mix64(key ^ _mix64(k)) ^ j)
    u = (np.float64(h >> np.uint64(11)) + 0.5) * (1.0 / 9007199254740992.0)
    return -math.log(u)


@numba.njit(cache=True)
def _pair_marks(key, ks, js):
    out = np.empty(ks.shape[0])
    for i in range(ks.shape[0]):
        out[i] = _pair_mark(key, ks[i], js[i])
    return out


def pair_marks(key, ks, js) -> np.ndarray:
    """Exp(1) fading marks for parent-id pairs ``(ks[i], js[i])``."""
    ks = np.ascontiguousarray(np.atleast_1d(ks), dtype=np.uint64)
    js = np.ascontiguousarray(np.atleast_1d(js), dtype=np.uint64)
    ks, js = np.broadcast_arrays(ks, js)
    return _pair_marks(np.uint64(key), np.ascontiguousarray(ks), np.ascontiguousarray(js))


@dataclass(frozen=True)
class Disc:
    radius: float

    @property
    def area(self) -> float:
        return math.pi * self.radius**2


@dataclass(frozen=True)
class Square:
    """Axis-aligned square [-halfwidth, halfwidth]^2."""

    halfwidth: float

    @property
    def area(self) -> float:
        return 4.0 * self.halfwidth**2


@dataclass(frozen=True)
class SimGeometry:
    """Receiver window half-width W and interferer disc radius R_I (meters)."""

    rx_window_halfwidth: float
    interferer_radius: float

    def __post_init__(self):
        if not self.rx_window_halfwidth > 0:
            raise ValueError("receiver window half-width must be > 0")
        if self.interferer_radius < self.rx_window_halfwidth * math.sqrt(2) * (1 - 1e-12):
            raise ValueError("interferer disc must cover the receiver window (R_I >= W*sqrt(2))")


def default_geometry(params: SystemParams, window_factor: float = 4.0,
                     radius_factor: float = 12.0) -> SimGeometry:
    """W = window_factor * sqrt(v0), R_I = max(2W, radius_factor / sqrt(lam p)).

    v0 is the noiseless mean cell area; noise only shrinks the cell.
    """
    g = interference_constant(params.alpha)
    v0 = g / (params.lam * params.p * params.beta ** (2.0 / params.alpha))
    w = window_factor * math.sqrt(v0)
    r_i = max(2.0 * w, radius_factor / math.sqrt(params.lam * params.p))
    return SimGeometry(w, r_i)


def _radial_parent(rng: np.random.Generator, intensity: float, radius: float):
    """Parent PPP on a disc in order of increasing radius.

    Returns (r2, theta, thinning_marks).  Squared radii are partial sums of
    Exp(1)/(intensity*pi); each block draws exponentials, angles and thinning
    uniforms for BLOCK points.
    """
    r2_max = radius * radius
    scale = 1.0 / (intensity * math.pi)
    r2_blocks, th_blocks, u_blocks = [], [], []
    last = 0.0
    while True:
        e = rng.standard_exponential(BLOCK)
        theta = rng.random(BLOCK)
        u = rng.random(BLOCK)
        r2 = last + np.cumsum(e) * scale
        n_in = int(np.searchsorted(r2, r2_max, side="right"))
        r2_blocks.append(r2[:n_in])
        th_blocks.append(theta[:n_in])
        u_blocks.append(u[:n_in])
        if n_in < BLOCK:
            break
        last = r2[-1]
    theta = np.concatenate(th_blocks)
    theta *= 2.0 * math.pi
    return np.concatenate(r2_blocks), theta, np.concatenate(u_blocks)


def _to_xy(r2, theta):
    r = np.sqrt(r2)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def sample_ppp(intensity: float, region, rng: np.random.Generator) -> np.ndarray:
    """Homogeneous PPP on a Disc or Square; returns an (n, 2) array."""
    if intensity < 0 or math.isnan(intensity):
        raise ValueError(f"intensity must be >= 0, got {intensity}")
    if intensity == 0:
        return np.empty((0, 2))
    if isinstance(region, Disc):
        r2, theta, _ = _radial_parent(rng, intensity, region.radius)
        return _to_xy(r2, theta)
    if isinstance(region, Square):
        n = rng.poisson(intensity * region.area)
        w = region.halfwidth
        return rng.uniform(-w, w, size=(n, 2))
    raise TypeError(f"unsupported region {region!r}")


@dataclass
class NetworkRealization:
    """One slot as seen from TX0 at the origin.

    ``interferer_ids``/``receiver_ids`` are parent-process indices; they key
    the fading hash so marks are stable under any reordering or subsetting.
    """

    interferers: np.ndarray
    receivers: np.ndarray
    interferer_ids: np.ndarray
    receiver_ids: np.ndarray
    desired_fading: np.ndarray
    key: np.uint64
    fading: bool = True
    seed: int = 0
    geometry: SimGeometry | None = field(default=None, repr=False)

    def interferer_fading(self, k, j) -> np.ndarray:
        """Marks |h_kj|^2 for interferer positions ``k`` and receiver positions ``j``."""
        k = np.atleast_1d(k)
        j = np.atleast_1d(j)
        if not self.fading:
            return np.ones(np.broadcast(k, j).shape)
        return pair_marks(self.key, self.interferer_ids[k], self.receiver_ids[j])

    def to_csv(self, path):
        """Dump ``kind,x,y`` rows (TX0 first) for inspection."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "x", "y"])
            w.writerow(["tx", 0.0, 0.0])
            for x, y in self.interferers:
                w.writerow(["tx", repr(float(x)), repr(float(y))])
            for x, y in self.receivers:
                w.writerow(["rx", repr(float(x)), repr(float(y))])


def realization_key(seed: int) -> np.uint64:
    return np.random.SeedSequence(seed).generate_state(1, np.uint64)[0]


def trial_seed(master_seed: int, trial: int) -> int:
    """Independent 64-bit seed for trial ``trial`` of a run."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(trial,))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class ParentSample:
    """Radially ordered parent PPP of intensity ``lam`` on a disc."""

    r2: np.ndarray
    theta: np.ndarray
    u: np.ndarray
    seed: int
    radius: float
    _xy: np.ndarray | None = field(default=None, repr=False)

    @property
    def xy(self) -> np.ndarray:
        if self._xy is None:
            self._xy = _to_xy(self.r2, self.theta)
        return self._xy


def sample_parent(lam: float, radius: float, seed: int) -> ParentSample:
    rng = np.random.Generator(np.random.PCG64(seed))
    return ParentSample(*_radial_parent(rng, lam, radius), seed=seed, radius=radius)


def realization_from_parent(parent: ParentSample, params: SystemParams,
                            geom: SimGeometry) -> NetworkRealization:
    """Thin a parent sample into interferers and windowed receivers.

    The parent must extend at least to ``geom.interferer_radius``; points
    beyond it are dropped, so the result equals a direct sample at that radius.
    """
    if parent.radius < geom.interferer_radius:
        raise ValueError("parent sample does not cover the interferer disc")
    n = int(np.searchsorted(parent.r2, geom.interferer_radius**2, side="right"))
    u = parent.u[:n]
    tx = u < params.p
    w = geom.rx_window_halfwidth
    rx = ~tx
    rx[parent.r2[:n] > 2.0 * w * w] = False
    cand = np.flatnonzero(tx | rx)
    if parent._xy is not None:
        pts = parent._xy[cand]
    else:
        pts = _to_xy(parent.r2[cand], parent.theta[cand])
    is_tx = tx[cand]
    rx_pts = pts[~is_tx]
    inside = (np.abs(rx_pts[:, 0]) <= w) & (np.abs(rx_pts[:, 1]) <= w)
    rx_pts = rx_pts[inside]
    rx_ids = cand[~is_tx][inside].astype(np.uint64)
    key = realization_key(parent.seed)
    if params.fading:
        h0 = pair_marks(key, DESIRED_ID, rx_ids) if len(rx_ids) else np.empty(0)
    else:
        h0 = np.ones(len(rx_ids))
    return NetworkRealization(
        interferers=np.ascontiguousarray(pts[is_tx]), receivers=np.ascontiguousarray(rx_pts),
        interferer_ids=cand[is_tx].astype(np.uint64), receiver_ids=rx_ids,
        desired_fading=h0, key=key, fading=params.fading, seed=parent.seed, geometry=geom,
    )


def sample_realization(params: SystemParams, geom: SimGeometry | None = None,
                       seed: int = 0) -> NetworkRealization:
    """Sample interferers in the disc and receivers in the window."""
    geom = geom or default_geometry(params)
    parent = sample_parent(params.lam, geom.interferer_radius, seed)
    return realization_from_parent(parent, params, geom)
