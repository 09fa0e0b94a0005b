"""Closed-form SIR-cell approximation of the progress-rate-density.

The typical transmitter sits at the origin, other transmitters form a PPP of
intensity ``lam * p`` and receivers a PPP of intensity ``lam * (1 - p)``.  The
random SIR cell is replaced by a deterministic square of area ``v0`` (the
integral of the point-wise success probability) and the best forwarder is
the receiver in the forward half-square with the largest x-coordinate.

All functions are pure.  Grid-friendly variants accept numpy arrays for ``p``
and ``beta`` and broadcast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Below this, 1 - (1 - e^-c)/c cancels catastrophically; use the Taylor tail.
TAYLOR_CUTOFF = 1e-6


@dataclass(frozen=True)
class SystemParams:
    """Model tuple consumed by every formula.

    Attributes:
        lam: node density (m^-2).
        alpha: path-loss exponent, > 2.
        p: transmission probability, in (0, 1).
        beta: linear SIR decoding threshold, > 0.
        sigma2: noise power normalized to unit transmit power; 0 means
            interference-limited.
        fading: Rayleigh fading on (True) or unit marks (False).
    """

    lam: float = 1.0
    alpha: float = 3.0
    p: float = 0.06
    beta: float = 1.0
    sigma2: float = 0.0
    fading: bool = True

    def __post_init__(self):
        check_params(self.lam, self.alpha, self.p, self.beta, self.sigma2)

    @property
    def interference_limited(self) -> bool:
        return self.sigma2 == 0.0


def check_params(lam, alpha, p, beta, sigma2=0.0):
    """Raise ValueError naming the first violated model invariant."""
    if not (math.isfinite(lam) and lam > 0):
        raise ValueError(f"lambda must be > 0, got {lam}")
    if not (math.isfinite(alpha) and alpha > 2):
        raise ValueError(f"alpha must be > 2, got {alpha}")
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if not (beta > 0 and not math.isnan(beta)):
        raise ValueError(f"beta must be > 0, got {beta}")
    if not (sigma2 >= 0 and math.isfinite(sigma2)):
        raise ValueError(f"sigma2 must be >= 0, got {sigma2}")


@dataclass(frozen=True)
class ApproxBreakdown:
    """Intermediate values of the analytic chain for one parameter point."""

    g_alpha: float
    v0: float
    c: float
    max_relay: float
    fraction: float
    d_sq: float
    f_sq: float
    k_sq: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _require_noiseless(params: SystemParams):
    if params.sigma2 > 0:
        raise ValueError(
            "the SIR-cell closed form holds only for sigma2 = 0; "
            "use the simulator for the noisy regime"
        )


def interference_constant(alpha: float) -> float:
    """G(alpha) = alpha / (2 Gamma(2/alpha) Gamma(1 - 2/alpha)).

    >>> round(interference_constant(4.0), 7)
    0.6366198
    """
    alpha = float(alpha)
    if not alpha > 2:
        raise ValueError(f"alpha must be > 2 (Gamma pole at alpha = 2), got {alpha}")
    delta = 2.0 / alpha
    return alpha / (2.0 * math.gamma(delta) * math.gamma(1.0 - delta))


def progress_fraction(c):
    """Fraction of the maximum relay distance attained: 1 - (1 - e^-c)/c.

    Equal to (e^-c - (1 - c))/c.  Evaluated without cancellation for small c:
    the three-term Taylor tail below ``TAYLOR_CUTOFF``, the alternating
    power series on [TAYLOR_CUTOFF, 1), and the expm1 form above.
    """
    c = np.asarray(c, dtype=float)
    if np.any(c < 0) or np.any(np.isnan(c)):
        raise ValueError("c must be >= 0")
    out = np.empty_like(c)

    tiny = c < TAYLOR_CUTOFF
    ct = c[tiny]
    out[tiny] = ct / 2 - ct**2 / 6 + ct**3 / 24

    mid = (~tiny) & (c < 1.0)
    if np.any(mid):
        cm = c[mid]
        # sum_{k>=1} (-1)^(k+1) c^k / (k+1)!
        term = cm / 2.0
        total = term.copy()
        for k in range(2, 40):
            term = -term * cm / (k + 1)
            total += term
            if np.all(np.abs(term) < 1e-17 * total):
                break
        out[mid] = total

    big = c >= 1.0
    cb = c[big]
    out[big] = 1.0 + np.expm1(-cb) / cb
    return out[()] if out.ndim == 0 else out


def _chain(lam, alpha, p, beta):
    """Vectorized analytic chain; returns every ApproxBreakdown field."""
    g = interference_constant(alpha)
    p = np.asarray(p, dtype=float)
    beta = np.asarray(beta, dtype=float)
    v0 = g / (lam * p * beta ** (2.0 / alpha))
    c = lam * (1.0 - p) * v0 / 2.0
    max_relay = np.sqrt(v0) / 2.0
    fraction = progress_fraction(c)
    d_sq = max_relay * fraction
    f_sq = d_sq * lam * p
    k_sq = f_sq * np.log2(1.0 + beta)
    return g, v0, c, max_relay, fraction, d_sq, f_sq, k_sq


def krate_surface(p, beta, alpha: float, lam: float = 1.0):
    """Approximate progress-rate-density on broadcast (p, beta) arrays."""
    return _chain(lam, alpha, p, beta)[-1]


def breakdown(params: SystemParams) -> ApproxBreakdown:
    """Evaluate the whole analytic chain at one point."""
    _require_noiseless(params)
    vals = _chain(params.lam, params.alpha, params.p, params.beta)
    return ApproxBreakdown(*(float(v) for v in vals))


def success_probability(y, params: SystemParams):
    """Probability that a receiver at distance ``y`` decodes TX0 (Rayleigh)."""
    _require_noiseless(params)
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("distance must be >= 0")
    g = interference_constant(params.alpha)
    expo = math.pi * params.lam * params.p * params.beta ** (2.0 / params.alpha) / g
    out = np.exp(-expo * y**2)
    return float(out) if out.ndim == 0 else out


def mean_cell_area(params: SystemParams) -> float:
    """Mean SIR-cell area v0 = G(alpha) / (lam p beta^(2/alpha))."""
    _require_noiseless(params)
    return breakdown(params).v0


def expected_forwarders(params: SystemParams) -> float:
    """Expected receiver count c in the forward half-square."""
    return breakdown(params).c


def expected_progress(params: SystemParams) -> float:
    """Expected forward progress d_sq under the square-cell approximation."""
    return breakdown(params).d_sq


def progress_density(params: SystemParams) -> float:
    return breakdown(params).f_sq


def progress_rate_density(params: SystemParams) -> float:
    """Approximate K(p, beta) = d_sq * lam * p * log2(1 + beta)."""
    return breakdown(params).k_sq


def progress_rate_density_expanded(params: SystemParams) -> float:
    """Single-expression form 1/2 log2(1+b) sqrt(lam p G b^(-2/a)) frac(c)."""
    _require_noiseless(params)
    lam, alpha, p, beta = params.lam, params.alpha, params.p, params.beta
    g = interference_constant(alpha)
    c = (1 - p) / p * g / (2 * beta ** (2 / alpha))
    return float(
        0.5 * math.log2(1 + beta) * math.sqrt(lam * p * g * beta ** (-2 / alpha))
        * progress_fraction(c)
    )


def spectral_efficiency(beta):
    """Rate log2(1 + beta) in bps/Hz for a linear threshold."""
    b = np.asarray(beta, dtype=float)
    if np.any(b < 0) or np.any(np.isnan(b)):
        raise ValueError(f"beta must be >= 0, got {beta}")
    out = np.log2(1.0 + b)
    return float(out) if out.ndim == 0 else out


def end_to_end_rate_bound(params: SystemParams, L: float, d: float) -> float:
    """Per-node end-to-end rate p * d * log2(1 + beta) / L in bps/Hz."""
    if not L > 0:
        raise ValueError(f"route length L must be > 0, got {L}")
    if d < 0:
        raise ValueError(f"progress d must be >= 0, got {d}")
    return params.p * d * spectral_efficiency(params.beta) / L


def normalize_surface(values):
    """Divide a non-negative grid by its maximum."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("empty grid")
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("grid values must be non-negative")
    top = arr.max()
    if top <= 0:
        raise ValueError("grid maximum must be positive")
    return arr / top
