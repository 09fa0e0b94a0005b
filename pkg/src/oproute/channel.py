"""SIR / SINR from TX0 (origin) to receivers of a realization."""

from __future__ import annotations

import math
from typing import NamedTuple

import numba
import numpy as np

from .analytic import SystemParams
from .point_process import DESIRED_ID, PROBE_ID, NetworkRealization, _pair_mark

# Interference terms below this are flushed to zero.
FLUSH = 1e-300


class DegenerateGeometryError(ValueError):
    """A receiver coincides with TX0 or with an interferer."""


class LinkMetric(NamedTuple):
    receiver_index: int
    sir: float
    decoded: bool


@numba.njit(cache=True)
def _path_gain(dsq, half_alpha):
    g = dsq ** (-half_alpha)
    return g if g >= FLUSH else 0.0


@numba.njit(cache=True)
def _interference(px, py, rx_id, itf_xy, itf_ids, key, half_alpha, fading, cap):
    """Sum of faded interference at (px, py), stopping once it exceeds ``cap``.

    Returns (-1.0) on a coincident interferer.
    """
    total = 0.0
    for k in range(itf_xy.shape[0]):
        dx = itf_xy[k, 0] - px
        dy = itf_xy[k, 1] - py
        dsq = dx * dx + dy * dy
        if dsq == 0.0:
            return -1.0
        g = _path_gain(dsq, half_alpha)
        if fading:
            g *= _pair_mark(key, itf_ids[k], rx_id)
        total += g
        if total > cap:
            break
    return total


@numba.njit(cache=True)
def _all_sir(rx_xy, rx_ids, h0, itf_xy, itf_ids, key, half_alpha, fading, sigma2):
    n = rx_xy.shape[0]
    out = np.empty(n)
    for j in range(n):
        x = rx_xy[j, 0]
        y = rx_xy[j, 1]
        d0 = x * x + y * y
        if d0 == 0.0:
            raise ValueError("receiver at the transmitter location")
        itf = _interference(x, y, rx_ids[j], itf_xy, itf_ids, key, half_alpha, fading, np.inf)
        if itf < 0.0:
            raise ValueError("receiver coincides with an interferer")
        denom = itf + sigma2
        signal = h0[j] * _path_gain(d0, half_alpha)
        out[j] = np.inf if denom == 0.0 else signal / denom
    return out


@numba.njit(cache=True)
def best_progress_table(rx_xy, rx_ids, h0, itf_xy, itf_ids, key, half_alpha, fading,
                        betas, sigma2s):
    """Forward progress for every (beta, sigma2) pair on one realization.

    Receivers are visited by decreasing x; the first one whose SINR clears a
    threshold fixes the progress for that pair.  Interference summation for a
    receiver stops as soon as no unresolved pair can still decode, which is
    exact because the partial sum only grows.  Progress is floored at 0.
    """
    nb = betas.shape[0]
    ns = sigma2s.shape[0]
    out = np.zeros((nb, ns))
    done = np.zeros((nb, ns), dtype=np.bool_)
    remaining = nb * ns
    order = np.argsort(-rx_xy[:, 0])
    for idx in range(order.shape[0]):
        j = order[idx]
        x = rx_xy[j, 0]
        if x <= 0.0 or remaining == 0:
            break
        y = rx_xy[j, 1]
        signal = h0[j] * _path_gain(x * x + y * y, half_alpha)
        bmin = np.inf
        smin = np.inf
        for a in range(nb):
            for b in range(ns):
                if not done[a, b]:
                    if betas[a] < bmin:
                        bmin = betas[a]
                    if sigma2s[b] < smin:
                        smin = sigma2s[b]
        cap = signal / bmin - smin
        if cap < 0.0:
            continue
        itf = _interference(x, y, rx_ids[j], itf_xy, itf_ids, key, half_alpha, fading, cap)
        if itf < 0.0:
            raise ValueError("receiver coincides with an interferer")
        if itf > cap:
            continue
        for a in range(nb):
            for b in range(ns):
                if done[a, b]:
                    continue
                denom = itf + sigma2s[b]
                sinr = np.inf if denom == 0.0 else signal / denom
                if sinr >= betas[a]:
                    out[a, b] = x
                    done[a, b] = True
                    remaining -= 1
    return out


def _half_alpha(params: SystemParams) -> float:
    return 0.5 * params.alpha


def sir_at(rx, realization: NetworkRealization, params: SystemParams,
           rx_id=PROBE_ID) -> float:
    """SINR at point ``rx`` from TX0; +inf with no interference and no noise.

    ``rx_id`` keys the fading marks; the default is a probe id disjoint from
    every receiver of the realization.
    """
    px, py = float(rx[0]), float(rx[1])
    d0 = px * px + py * py
    if d0 == 0.0:
        raise DegenerateGeometryError("receiver at the transmitter location")
    rx_id = np.uint64(rx_id)
    itf = _interference(px, py, rx_id, realization.interferers, realization.interferer_ids,
                        realization.key, _half_alpha(params), realization.fading, np.inf)
    if itf < 0:
        raise DegenerateGeometryError("receiver coincides with an interferer")
    h0 = float(_pair_mark(realization.key, DESIRED_ID, rx_id)) if realization.fading else 1.0
    denom = itf + params.sigma2
    if denom == 0.0:
        return math.inf
    return h0 * float(_path_gain(d0, _half_alpha(params))) / denom


def sir_all(realization: NetworkRealization, params: SystemParams) -> np.ndarray:
    """SINR at every receiver of the realization."""
    try:
        return _all_sir(realization.receivers, realization.receiver_ids,
                        realization.desired_fading, realization.interferers,
                        realization.interferer_ids, realization.key, _half_alpha(params),
                        realization.fading, float(params.sigma2))
    except ValueError as exc:
        raise DegenerateGeometryError(str(exc)) from None


def decode_set(realization: NetworkRealization, params: SystemParams) -> list[LinkMetric]:
    """One LinkMetric per receiver; decoded iff SINR >= beta."""
    sir = sir_all(realization, params)
    return [LinkMetric(j, float(s), bool(s >= params.beta)) for j, s in enumerate(sir)]
