"""Send rate of NewReno from the five-element decomposition.

Packets sent and time spent are split into normal operation (RTT), the
partial RTT ending in a triple duplicate ack (TD), fast recovery that
succeeds (TDFR), fast recovery ended by a timeout (TDTO) and direct
timeouts (TO).  Each element total is a P(W)-weighted sum over sender
windows, so all figures here are per window change.

The per-window approximations assume the path is not saturated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .core_path import PathSpec, TcpConfig, check_probability
from .window_dist import WindowDistribution, p_fr, solve_window_distribution


class DegenerateInputError(ValueError):
    pass


#: Column names of the per-element breakdown, as laid out in the reference table.
TABLE4_COLUMNS = (
    "#inRTT", "s-TODir", "s-TD", "s-TDTo", "s-TDFR", "sum",
    "t-Norm", "rtx-lost", "t-TODir", "tTD", "t-TDTo", "t-TDFR", "sum", "SR(kbps)",
)  # fmt: skip


@dataclass(frozen=True)
class ModelBreakdown:
    n_rtt: float
    n_td: float
    n_tdfr: float
    n_tdto: float
    n_to: float
    t_rtt: float
    t_td: float
    t_tdfr: float
    t_tdto: float
    t_to_direct: float
    t_rtx_lost: float
    packet_bits: float
    rto_used: float

    @property
    def t_to(self) -> float:
        return self.t_to_direct + self.t_rtx_lost

    @property
    def sum_n(self) -> float:
        return self.n_rtt + self.n_td + self.n_tdfr + self.n_tdto + self.n_to

    @property
    def sum_t(self) -> float:
        return self.t_rtt + self.t_td + self.t_tdfr + self.t_tdto + self.t_to

    @property
    def send_rate(self) -> float:
        """bits/s"""
        return self.sum_n * self.packet_bits / self.sum_t

    def table4_values(self) -> tuple[float, ...]:
        """Values in :data:`TABLE4_COLUMNS` order; times in ms, SR in kbit/s."""
        ms = 1e3
        return (
            self.n_rtt, self.n_to, self.n_td, self.n_tdto, self.n_tdfr, self.sum_n,
            self.t_rtt * ms, self.t_rtx_lost * ms, self.t_to_direct * ms, self.t_td * ms,
            self.t_tdto * ms, self.t_tdfr * ms, self.sum_t * ms, self.send_rate / 1e3,
        )  # fmt: skip

    def as_dict(self) -> dict[str, float]:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(sum_n=self.sum_n, sum_t=self.sum_t, send_rate=self.send_rate)
        return d


def default_rto(path: PathSpec, tcp: TcpConfig = TcpConfig()) -> float:
    """RTO a long connection settles on when every RTT sample equals the path RTT."""
    return max(tcp.min_rto, path.rtt)


def _td_windows(dist: WindowDistribution) -> np.ndarray:
    return np.arange(4, dist.w_r + 1)


def p_td(w, p: float):
    """Probability of one or two drops among ``w`` packets."""
    q = 1.0 - p
    return w * p * q ** (w - 1) + w * (w - 1) / 2 * p * p * q ** (w - 2)


def _two_drop_factor(w, p: float):
    # P(2 drops) / P(1 drop) among w packets, switched on above W = 4
    return np.where(w > 4, (w - 1) / 2 * p / (1.0 - p), 0.0)


def p_tdto(w, p: float):
    return p * (1 + _two_drop_factor(w, p))


def n_da(w, w_r: int):
    """New packets sent on the first duplicate acks of a single-drop TD."""
    s = w // 2
    w_end = w + s - 1
    return np.where((w <= w_r) & (w_r < w_end), w_r - w, s - 1)


def rtt_element(dist: WindowDistribution, path: PathSpec) -> tuple[float, float]:
    return dist.mean, path.rtt


def td_element(dist: WindowDistribution, path: PathSpec, p: float) -> tuple[float, float]:
    w = _td_windows(dist)
    weight = dist.mass[w] * p_td(w, p)
    n = float(np.sum(weight * (w - 1) / 4))
    t = float(np.sum(weight * (2 * path.rtt / w + (w - 1) / 2 * path.delta)))
    return n, t


def tdfr_element(dist: WindowDistribution, path: PathSpec, p: float) -> tuple[float, float]:
    w = _td_windows(dist)
    weight = dist.mass[w] * p_td(w, p) * (1 - p_tdto(w, p))
    n = float(np.sum(weight * (1 + n_da(w, dist.w_r))))
    t = float(np.sum(weight * path.rtt * (1 + _two_drop_factor(w, p))))
    return n, t


def tdto_element(
    dist: WindowDistribution, path: PathSpec, p: float, rto: float
) -> tuple[float, float]:
    w = _td_windows(dist)
    weight = dist.mass[w] * p_td(w, p) * p_tdto(w, p)
    sent = np.minimum(
        np.minimum(1 / p, dist.w_r - w // 2 - 2),
        n_da(w, dist.w_r) * math.floor(rto / path.rtt),
    )
    return float(np.sum(weight * sent)), float(np.sum(weight)) * rto


def p_to(dist: WindowDistribution, p: float) -> dict[int, float]:
    """Direct-timeout probability at W = 2..5 (only the windows present)."""
    q = 1.0 - p
    out = {2: p}
    if dist.w_r >= 3:
        p3 = dist[3]
        if not p3 > 0:
            raise DegenerateInputError("P(3) has no mass; direct-timeout terms undefined")
        out[3] = (
            dist[2] / p3 * q * p
            + (p + q * p)
            + dist[4] / p3 * p_fr(4, p) * (1 + q + q * q) * p
            + dist[5] / p3 * p_fr(5, p) * (1 + q) * p
        )
    if dist.w_r >= 4:
        out[4] = 2 * 6 * p * p * q * q
    if dist.w_r >= 5:
        out[5] = 3 * 10 * p**3 * q * q
    return out


def to_element(
    dist: WindowDistribution, path: PathSpec, p: float, rto: float
) -> tuple[float, float]:
    """Packets and time of direct timeouts, excluding repeated timeouts at W = 1."""
    if not dist[2] > 0:
        raise DegenerateInputError("P(2) has no mass; direct-timeout terms undefined")
    n = t = 0.0
    for w, prob in p_to(dist, p).items():
        weight = dist[w] * prob
        if w == 2:
            t += weight * (rto - path.rtt)
        else:
            n += weight * (w - 1) / 4
            t += weight * (rto - 0.5 * path.rtt)
    return n, t


def toto_time(p1: float, p: float, rtt: float, rto: float) -> float:
    """Time lost to repeated timeouts of one packet, already weighted by P(1)."""
    q = 1.0 - p
    backoff = 1 + 2 * p + 4 * p**2 + 8 * p**3 + 16 * p**4
    return q * p1 * p * (2 * rto * backoff - rtt)


def assemble(
    path: PathSpec,
    tcp: TcpConfig = TcpConfig(),
    p: float = 0.01,
    *,
    rto: float | None = None,
    dist: WindowDistribution | None = None,
) -> ModelBreakdown:
    check_probability(p)
    if rto is None:
        rto = default_rto(path, tcp)
    if dist is None:
        dist = solve_window_distribution(path.receiver_window, p)
    elif dist.w_r != path.receiver_window or dist.p != p:
        raise ValueError("distribution was solved for a different (W_R, p)")

    n_rtt, t_rtt = rtt_element(dist, path)
    n_td, t_td = td_element(dist, path, p)
    n_tdfr, t_tdfr = tdfr_element(dist, path, p)
    n_tdto, t_tdto = tdto_element(dist, path, p, rto)
    n_to, t_to_direct = to_element(dist, path, p, rto)
    return ModelBreakdown(
        n_rtt=n_rtt,
        n_td=n_td,
        n_tdfr=n_tdfr,
        n_tdto=n_tdto,
        n_to=n_to,
        t_rtt=t_rtt,
        t_td=t_td,
        t_tdfr=t_tdfr,
        t_tdto=t_tdto,
        t_to_direct=t_to_direct,
        t_rtx_lost=toto_time(dist[1], p, path.rtt, rto),
        packet_bits=path.packet_bits,
        rto_used=rto,
    )
