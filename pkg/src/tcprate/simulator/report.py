"""Measured counterpart of the model breakdown."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..full_model import ModelBreakdown

ELEMENTS = ("rtt", "td", "tdfr", "tdto", "to_direct", "rtx_lost")

#: Loss-event statistics columns, all in percent.
LOSS_EVENT_COLUMNS = (
    "%TD/drps", "%LE/drps", "%TD/LE", "%FR/TD",
    "%rxtFR(1)", "%rxtFR(2)", "%rxtFR(3)", "%TO/LE", "%TDTO/TO", "%TOFRxtd/TO",
)  # fmt: skip


class ConsistencyError(RuntimeError):
    """The accounting does not add up; indicates a simulator bug."""


def _pct(num: float, den: float) -> float:
    return 100.0 * num / den if den else math.nan


@dataclass(frozen=True)
class SimulationReport:
    setting: str
    p: float
    seed: int
    n_packets: int
    backend: str
    rtt: float
    packet_bits: float
    receiver_window: int

    elapsed: float
    sent: int
    new_data: int
    retransmitted: int
    dropped: int
    acks: int
    dupacks: int
    acks_pending: int
    traffic_packets: int

    td: int
    to: int
    to_repeat: int
    tdto: int
    fr: int
    tofrxtd: int
    rxt_fr: tuple[int, int, int]
    window_changes: int
    rtt_samples: int
    final_rto: float
    max_backlog: int
    #: bottleneck backlog seen by the last packet sent, itself included
    final_backlog: int

    #: packets and seconds per element, keyed by :data:`ELEMENTS`
    element_packets: dict
    element_time: dict
    #: index w holds the value for W = w (index 0 unused)
    histogram: tuple
    packets_per_w: tuple
    time_per_w: tuple

    # -- send rate four ways ------------------------------------------------

    # a run too short to span any time has no rate; these are NaN then

    def _rate(self, packets, seconds) -> float:
        return packets * self.packet_bits / seconds if seconds > 0 else math.nan

    @property
    def sr_traffic(self) -> float:
        return self._rate(self.traffic_packets, self.elapsed)

    @property
    def sr_sender(self) -> float:
        return self._rate(self.sent, self.elapsed)

    @property
    def sr_elements(self) -> float:
        return self._rate(sum(self.element_packets.values()), sum(self.element_time.values()))

    @property
    def sr_per_w(self) -> float:
        return self._rate(sum(self.packets_per_w), sum(self.time_per_w))

    @property
    def send_rate(self) -> float:
        return self.sr_sender

    @property
    def w_eff(self) -> float:
        return self.send_rate * self.rtt / self.packet_bits

    # -- normalised views ---------------------------------------------------

    def window_distribution(self) -> np.ndarray:
        """Measured P(W), indexed like the histogram."""
        h = np.asarray(self.histogram, dtype=float)
        return h / h.sum()

    def breakdown(self) -> ModelBreakdown:
        """Element totals per window change, comparable with the model."""
        n = self.window_changes
        pk = {k: v / n for k, v in self.element_packets.items()}
        t = {k: v / n for k, v in self.element_time.items()}
        return ModelBreakdown(
            n_rtt=pk["rtt"],
            n_td=pk["td"],
            n_tdfr=pk["tdfr"],
            n_tdto=pk["tdto"],
            n_to=pk["to_direct"] + pk["rtx_lost"],
            t_rtt=t["rtt"],
            t_td=t["td"],
            t_tdfr=t["tdfr"],
            t_tdto=t["tdto"],
            t_to_direct=t["to_direct"],
            t_rtx_lost=t["rtx_lost"],
            packet_bits=self.packet_bits,
            rto_used=self.final_rto,
        )

    @property
    def loss_events(self) -> int:
        return self.td + self.to

    def loss_event_stats(self) -> dict[str, float]:
        le = self.loss_events
        return dict(
            zip(
                LOSS_EVENT_COLUMNS,
                (
                    _pct(self.td, self.dropped),
                    _pct(le, self.dropped),
                    _pct(self.td, le),
                    _pct(self.fr, self.td),
                    *(_pct(k, self.fr) for k in self.rxt_fr),
                    _pct(self.to, le),
                    _pct(self.tdto, self.to),
                    _pct(self.tofrxtd, self.to),
                ),
            )
        )

    # -- checks ---------------------------------------------------------------

    def check_consistency(self, rel: float = 1e-9) -> None:
        """Raise :class:`ConsistencyError` if any accounting identity fails."""
        problems = []
        if self.sent != self.acks + self.dropped + self.acks_pending:
            problems.append("sent != acked + dropped + pending")
        if sum(self.element_packets.values()) != self.sent:
            problems.append("unclassified packets in the element totals")
        if sum(self.packets_per_w) != self.sent:
            problems.append("unclassified packets in the per-W totals")
        for label, total in (
            ("element", sum(self.element_time.values())),
            ("per-W", sum(self.time_per_w)),
        ):
            if not math.isclose(total, self.elapsed, rel_tol=rel, abs_tol=1e-12):
                problems.append(f"{label} time {total!r} != elapsed {self.elapsed!r}")
        rates = (self.sr_traffic, self.sr_sender, self.sr_elements, self.sr_per_w)
        if self.elapsed > 0 and max(rates) - min(rates) > rel * max(rates):
            problems.append(f"send rates disagree: {rates}")
        if problems:
            raise ConsistencyError("; ".join(problems))

    def as_dict(self) -> dict:
        d = asdict(self)
        d.update(
            sr_traffic=self.sr_traffic,
            sr_sender=self.sr_sender,
            sr_elements=self.sr_elements,
            sr_per_w=self.sr_per_w,
            w_eff=self.w_eff,
        )
        return d
