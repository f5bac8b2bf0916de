"""Path arithmetic and the regime thresholds for the send-rate laws.

All quantities are SI: capacities in bits/s, sizes in bytes, times in
seconds.  Windows and queues are counted in packets.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

#: Access-link transmission time used by every reference setting (120 us).
REFERENCE_DELTA1 = 120e-6
DEFAULT_PACKET_SIZE = 1500
DEFAULT_ACK_SIZE = 40
DEFAULT_ACCESS_CAPACITY = DEFAULT_PACKET_SIZE * 8 / REFERENCE_DELTA1

#: Drop probability above which timeouts dominate the send rate.
TIMEOUT_REGIME_P = 0.02


class ValidationError(ValueError):
    """Raised for a physically meaningless input; ``field`` names the culprit."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _positive(name: str, value: float) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ValidationError(name, f"expected a number, got {value!r}")
    if not math.isfinite(value) or value <= 0:
        raise ValidationError(name, f"must be strictly positive, got {value!r}")
    return value


def check_probability(p: float, name: str = "p", allow_zero: bool = False) -> float:
    if not isinstance(p, (int, float)) or isinstance(p, bool) or not math.isfinite(p):
        raise ValidationError(name, f"expected a probability, got {p!r}")
    lo_ok = p >= 0 if allow_zero else p > 0
    if not (lo_ok and p < 1):
        bounds = "[0, 1)" if allow_zero else "(0, 1)"
        raise ValidationError(name, f"must lie in {bounds}, got {p!r}")
    return float(p)


@dataclass(frozen=True)
class PathSpec:
    """A sender -> access link -> router -> bottleneck -> receiver path.

    The round-trip propagation delay is stored; the RTT excluding queueing
    is derived from it together with the transmission times of one data
    packet and one ack on both links.
    """

    bottleneck_capacity: float
    access_capacity: float
    packet_size: float
    ack_size: float
    prop_delay: float
    receiver_window: int
    name: str = field(default="", compare=False)

    @property
    def delta(self) -> float:
        """Data packet transmission time on the bottleneck."""
        return self.packet_size * 8 / self.bottleneck_capacity

    @property
    def delta1(self) -> float:
        return self.packet_size * 8 / self.access_capacity

    @property
    def rtt(self) -> float:
        return self.prop_delay + (self.packet_size + self.ack_size) * 8 * (
            1 / self.access_capacity + 1 / self.bottleneck_capacity
        )

    @property
    def beta(self) -> float:
        return self.rtt / self.delta

    @property
    def floor_beta(self) -> int:
        # guard against 16.666...6 landing a hair under an integer
        return int(math.floor(self.beta + 1e-9))

    @property
    def r(self) -> float:
        return self.floor_beta / self.receiver_window

    @property
    def saturated(self) -> bool:
        return self.floor_beta < self.receiver_window

    @property
    def queue(self) -> int | None:
        """Long-term bottleneck backlog (waiting + in service), or None if unsaturated."""
        if not self.saturated:
            return None
        return self.receiver_window - self.floor_beta + 1

    @property
    def packet_bits(self) -> float:
        return self.packet_size * 8

    def label(self) -> str:
        if self.name:
            return self.name
        return "{}M-R{}-W{}".format(
            _fmt_num(self.bottleneck_capacity / 1e6),
            _fmt_num(round(self.rtt * 1e3, 6)),
            self.receiver_window,
        )


def _fmt_num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else f"{x:g}"


def derive_path(
    bottleneck_capacity: float,
    packet_size: float,
    receiver_window: int,
    *,
    rtt: float | None = None,
    prop_delay: float | None = None,
    access_capacity: float = DEFAULT_ACCESS_CAPACITY,
    ack_size: float = DEFAULT_ACK_SIZE,
    name: str = "",
) -> PathSpec:
    """Build a validated :class:`PathSpec`.

    Exactly one of ``rtt`` and ``prop_delay`` must be given.  With ``rtt``
    the propagation delay is back-solved so that the path RTT equals it.
    """
    _positive("bottleneck_capacity", bottleneck_capacity)
    _positive("access_capacity", access_capacity)
    _positive("packet_size", packet_size)
    _positive("ack_size", ack_size)
    if isinstance(receiver_window, bool) or not isinstance(receiver_window, int):
        raise ValidationError("receiver_window", f"expected an integer, got {receiver_window!r}")
    if receiver_window < 2:
        raise ValidationError("receiver_window", f"must be >= 2, got {receiver_window}")
    if (rtt is None) == (prop_delay is None):
        raise ValidationError("rtt", "give exactly one of rtt and prop_delay")

    transmit = (packet_size + ack_size) * 8 * (1 / access_capacity + 1 / bottleneck_capacity)
    if rtt is not None:
        _positive("rtt", rtt)
        prop_delay = rtt - transmit
        if prop_delay <= 0:
            raise ValidationError(
                "rtt", f"{rtt!r} s is shorter than the transmission times ({transmit:.6g} s)"
            )
    else:
        _positive("prop_delay", prop_delay)
    return PathSpec(
        bottleneck_capacity=float(bottleneck_capacity),
        access_capacity=float(access_capacity),
        packet_size=float(packet_size),
        ack_size=float(ack_size),
        prop_delay=float(prop_delay),
        receiver_window=receiver_window,
        name=name,
    )


@dataclass(frozen=True)
class TcpConfig:
    """Protocol knobs held fixed across the study."""

    min_rto: float = 1.0
    initial_rto: float = 1.0
    initial_window: int = 2
    max_backoff: int = 5

    def __post_init__(self):
        _positive("min_rto", self.min_rto)
        _positive("initial_rto", self.initial_rto)
        if self.initial_window < 1:
            raise ValidationError("initial_window", "must be >= 1")
        if self.max_backoff < 0:
            raise ValidationError("max_backoff", "must be >= 0")


def _table1_row(c_mbps: float, rtt_ms: float, w_r: int) -> PathSpec:
    name = f"{_fmt_num(c_mbps)}M-R{_fmt_num(rtt_ms)}-W{w_r}"
    return derive_path(c_mbps * 1e6, DEFAULT_PACKET_SIZE, w_r, rtt=rtt_ms / 1e3, name=name)


#: The seven reference settings, keyed by their ``xM-Ry-Wz`` label.
TABLE1: dict[str, PathSpec] = {
    s.name: s
    for s in (
        _table1_row(2, 100, 12),
        _table1_row(2, 100, 24),
        _table1_row(2, 200, 24),
        _table1_row(2, 200, 44),
        _table1_row(10, 40, 32),
        _table1_row(10, 50, 44),
        _table1_row(10, 100, 44),
    )
}

#: Settings whose loss-event statistics are averaged ("TO stats").
TO_STATS_SETTINGS = ("2M-R100-W12", "2M-R200-W24", "10M-R40-W32", "10M-R50-W44", "10M-R100-W44")


class RegimeKind(enum.Enum):
    LINEAR = "linear"
    SQUARE_ROOT = "sqrt"
    TIMEOUT = "timeout"
    OVERLAP = "overlap"
    UNMODELED = "unmodeled"


@dataclass(frozen=True)
class Regime:
    kind: RegimeKind
    p_min: float
    p_max: float
    p_max_saturated: float | None = None

    @property
    def applicable_law(self) -> str | None:
        """Law to use for this regime; linear wins on overlap."""
        return {
            RegimeKind.LINEAR: "linear",
            RegimeKind.OVERLAP: "linear",
            RegimeKind.SQUARE_ROOT: "sqrt",
        }.get(self.kind)


def p_min(path: PathSpec) -> float:
    """Lower validity bound of the square-root law."""
    return (8 / 3) / path.floor_beta**2


def p_max_unsaturated(path: PathSpec) -> float:
    """Upper validity bound of the linear law on an unsaturated path."""
    return 2 / path.receiver_window**2


def classify_regime(path: PathSpec, p: float) -> Regime:
    check_probability(p)
    from .analytic_laws import saturated_constants  # circular at import time

    lo = p_min(path)
    hi = p_max_unsaturated(path)
    hi_sat = None
    if path.saturated:
        try:
            hi_sat = saturated_constants(path)[1]
        except ValueError:
            hi_sat = None

    if p > TIMEOUT_REGIME_P:
        kind = RegimeKind.TIMEOUT
    else:
        linear_bound = hi_sat if path.saturated else hi
        linear_ok = linear_bound is not None and p <= linear_bound
        sqrt_ok = p >= lo
        if linear_ok and sqrt_ok:
            kind = RegimeKind.OVERLAP
        elif linear_ok:
            kind = RegimeKind.LINEAR
        elif sqrt_ok:
            kind = RegimeKind.SQUARE_ROOT
        else:
            kind = RegimeKind.UNMODELED
    return Regime(kind=kind, p_min=lo, p_max=hi, p_max_saturated=hi_sat)
