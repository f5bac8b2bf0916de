"""Seeded packet-level simulation of one NewReno connection.

The event loop lives in ``_kernel``.  A compiled build of it is used when
present; set ``TCPRATE_PURE_KERNEL=1`` to force the interpreted source, or
pass ``backend="pure"`` to :func:`run_simulation`.
"""

from __future__ import annotations

import importlib.util
import os
from pathlib import Path

from ..core_path import PathSpec, TcpConfig, ValidationError, check_probability
from .report import ELEMENTS, LOSS_EVENT_COLUMNS, ConsistencyError, SimulationReport

PURE_ENV = "TCPRATE_PURE_KERNEL"

_SOURCE = Path(__file__).with_name("_kernel.py")


def _load_pure():
    spec = importlib.util.spec_from_file_location("tcprate.simulator._kernel_pure", _SOURCE)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def _load_default():
    if os.environ.get(PURE_ENV, "") not in ("", "0"):
        return _pure, "pure"
    from . import _kernel

    compiled = not str(getattr(_kernel, "__file__", "")).endswith(".py")
    return _kernel, "compiled" if compiled else "pure"


_pure = _load_pure()
_default, DEFAULT_BACKEND = _load_default()

try:
    from . import _kernel as _maybe_compiled

    COMPILED_AVAILABLE = not str(_maybe_compiled.__file__).endswith(".py")
except ImportError:  # pragma: no cover
    COMPILED_AVAILABLE = False

RtoEstimator = _default.RtoEstimator


def kernel_module(backend: str | None = None):
    """Module implementing the event loop for ``backend`` ('compiled', 'pure' or None)."""
    if backend is None:
        return _default
    if backend == "pure":
        return _pure
    if backend == "compiled":
        if not COMPILED_AVAILABLE:
            raise RuntimeError("compiled kernel is not built; reinstall with Cython available")
        from . import _kernel

        return _kernel
    raise ValueError(f"unknown backend {backend!r}")


def run_simulation(
    path: PathSpec,
    tcp: TcpConfig = TcpConfig(),
    p: float = 0.0,
    n_packets: int = 1_000_000,
    seed: int = 1,
    *,
    no_drop_rtx_td: bool = False,
    no_drop_rtx_all: bool = False,
    drop_seqs=(),
    trace: list | None = None,
    backend: str | None = None,
) -> SimulationReport:
    """Simulate until ``n_packets`` transmissions have been made.

    ``drop_seqs`` forces the first transmission of the listed sequence
    numbers to be dropped, on top of the random drops.  ``trace``, if a
    list, receives one ``(time, event, seq, cwnd, ssthresh, in_fr)`` tuple
    per sender event.
    """
    check_probability(p, allow_zero=True)
    if isinstance(n_packets, bool) or not isinstance(n_packets, int) or n_packets < 1:
        raise ValidationError("n_packets", f"must be an integer >= 1, got {n_packets!r}")
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ValidationError("seed", f"must be a non-negative integer, got {seed!r}")
    mod = kernel_module(backend)
    k = mod.Kernel(
        path.receiver_window,
        path.rtt,
        path.delta,
        path.delta1,
        float(p),
        n_packets,
        seed,
        tcp.min_rto,
        tcp.initial_rto,
        tcp.initial_window,
        tcp.max_backoff,
        no_drop_rtx_td,
        no_drop_rtx_all,
        tuple(drop_seqs),
        trace,
    )
    k.run()
    el_pk = list(k.el_pk)
    el_t = list(k.el_t)
    return SimulationReport(
        setting=path.label(),
        p=float(p),
        seed=seed,
        n_packets=n_packets,
        backend="pure" if mod is _pure or not COMPILED_AVAILABLE else "compiled",
        rtt=path.rtt,
        packet_bits=path.packet_bits,
        receiver_window=path.receiver_window,
        elapsed=k.now,
        sent=k.n_sent,
        new_data=k.n_new,
        retransmitted=k.n_rtx,
        dropped=k.n_drops,
        acks=k.n_acks,
        dupacks=k.n_dupacks,
        acks_pending=k.aq_len,
        traffic_packets=k.traffic_packets,
        td=k.n_td,
        to=k.n_to,
        to_repeat=k.n_to_repeat,
        tdto=k.n_tdto,
        fr=k.n_fr,
        tofrxtd=k.n_tofrxtd,
        rxt_fr=tuple(int(x) for x in list(k.rxt_fr)[1:4]),
        window_changes=k.n_changes,
        rtt_samples=k.est.samples,
        final_rto=k.est.rto,
        max_backlog=k.max_backlog,
        final_backlog=k.backlog,
        element_packets=dict(zip(ELEMENTS, (int(x) for x in el_pk))),
        element_time=dict(zip(ELEMENTS, el_t)),
        histogram=tuple(int(x) for x in k.hist),
        packets_per_w=tuple(int(x) for x in k.pk_w),
        time_per_w=tuple(float(x) for x in k.t_w),
    )


__all__ = [
    "COMPILED_AVAILABLE",
    "DEFAULT_BACKEND",
    "ELEMENTS",
    "LOSS_EVENT_COLUMNS",
    "ConsistencyError",
    "RtoEstimator",
    "SimulationReport",
    "kernel_module",
    "run_simulation",
]
