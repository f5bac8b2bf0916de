"""Closed-form send-rate laws and their validity bounds.

Every law returns a number even outside its validity interval (the
curves are plotted beyond it); ``LawResult.valid`` carries the verdict.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .core_path import PathSpec, check_probability, p_max_unsaturated, p_min


class Law(enum.Enum):
    SQRT = "sqrt"
    LINEAR_UNSAT = "linear_unsat"
    LINEAR_SAT = "linear_sat"


class SaturatedPathError(ValueError):
    pass


class SideConditionError(ValueError):
    def __init__(self, condition: str, message: str):
        super().__init__(f"{condition}: {message}")
        self.condition = condition


@dataclass(frozen=True)
class LawResult:
    law: Law
    w_eff: float
    send_rate: float  # bits/s
    valid: bool
    validity_bound: float


def _result(path: PathSpec, law: Law, w_eff: float, valid: bool, bound: float) -> LawResult:
    w_eff = max(w_eff, 0.0)
    if w_eff == 0.0:
        valid = False
    return LawResult(
        law=law,
        w_eff=w_eff,
        send_rate=w_eff * path.packet_bits / path.rtt,
        valid=valid,
        validity_bound=bound,
    )


def sqrt_law(path: PathSpec, p: float) -> LawResult:
    check_probability(p)
    bound = p_min(path)
    return _result(path, Law.SQRT, math.sqrt(1.5 / p), p >= bound, bound)


def linear_law_unsat(path: PathSpec, p: float) -> LawResult:
    check_probability(p)
    if path.saturated:
        raise SaturatedPathError(
            f"path {path.label()} is saturated (r={path.r:.3g} < 1); use linear_law_sat"
        )
    w = path.receiver_window
    bound = p_max_unsaturated(path)
    w_eff = w * (1 - (w / 4) * (1 + w / 2) * p)
    return _result(path, Law.LINEAR_UNSAT, w_eff, p <= bound, bound)


def saturated_constants(path: PathSpec) -> tuple[float, float]:
    """Return ``(K, p_max)`` of the saturated linear law.

    Raises :class:`SideConditionError` when the closed form does not
    apply (the link would idle before the retransmission, or saturate on
    fast recovery).
    """
    if not path.saturated:
        raise SideConditionError("r < 1", f"path {path.label()} is not saturated")
    w_r = path.receiver_window
    b = path.floor_beta
    half = w_r // 2
    if not w_r - b > 3:
        raise SideConditionError("W_R - floor(beta) > 3", f"W_R={w_r}, floor(beta)={b}")
    if not half < b:
        raise SideConditionError("floor(W_R/2) < floor(beta)", f"W_R={w_r}, floor(beta)={b}")
    beta = path.beta
    k = (b - half + 2) * beta - (b - half + 1) * (b + half + 2) / 2 - 1
    inv_pmax = (b - half + 2) * beta + w_r + (w_r - b + 1) * (w_r + b) / 2 - 1
    return k, 1 / inv_pmax


def linear_law_sat(path: PathSpec, p: float) -> LawResult:
    check_probability(p)
    k, bound = saturated_constants(path)
    w_eff = path.beta * (1 - k * p)
    return _result(path, Law.LINEAR_SAT, w_eff, p <= bound, bound)


def linear_law(path: PathSpec, p: float) -> LawResult:
    """The linear law appropriate to the path's saturation state."""
    return linear_law_sat(path, p) if path.saturated else linear_law_unsat(path, p)
