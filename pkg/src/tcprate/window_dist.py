"""Steady-state distribution of the sender window at window changes.

P(W) is the long-run fraction of window changes that land on W, counting
timeouts as changes to 1 and the deflation at the end of a fast recovery
as a change to S + 1, but not the inflation in between.  It depends only
on the receiver window and the drop probability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_path import ValidationError, check_probability


class DegenerateDistributionError(ValueError):
    pass


@dataclass(frozen=True)
class WindowDistribution:
    w_r: int
    p: float
    #: ``mass[w]`` is P(W = w); index 0 is unused and always 0.
    mass: np.ndarray

    def __getitem__(self, w: int) -> float:
        if 1 <= w <= self.w_r:
            return float(self.mass[w])
        return 0.0

    @property
    def windows(self) -> np.ndarray:
        return np.arange(1, self.w_r + 1)

    @property
    def mean(self) -> float:
        return float(np.dot(self.windows, self.mass[1:]))

    def tail(self, above: int) -> float:
        """P(W > above)."""
        return float(self.mass[above + 1 :].sum()) if above < self.w_r else 0.0

    def as_dict(self) -> dict[int, float]:
        return {int(w): float(self.mass[w]) for w in self.windows}


def p_fr(w: int, p: float) -> float:
    """Probability that a window of ``w`` loses one or two packets and
    none of the retransmissions; i.e. a TD that ends in fast recovery."""
    if w < 1:
        raise ValidationError("w", f"window must be >= 1, got {w}")
    q = 1.0 - p
    return q**w * (w * p + w * (w - 1) / 2 * p * p)


def _step_coefficients(w_r: int, p: float) -> np.ndarray:
    """Ratios a[w] = P(w) / P(w - 1) for w = 2..w_r, resolved top-down."""
    q = 1.0 - p
    a = np.zeros(w_r + 1)

    def ratio(hi: int, lo: int) -> float:
        # P(hi) / P(lo) from already-resolved coefficients above lo
        return float(np.prod(a[lo + 1 : hi + 1]))

    for w in range(w_r, 1, -1):
        climb = q ** (w - 1)
        if w == w_r:
            a[w] = climb / (1 - q**w_r)
        elif w == 2:
            # no TD below W = 4, so nothing recovers into W = 2
            a[w] = q
        elif 2 * w - 2 > w_r:
            a[w] = climb
        elif 2 * w - 2 == w_r:
            a[w] = climb / (1 - p_fr(2 * w - 2, p) * ratio(2 * w - 2, w))
        else:
            a[w] = climb / (
                1
                - p_fr(2 * w - 2, p) * ratio(2 * w - 2, w)
                - p_fr(2 * w - 1, p) * ratio(2 * w - 1, w)
            )
    return a


def solve_window_distribution(w_r: int, p: float) -> WindowDistribution:
    if isinstance(w_r, bool) or not isinstance(w_r, (int, np.integer)) or w_r < 2:
        raise ValidationError("w_r", f"receiver window must be an integer >= 2, got {w_r!r}")
    if p == 0:
        raise DegenerateDistributionError("degenerate: distribution undefined at p=0")
    check_probability(p)
    w_r = int(w_r)
    a = _step_coefficients(w_r, p)
    # cumulative[w] = P(w) / P(1)
    cumulative = np.ones(w_r + 1)
    cumulative[0] = 0.0
    for w in range(2, w_r + 1):
        cumulative[w] = cumulative[w - 1] * a[w]
    mass = cumulative / cumulative.sum()
    return WindowDistribution(w_r=w_r, p=float(p), mass=mass)
