"""Targeted harassment by an adversary who observes every threshold.

Each step the adversary picks the largest cutoff ``theta`` such that the
whole budget ``H`` spread over the officials with thresholds in
``(theta_prev, theta]`` still pushes all of them out:

    theta_{t+1} = H / (F(theta_{t+1}) - F(theta_t))

i.e. the root above ``theta_t`` of ``phi(theta) = theta (F(theta) - F(theta_t)) - H``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from scipy import optimize

from .distributions import ThresholdDistribution

__all__ = ["EXHAUSTED", "TargetingTrace", "next_threshold", "targeted_unravel"]


class _Exhausted(enum.Enum):
    EXHAUSTED = "exhausted"

    def __repr__(self):
        return "EXHAUSTED"


#: Returned when the budget covers everyone left (bounded support only).
EXHAUSTED = _Exhausted.EXHAUSTED


@dataclass
class TargetingTrace:
    H: float
    epsilon: float
    thresholds: list[float] = field(default_factory=lambda: [0.0])
    removed_mass: list[float] = field(default_factory=list)
    cumulative: list[float] = field(default_factory=lambda: [0.0])
    steps_to_unravel: int | None = None
    exhausted: bool = False

    @property
    def reached(self) -> bool:
        return self.steps_to_unravel is not None

    def rows(self):
        """``(t, theta, removed_mass, cumulative)`` for t >= 1."""
        for t in range(1, len(self.thresholds)):
            yield t, self.thresholds[t], self.removed_mass[t - 1], self.cumulative[t]


def _check_continuous(F):
    if not F.continuous:
        raise ValueError(
            "targeting needs a continuous CDF; smooth empirical data into a "
            "PiecewiseLinearCdf first"
        )


def next_threshold(F: ThresholdDistribution, theta_prev: float, H: float):
    """Next targeting cutoff, or :data:`EXHAUSTED`."""
    _check_continuous(F)
    if not theta_prev >= 0.0:
        raise ValueError("theta_prev must be nonnegative")
    if not H > 0.0:
        raise ValueError("harassment budget must be positive")
    base = F.cdf(theta_prev)
    if base >= 1.0:
        raise ValueError("no officials remain above theta_prev")

    def phi(theta):
        return theta * (F.cdf(theta) - base) - H

    upper = F.support[1]
    if math.isfinite(upper):
        top = phi(upper)
        if top < 0.0:
            return EXHAUSTED
        if top == 0.0:
            return float(upper)
        hi = upper
    else:
        hi = max(theta_prev, 1.0)
        while phi(hi) < 0.0:
            hi *= 2.0
    lo = theta_prev
    if hi <= lo:
        return float(hi)
    root = optimize.brentq(phi, lo, hi, xtol=1e-13, rtol=4 * 2.220446049250313e-16,
                           maxiter=500)
    return float(root)


def targeted_unravel(F: ThresholdDistribution, H: float, epsilon: float = 1e-6,
                     max_steps: int = 1_000_000) -> TargetingTrace:
    """Run the targeting recursion from ``theta_0 = 0``.

    Stops once the residual mass ``1 - F(theta_t)`` is at most ``epsilon``,
    when the budget exhausts the population, or after ``max_steps``. On
    exhaustion the recorded cutoff is ``H / (1 - F(theta_t))``, the largest
    value still satisfying the targeting condition once everyone is covered.
    """
    _check_continuous(F)
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    trace = TargetingTrace(H=H, epsilon=epsilon)
    theta, cum = 0.0, float(F.cdf(0.0))
    for t in range(max_steps):
        if cum >= 1.0 - epsilon:
            trace.steps_to_unravel = t
            return trace
        nxt = next_threshold(F, theta, H)
        if nxt is EXHAUSTED:
            theta = H / (1.0 - cum)
            trace.removed_mass.append(1.0 - cum)
            trace.thresholds.append(theta)
            trace.cumulative.append(1.0)
            trace.exhausted = True
            trace.steps_to_unravel = t + 1
            return trace
        new_cum = float(F.cdf(nxt))
        trace.removed_mass.append(new_cum - cum)
        trace.thresholds.append(nxt)
        trace.cumulative.append(new_cum)
        theta, cum = nxt, new_cum
    if cum >= 1.0 - epsilon:
        trace.steps_to_unravel = max_steps
    return trace
