"""Departed-fraction dynamics for a continuum of officials.

The combined map is

    p_{t+1} = F((H + lam * alpha * p_t) / (1 - alpha * p_t))

which is the baseline model for ``alpha=1, lam=0``, the recruitment model
for ``lam=0`` and the infiltration model for ``alpha=1``. The map is
nondecreasing in ``p``, so iterating from ``p_0 = 0`` climbs monotonically
to the smallest fixed point.

Convention: trajectories start at ``p_0 = 0``, so ``p_1 = F(H)``.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import optimize

from .distributions import EmpiricalAtoms, ThresholdDistribution

__all__ = [
    "Action",
    "DynamicsParams",
    "Trajectory",
    "agent_action",
    "combined_map",
    "step",
    "simulate",
    "limit_fraction",
    "sweep_pinf",
]

# 1 - alpha*p at or below this is treated as a vacated system
DENOM_FLOOR = 4 * np.finfo(float).eps
ROOT_SCAN_POINTS = 1 << 16


class Action(str, enum.Enum):
    STAY = "stay"
    LEAVE = "leave"


@dataclass(frozen=True)
class DynamicsParams:
    """Harassment level (or schedule), recruitment failure ``alpha``, infiltration ``lam``."""

    H: float | tuple[float, ...] = 0.0
    alpha: float = 1.0
    lam: float = 0.0
    tol: float = 1e-10
    max_iter: int = 1_000_000

    def __post_init__(self):
        if isinstance(self.H, (list, tuple, np.ndarray)):
            sched = tuple(float(h) for h in self.H)
            if not sched:
                raise ValueError("harassment schedule must not be empty")
            object.__setattr__(self, "H", sched)
            levels = sched
        else:
            object.__setattr__(self, "H", float(self.H))
            levels = (self.H,)
        if any(not (h >= 0.0) for h in levels):
            raise ValueError("harassment must be nonnegative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.lam >= 0.0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")

    @property
    def is_schedule(self) -> bool:
        return isinstance(self.H, tuple)

    def level(self, t: int) -> float:
        """Harassment applied at step ``t``; a schedule holds its last level."""
        if self.is_schedule:
            return self.H[min(t, len(self.H) - 1)]
        return self.H


@dataclass(frozen=True)
class Trajectory:
    points: np.ndarray
    converged: bool
    limit: float
    iterations: int


def agent_action(theta: float, H: float, p: float) -> Action:
    """Threshold rule: leave iff ``theta <= H / (1 - p)`` (ties leave)."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"departed fraction must lie in [0, 1), got {p}")
    return Action.LEAVE if theta <= H / (1.0 - p) else Action.STAY


def _experienced(p, H, alpha, lam):
    p = np.asarray(p, dtype=float)
    denom = 1.0 - alpha * p
    vacated = denom <= DENOM_FLOOR
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = (H + lam * alpha * p) / np.where(vacated, 1.0, denom)
    return np.where(vacated, np.inf, arg)


def combined_map(F: ThresholdDistribution, p, H: float, alpha: float = 1.0, lam: float = 0.0):
    """Vectorised ``F((H + lam*alpha*p) / (1 - alpha*p))``."""
    out = np.asarray(F.cdf(_experienced(p, H, alpha, lam)))
    return float(out) if out.ndim == 0 else out


def step(F: ThresholdDistribution, p: float, params: DynamicsParams) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"departed fraction must lie in [0, 1], got {p}")
    if params.is_schedule:
        raise ValueError("step needs a constant harassment level; use simulate for schedules")
    return combined_map(F, p, params.H, params.alpha, params.lam)


def simulate(F: ThresholdDistribution, params: DynamicsParams) -> Trajectory:
    """Iterate from ``p_0 = 0`` until successive values differ by less than ``tol``.

    Non-convergence within ``max_iter`` is reported through the flag.
    """
    # a schedule is played out in full before convergence is checked
    warmup = len(params.H) if params.is_schedule else 0
    pts = [0.0]
    p = 0.0
    converged = False
    for t in range(params.max_iter):
        nxt = combined_map(F, p, params.level(t), params.alpha, params.lam)
        pts.append(nxt)
        small = abs(nxt - p) < params.tol
        p = nxt
        if small and t + 1 >= warmup:
            converged = True
            break
    return Trajectory(np.asarray(pts), converged, p, len(pts) - 1)


def _smallest_root(F, H, alpha, lam, tol, scan_points):
    """Smallest x in [0, 1] with x >= T(x), T the combined map.

    Any x with ``T(x) <= x`` bounds the smallest fixed point from above
    (T is monotone, so it maps [0, x] into itself). The first grid point
    with that property is located by a chunked scan, then bisected.
    """
    def g(x):
        return x - combined_map(F, x, H, alpha, lam)

    if g(0.0) >= 0.0:
        return 0.0
    if isinstance(F, EmpiricalAtoms):
        # T only takes the values k/n, so every fixed point is one of them
        # and the least one is the first level v with T(v) <= v
        levels = np.arange(1, F.n + 1) / F.n
        return float(levels[np.argmax(g(levels) >= 0.0)])
    grid = np.linspace(0.0, 1.0, scan_points)
    chunk = 4096
    closest, closest_at = -np.inf, 0
    for start in range(1, scan_points, chunk):
        xs = grid[start:start + chunk]
        gx = g(xs)
        hit = np.flatnonzero(gx >= 0.0)
        stop = int(hit[0]) if hit.size else gx.size
        if stop:
            j = int(np.argmax(gx[:stop]))
            if gx[j] > closest:
                closest, closest_at = float(gx[j]), start + j
        if hit.size:
            k = start + stop
            break
    else:  # g(1) >= 0 always, so this is only reachable through rounding
        return 1.0

    # A tangency (double root) can fall between grid points; polish the
    # point where g came closest to zero before the first crossing.
    if closest_at > 0 and closest > -1e-3:
        a = float(grid[closest_at - 1])
        b = float(grid[min(closest_at + 1, k - 1)])
        if b > a:
            res = optimize.minimize_scalar(lambda x: -g(x), bounds=(a, b), method="bounded",
                                           options={"xatol": 1e-14})
            if -res.fun >= -tol:
                return float(res.x)
    lo, hi = float(grid[k - 1]), float(grid[k])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if g(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
    return hi


def limit_fraction(F: ThresholdDistribution, params: DynamicsParams, method: str = "root",
                   scan_points: int = ROOT_SCAN_POINTS) -> float:
    """Eventual departed fraction ``p_inf(H)``.

    ``method="root"`` returns the smallest root of ``x - T(x)`` in [0, 1]
    (1 when none lies below 1); ``method="iterate"`` runs :func:`simulate`.
    The root method is preferred near the critical harassment, where plain
    iteration slows to a crawl.
    """
    if params.is_schedule:
        raise ValueError("the limit is defined for a constant harassment level only")
    if method == "iterate":
        return simulate(F, params).limit
    if method != "root":
        raise ValueError(f"unknown method {method!r}")
    return _smallest_root(F, params.H, params.alpha, params.lam, params.tol, scan_points)


def sweep_pinf(F: ThresholdDistribution, H_grid: Sequence[float], alpha: float = 1.0,
               lam: float = 0.0, tol: float = 1e-10, workers: int = 1) -> list[tuple[float, float]]:
    """``(H, p_inf(H))`` for each grid level, in grid order."""
    H_grid = [float(h) for h in H_grid]
    if any(not (h >= 0.0) for h in H_grid):
        raise ValueError("harassment grid values must be nonnegative")
    if any(b < a for a, b in zip(H_grid, H_grid[1:])):
        raise ValueError("harassment grid must be sorted")

    def one(h):
        return limit_fraction(F, DynamicsParams(H=h, alpha=alpha, lam=lam, tol=tol))

    if workers > 1 and len(H_grid) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(one, H_grid))
    else:
        vals = [one(h) for h in H_grid]
    return list(zip(H_grid, vals))

