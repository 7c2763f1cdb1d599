"""Equal-mass quantile vectors, 1-D Wasserstein distances and intervention design.

A distribution is represented by ``n`` sorted atoms of mass ``1/n``. In one
dimension the sorted (co-monotone) coupling is optimal, so the
Wasserstein-p distance between two such vectors is the normalised L_p gap
between their sorted atoms.

Discrete resilience of a vector is ``max_i (1 - (i-1)/n) q_i``: the
quantile is constant on each block ``((i-1)/n, i/n]`` and the sup over the
block is approached at its left edge.

Both intervention programs reduce to a per-rank "block lift". Certifying
resilience ``R`` through rank ``i`` needs every atom from rank ``i`` up to
reach ``L_i = R / (1 - (i-1)/n)``; lowering atoms never helps and lifting
atoms below rank ``i`` is wasted cost. So the cheapest plan through rank
``i`` lifts exactly ``q_j, j >= i`` to ``max(q_j, L_i)``, and the best
plan overall is the best rank.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre

from .distributions import ThresholdDistribution

__all__ = [
    "QuantileVector",
    "InterventionPlan",
    "discretize",
    "discrete_resilience",
    "wasserstein",
    "wasserstein_continuous",
    "min_cost_to_reach",
    "max_resilience_under_budget",
]


@dataclass(frozen=True, eq=False)
class QuantileVector:
    atoms: np.ndarray

    def __post_init__(self):
        a = np.array(self.atoms, dtype=float).ravel()
        if a.size < 1:
            raise ValueError("a quantile vector needs at least one atom")
        if not np.all(np.isfinite(a)) or a[0] < 0.0:
            raise ValueError("atoms must be finite and nonnegative")
        if np.any(np.diff(a) < 0.0):
            raise ValueError("atoms must be sorted nondecreasing")
        a.setflags(write=False)
        object.__setattr__(self, "atoms", a)

    @property
    def n(self) -> int:
        return int(self.atoms.size)

    def __len__(self):
        return self.n

    def __eq__(self, other):
        return isinstance(other, QuantileVector) and np.array_equal(self.atoms, other.atoms)

    def __hash__(self):
        return hash(self.atoms.tobytes())

    def weights(self) -> np.ndarray:
        """Block weights ``1 - (i-1)/n`` for ranks ``i = 1..n``."""
        return 1.0 - np.arange(self.n) / self.n


@dataclass(frozen=True)
class InterventionPlan:
    original: QuantileVector
    modified: QuantileVector
    cost: float
    achieved_resilience: float
    target_rank: int | None
    p_norm: float

    def to_dict(self) -> dict:
        return {
            "original": self.original.atoms.tolist(),
            "modified": self.modified.atoms.tolist(),
            "cost": self.cost,
            "achieved_resilience": self.achieved_resilience,
            "target_rank": self.target_rank,
            "p_norm": self.p_norm,
        }


def discretize(F: ThresholdDistribution, n: int) -> QuantileVector:
    """Midpoint quantiles ``Q((i - 1/2) / n)``, ``i = 1..n``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    u = (np.arange(n) + 0.5) / n
    return QuantileVector(np.asarray(F.quantile(u), dtype=float).reshape(n))


def discrete_resilience(qv: QuantileVector) -> float:
    return float(np.max(qv.weights() * qv.atoms))


def _check_p(p_norm):
    if not p_norm >= 1.0:
        raise ValueError(f"Wasserstein order must be >= 1, got {p_norm}")


def wasserstein(a: QuantileVector, b: QuantileVector, p_norm: float = 1.0) -> float:
    _check_p(p_norm)
    if a.n != b.n:
        raise ValueError(f"atom counts differ: {a.n} vs {b.n}")
    gap = np.abs(a.atoms - b.atoms)
    if p_norm == 1.0:
        return float(np.mean(gap))
    return float(np.mean(gap ** p_norm) ** (1.0 / p_norm))


def wasserstein_continuous(F1: ThresholdDistribution, F2: ThresholdDistribution,
                           p_norm: float = 1.0, quad_points: int = 4096) -> float:
    """``(int_0^1 |Q1(u) - Q2(u)|^p du)^(1/p)`` by composite Gauss-Legendre.

    ``quad_points`` panels of 8 nodes each on a uniform split of (0, 1);
    nodes never touch the endpoints, where unbounded quantiles blow up.
    """
    _check_p(p_norm)
    nodes, wts = legendre.leggauss(8)
    edges = np.linspace(0.0, 1.0, quad_points + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    half = 0.5 * np.diff(edges)[:, None]
    u = (mid + half * nodes[None, :]).ravel()
    w = (half * wts[None, :]).ravel()
    gap = np.abs(np.asarray(F1.quantile(u)) - np.asarray(F2.quantile(u)))
    return float(np.sum(w * gap ** p_norm) ** (1.0 / p_norm))


def _block_cost(q, i, L, p_norm):
    """``(1/n) sum_{j >= i} max(0, L - q_j)^p`` (0-based rank ``i``)."""
    lift = np.maximum(0.0, L - q[i:])
    return float(np.sum(lift ** p_norm)) / q.size


def _lift(q, i, L):
    m = q.copy()
    m[i:] = np.maximum(m[i:], L)
    return m


def _plan(qv, i, L, p_norm):
    m = _lift(qv.atoms, i, L)
    modified = QuantileVector(m)
    return InterventionPlan(qv, modified, wasserstein(qv, modified, p_norm),
                            discrete_resilience(modified), i + 1, p_norm)


def min_cost_to_reach(qv: QuantileVector, R_target: float,
                      p_norm: float = 1.0) -> InterventionPlan:
    """Least Wasserstein-p lift that makes the discrete resilience at least ``R_target``."""
    _check_p(p_norm)
    if not R_target > 0.0:
        raise ValueError("target resilience must be positive")
    q = qv.atoms
    if discrete_resilience(qv) >= R_target:
        rank = int(np.argmax(qv.weights() * q)) + 1
        return InterventionPlan(qv, qv, 0.0, discrete_resilience(qv), rank, p_norm)
    wts = qv.weights()
    best_i, best_L, best_cost = None, None, np.inf
    for i in range(qv.n):
        L = R_target / wts[i]
        while wts[i] * L < R_target:  # guard against rounding below the target
            L = np.nextafter(L, np.inf)
        c = _block_cost(q, i, L, p_norm)
        if c < best_cost:
            best_i, best_L, best_cost = i, L, c
    return _plan(qv, best_i, best_L, p_norm)


def _largest_level(q, i, budget_p, p_norm, rtol=1e-10):
    """Largest ``L`` with block cost through rank ``i`` at most ``budget_p``."""
    lo = q[i]
    hi = q[-1] + (q.size * budget_p) ** (1.0 / p_norm) + 1.0
    while hi - lo > rtol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if _block_cost(q, i, mid, p_norm) <= budget_p:
            lo = mid
        else:
            hi = mid
    return lo


def max_resilience_under_budget(qv: QuantileVector, B: float,
                                p_norm: float = 1.0) -> InterventionPlan:
    """Most resilient block lift with Wasserstein-p cost at most ``B``."""
    _check_p(p_norm)
    if not B >= 0.0:
        raise ValueError("budget must be nonnegative")
    q = qv.atoms
    if B == 0.0:
        rank = int(np.argmax(qv.weights() * q)) + 1
        return InterventionPlan(qv, qv, 0.0, discrete_resilience(qv), rank, p_norm)
    budget_p = B ** p_norm
    wts = qv.weights()
    best_i, best_L, best_val = 0, q[0], -np.inf
    for i in range(qv.n):
        L = _largest_level(q, i, budget_p, p_norm)
        if wts[i] * L > best_val:
            best_i, best_L, best_val = i, L, wts[i] * L
    return _plan(qv, best_i, best_L, p_norm)
