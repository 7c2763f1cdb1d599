"""The attacker's discounted harassment-planning problem.

State ``p`` is the departed fraction, action ``h`` the harassment applied
this step at unit cost ``c``. Per-step reward is the realised departures
less cost, ``r = p' - p - c h``, with transition ``p' = F(h / (1 - p))``,
so

    R(p, h) = F(h / (1 - p)) - p - c h

Value iteration runs on a uniform state grid over [0, 1] and a uniform
action grid over [0, H_max]; successor values are linearly interpolated.
Interpolation is a convex combination of grid values, so the discretised
Bellman operator is still a ``delta``-contraction in the sup norm.

The ``monotone`` option keeps departed officials out,
``p' = max(p, F(h / (1 - p)))``, with the reward ``p' - p - c h`` that
follows from the same definition.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .distributions import ThresholdDistribution, cdf_sup_distance

log = logging.getLogger(__name__)

__all__ = [
    "AttackerConfig",
    "ValueFunction",
    "PolicyTable",
    "Solution",
    "reward",
    "transition",
    "value_iteration",
    "deterrence_cost",
    "evaluate_policy",
    "scale_perturbation",
    "voi_curve",
]

TIE_TOL = 1e-12


@dataclass(frozen=True)
class AttackerConfig:
    c: float = 1.0
    delta: float = 0.9
    H_max: float = 1.0
    p_grid: int = 1001
    h_grid: int = 501
    tol: float = 1e-8
    max_iter: int = 100_000
    monotone: bool = False

    def __post_init__(self):
        if not self.c >= 0.0:
            raise ValueError("cost per unit harassment must be nonnegative")
        if not 0.0 <= self.delta < 1.0:
            raise ValueError("discount factor must lie in [0, 1)")
        if not self.H_max > 0.0:
            raise ValueError("H_max must be positive")
        if self.p_grid < 2 or self.h_grid < 2:
            raise ValueError("state and action grids need at least two points")
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")

    @property
    def reward_bound(self) -> float:
        """``M = 2 + c H_max``, a bound on every per-step reward."""
        return 2.0 + self.c * self.H_max

    def states(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.p_grid)

    def actions(self) -> np.ndarray:
        return np.linspace(0.0, self.H_max, self.h_grid)


@dataclass(frozen=True)
class ValueFunction:
    grid: np.ndarray
    values: np.ndarray

    def __call__(self, p):
        return np.interp(p, self.grid, self.values)


@dataclass(frozen=True)
class PolicyTable:
    grid: np.ndarray
    actions: np.ndarray

    def __call__(self, p):
        return np.interp(p, self.grid, self.actions)


@dataclass(frozen=True)
class Solution:
    value: ValueFunction
    policy: PolicyTable
    iterations: int
    converged: bool
    residuals: list[float] = field(default_factory=list)

    def rows(self):
        for p, v, h in zip(self.value.grid, self.value.values, self.policy.actions):
            yield p, v, h


def _successor_raw(F, p, h):
    p = np.asarray(p, dtype=float)
    h = np.asarray(h, dtype=float)
    left = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.where(left > 0.0, h / np.where(left > 0.0, left, 1.0), np.inf)
    return np.asarray(F.cdf(arg))


def transition(F: ThresholdDistribution, p, h, monotone: bool = False):
    nxt = _successor_raw(F, p, h)
    if monotone:
        nxt = np.maximum(nxt, p)
    return float(nxt) if nxt.ndim == 0 else nxt


def reward(F: ThresholdDistribution, p, h, c: float, monotone: bool = False):
    """``R(p, h) = F(h/(1-p)) - p - c h``; at ``p = 1`` the CDF term is 1."""
    out = np.asarray(transition(F, p, h, monotone)) - np.asarray(p) - c * np.asarray(h)
    return float(out) if out.ndim == 0 else out


def _greedy(Q: np.ndarray) -> np.ndarray:
    # smallest action within TIE_TOL of the row maximum
    top = Q.max(axis=1, keepdims=True)
    return np.argmax(Q >= top - TIE_TOL, axis=1)


def value_iteration(F: ThresholdDistribution, config: AttackerConfig) -> Solution:
    """Solve ``V(p) = max_h R(p, h) + delta V(F(h / (1 - p)))`` on the grid.

    Stops when the sup-norm change drops below ``tol (1 - delta) / (2 delta)``,
    which makes the greedy policy ``tol``-optimal for the grid model.
    """
    P = config.states()
    A = config.actions()
    PP, AA = np.meshgrid(P, A, indexing="ij")
    succ = transition(F, PP, AA, config.monotone)
    R = succ - PP - config.c * AA

    # interpolation stencil for successor states, fixed across sweeps
    pos = succ * (config.p_grid - 1)
    idx = np.clip(np.floor(pos).astype(np.int64), 0, config.p_grid - 2)
    w = pos - idx

    def q_values(V):
        return R + config.delta * ((1.0 - w) * V[idx] + w * V[idx + 1])

    V = np.zeros(config.p_grid)
    residuals: list[float] = []
    converged = False
    it = 0
    if config.delta == 0.0:
        V = R.max(axis=1)
        it, converged = 1, True
    else:
        stop = config.tol * (1.0 - config.delta) / (2.0 * config.delta)
        while it < config.max_iter:
            V_new = q_values(V).max(axis=1)
            res = float(np.max(np.abs(V_new - V)))
            residuals.append(res)
            V = V_new
            it += 1
            if res < stop:
                converged = True
                break
        if not converged:
            log.warning("value iteration stopped after %d sweeps (residual %.3g)", it, res)
    policy = A[_greedy(q_values(V))]
    return Solution(ValueFunction(P, V), PolicyTable(P, policy), it, converged, residuals)


def deterrence_cost(F: ThresholdDistribution, H_max: float, grid: int = 10_001) -> float:
    """``max_{0 <= h <= H_max} f(h)``: the cost rate below which harassing pays at ``p = 0``."""
    hs = np.linspace(0.0, H_max, grid)
    dens = np.asarray(F.density(hs))
    k = int(np.argmax(dens))
    best = float(dens[k])
    lo, hi = hs[max(k - 1, 0)], hs[min(k + 1, grid - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda t: -float(F.density(t)), bounds=(lo, hi),
                                       method="bounded", options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    return best


def evaluate_policy(F_true: ThresholdDistribution, policy: PolicyTable,
                    config: AttackerConfig) -> float:
    """Discounted utility of ``policy`` rolled out from ``p_0 = 0`` under ``F_true``.

    The rollout stops once the tail bound ``delta^t M / (1 - delta)`` is
    below ``tol``.
    """
    M = config.reward_bound
    p, disc, total = 0.0, 1.0, 0.0
    while True:
        h = float(np.clip(policy(p), 0.0, config.H_max))
        total += disc * reward(F_true, p, h, config.c, config.monotone)
        p = transition(F_true, p, h, config.monotone)
        disc *= config.delta
        if disc * M / (1.0 - config.delta) < config.tol or disc == 0.0:
            return total


def scale_perturbation(F: ThresholdDistribution, eps: float,
                       metric: Callable | None = None) -> ThresholdDistribution:
    """``F`` with thresholds scaled by ``1 + s``, ``s >= 0`` calibrated so that
    ``metric(F, F_hat) == eps`` (default metric: sup-norm CDF distance).

    For Uniform[0, 1] this is Uniform[0, 1 + s].
    """
    metric = metric or cdf_sup_distance
    if eps == 0.0:
        return F
    if eps < 0.0:
        raise ValueError("distance must be nonnegative")

    def gap(s):
        return metric(F, F.scaled(1.0 + s)) - eps

    hi = 1.0
    while gap(hi) < 0.0:
        hi *= 2.0
        if hi > 1e12:
            raise ValueError(f"no scaling reaches distance {eps}")
    s = optimize.brentq(gap, 0.0, hi, xtol=1e-14)
    return F.scaled(1.0 + s)


def voi_curve(F_true: ThresholdDistribution, eps_grid: Sequence[float], config: AttackerConfig,
              perturbation: Callable[[ThresholdDistribution, float], ThresholdDistribution]
              = scale_perturbation) -> list[tuple[float, float]]:
    """Attacker regret from planning against an ``eps``-inaccurate estimate.

    ``regret(eps) = u(pi*) - u(pi_hat)``, both evaluated under ``F_true``,
    with ``pi_hat`` optimal for ``perturbation(F_true, eps)``.
    """
    best = value_iteration(F_true, config)
    u_star = evaluate_policy(F_true, best.policy, config)
    out = []
    for eps in eps_grid:
        F_hat = perturbation(F_true, float(eps))
        if F_hat == F_true:
            pol = best.policy
        else:
            pol = value_iteration(F_hat, config).policy
        out.append((float(eps), u_star - evaluate_policy(F_true, pol, config)))
    return out

