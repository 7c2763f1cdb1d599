"""Systemic resilience: the least harassment that unravels the whole system.

For a threshold quantile ``Q`` the combined metric is

    R_{alpha,lam}(F) = sup_{p in (0,1)} (1 - alpha*p) Q(p) - lam*alpha*p

with the baseline ``R(F)`` at ``alpha=1, lam=0``. The sup is taken
numerically on a dense grid, polished locally, and compared against the
two endpoint limits. Unbounded objectives are caught by probing the upper
tail in threshold space, where ``p = F(x)`` and the objective reads
``(1 - alpha F(x)) x - lam alpha F(x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, optimize

from .attrition import DynamicsParams, limit_fraction
from .distributions import (
    EmpiricalAtoms,
    Exponential,
    ThresholdDistribution,
    UniformInterval,
    UnsupportedKindError,
    dominates_first_order,
)

__all__ = [
    "ResilienceReport",
    "CriticalFraction",
    "OrderingViolationError",
    "resilience",
    "resilience_combined",
    "closed_form_resilience",
    "auc_resilience",
    "critical_fraction",
    "check_dominance_ordering",
]

GRID_POINTS = 100_000
P_GUARD = 1e-9
DIVERGENCE_GUARD = 1e9
TAIL_PROBES = np.logspace(0, 15, 61)


class OrderingViolationError(AssertionError):
    """A dominant distribution came out strictly less resilient."""


@dataclass(frozen=True)
class ResilienceReport:
    value: float
    maximizer_p: float | None
    alpha: float = 1.0
    lam: float = 0.0
    auc: float | None = None
    auc_range: tuple[float, float] | None = None
    critical_fraction: float | None = None

    @property
    def infinite(self) -> bool:
        return math.isinf(self.value)

    def to_dict(self) -> dict:
        d = {
            "value": self.value,
            "infinite": self.infinite,
            "maximizer_p": self.maximizer_p,
            "alpha": self.alpha,
            "lambda": self.lam,
        }
        if self.auc is not None:
            d["auc"] = self.auc
            d["auc_range"] = list(self.auc_range)
        if self.critical_fraction is not None:
            d["critical_fraction"] = self.critical_fraction
            d["remaining_fraction"] = 1.0 - self.critical_fraction
        return d


@dataclass(frozen=True)
class CriticalFraction:
    harassment: float
    departed: float

    @property
    def remaining(self) -> float:
        return 1.0 - self.departed


def _check_params(alpha, lam):
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if not lam >= 0.0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")


def _empirical(F: EmpiricalAtoms, alpha, lam):
    # Q is constant on ((i-1)/n, i/n]; the objective decreases in p there,
    # so each block's sup sits at its open left edge.
    n = F.n
    left = np.arange(n) / n
    vals = (1.0 - alpha * left) * F.values - lam * alpha * left
    i = int(np.argmax(vals))
    return float(vals[i]), max(float(left[i]), P_GUARD)


def resilience_combined(F: ThresholdDistribution, alpha: float = 1.0, lam: float = 0.0,
                        grid: int = GRID_POINTS,
                        guard: float = DIVERGENCE_GUARD) -> ResilienceReport:
    _check_params(alpha, lam)
    if isinstance(F, EmpiricalAtoms):
        value, p_star = _empirical(F, alpha, lam)
        return ResilienceReport(value, p_star, alpha, lam)

    def objective(p):
        return (1.0 - alpha * p) * F.quantile(p) - lam * alpha * p

    lo, hi = F.support
    if math.isinf(hi):
        xs = TAIL_PROBES * max(1.0, float(F.quantile(0.5)))
        Fx = np.asarray(F.cdf(xs))
        tail = (1.0 - alpha * Fx) * xs - lam * alpha * Fx
        if np.max(tail) > guard:
            return ResilienceReport(math.inf, None, alpha, lam)
        tail_best = float(np.max(tail))
    else:
        # limit of the objective as p -> 1
        tail_best = (1.0 - alpha) * hi - lam * alpha

    ps = np.linspace(P_GUARD, 1.0 - P_GUARD, grid)
    vals = objective(ps)
    k = int(np.argmax(vals))
    best, p_star = float(vals[k]), float(ps[k])
    if np.max(vals) > guard:
        return ResilienceReport(math.inf, None, alpha, lam)

    a, b = ps[max(k - 1, 0)], ps[min(k + 1, grid - 1)]
    res = optimize.minimize_scalar(lambda p: -objective(p), bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-14})
    if -res.fun > best:
        best, p_star = float(-res.fun), float(res.x)

    # Q has kinks where p crosses a knot's CDF level; a sup sitting on a
    # kink is only located to ~sqrt(eps) by the polish, so test them directly
    kinks = np.asarray(F.cdf(F.breakpoints()), dtype=float)
    kinks = kinks[(kinks > P_GUARD) & (kinks < 1.0 - P_GUARD)]
    if kinks.size:
        kv = objective(kinks)
        j = int(np.argmax(kv))
        if kv[j] > best:
            best, p_star = float(kv[j]), float(kinks[j])

    # p -> 0 limit is Q(0+), the lower end of the support
    if lo > best:
        best, p_star = lo, P_GUARD
    if tail_best > best:
        best, p_star = tail_best, 1.0 - P_GUARD
    return ResilienceReport(max(best, 0.0), p_star, alpha, lam)


def resilience(F: ThresholdDistribution, **kw) -> ResilienceReport:
    """Baseline resilience ``sup_p (1-p) Q(p)``."""
    return resilience_combined(F, 1.0, 0.0, **kw)


def _uniform_combined(a, b, alpha, lam):
    # (1 - alpha p)(a + s p) - lam alpha p is a concave quadratic in p
    s = b - a
    if alpha == 0.0:
        return b
    k = s - alpha * a - lam * alpha
    vertex = k / (2.0 * alpha * s)
    if vertex <= 0.0:
        return a
    if vertex >= 1.0:
        return (1.0 - alpha) * b - lam * alpha
    return a + k * k / (4.0 * alpha * s)


def closed_form_resilience(F: ThresholdDistribution, alpha: float = 1.0,
                           lam: float = 0.0) -> float:
    """Analytic resilience for the uniform and exponential families.

    * Uniform[a, b], baseline: ``b^2 / (4 (b - a))``, valid for ``b >= 2a``.
    * Uniform[0, 1], combined: ``1 - alpha(1+lam)`` for ``alpha <= 1/(2+lam)``,
      ``(1 - lam alpha)^2 / (4 alpha)`` up to ``alpha = 1/lam``, then 0.
    * Other uniform cases: vertex of the concave quadratic objective.
    * Exponential(r): infinite for ``alpha < 1``; otherwise
      ``e^{r lam - 1} / r - lam`` for ``r lam <= 1`` and 0 beyond
      (``1/(e r)`` at ``lam = 0``).
    """
    _check_params(alpha, lam)
    if isinstance(F, UniformInterval):
        a, b = F.lower, F.upper
        if alpha == 1.0 and lam == 0.0:
            if b < 2.0 * a:
                raise ValueError("b^2/(4(b-a)) needs b >= 2a; the sup then sits inside (0, 1)")
            return b * b / (4.0 * (b - a))
        if a == 0.0 and b == 1.0:
            if alpha <= 1.0 / (2.0 + lam):
                return 1.0 - alpha * (1.0 + lam)
            if lam == 0.0 or alpha <= 1.0 / lam:
                return (1.0 - lam * alpha) ** 2 / (4.0 * alpha)
            return 0.0
        return _uniform_combined(a, b, alpha, lam)
    if isinstance(F, Exponential):
        if alpha < 1.0:
            return math.inf
        r = F.rate
        # thresholds scale as 1/r, so R(F_r; lam) = R(F_1; r lam) / r
        if r * lam <= 1.0:
            return math.exp(r * lam - 1.0) / r - lam
        return 0.0
    raise UnsupportedKindError(f"no closed form for {F.kind!r} distributions")


def auc_resilience(F: ThresholdDistribution, H_min: float, H_max: float, grid: int = 1001,
                   alpha: float = 1.0, lam: float = 0.0, tol: float = 1e-10) -> float:
    """Trapezoidal area under ``p_inf(H)`` on ``[H_min, H_max]``."""
    if not 0.0 <= H_min < H_max:
        raise ValueError("need 0 <= H_min < H_max")
    if grid < 2:
        raise ValueError("grid must have at least two points")
    Hs = np.linspace(H_min, H_max, grid)
    ps = np.array([limit_fraction(F, DynamicsParams(H=h, alpha=alpha, lam=lam, tol=tol))
                   for h in Hs])
    return float(integrate.trapezoid(ps, Hs))


def critical_fraction(F: ThresholdDistribution, alpha: float = 1.0, lam: float = 0.0,
                      tol: float = 1e-10, scan_points: int = 1 << 20) -> CriticalFraction:
    """Departed fraction just below the critical harassment, at ``R - 10 tol``.

    Exactly at ``R`` the fixed point is a tangency that root bracketing
    cannot resolve reliably, hence the offset.
    """
    report = resilience_combined(F, alpha, lam)
    if report.infinite:
        raise ValueError("resilience is infinite; there is no critical harassment level")
    eps = 10.0 * tol
    if report.value <= eps:
        raise ValueError("resilience is zero; any harassment unravels the system")
    H = report.value - eps
    p = limit_fraction(F, DynamicsParams(H=H, alpha=alpha, lam=lam, tol=tol),
                       scan_points=scan_points)
    return CriticalFraction(H, p)


@dataclass(frozen=True)
class DominanceCheck:
    dominates: bool
    r_dominant: float | None = None
    r_dominated: float | None = None


def check_dominance_ordering(d1: ThresholdDistribution, d2: ThresholdDistribution,
                             slack: float = 1e-9, grid: int = 2001) -> DominanceCheck:
    """If ``d1`` first-order dominates ``d2``, confirm ``R(d1) >= R(d2) - slack``.

    Returns ``DominanceCheck(dominates=False)`` when the pair is not ordered
    and raises :class:`OrderingViolationError` if the ordering fails.
    """
    if not dominates_first_order(d1, d2, grid):
        return DominanceCheck(False)
    r1 = resilience(d1).value
    r2 = resilience(d2).value
    if not r1 >= r2 - slack:
        raise OrderingViolationError(f"R(dominant)={r1} < R(dominated)={r2}")
    return DominanceCheck(True, r1, r2)


def with_auc(report: ResilienceReport, F, H_min, H_max, grid=1001) -> ResilienceReport:
    auc = auc_resilience(F, H_min, H_max, grid, report.alpha, report.lam)
    return replace(report, auc=auc, auc_range=(H_min, H_max))
