"""Threshold distributions for harassment tolerance.

Four kinds are supported, all with support on the nonnegative reals:

* ``UniformInterval(lower, upper)``
* ``Exponential(rate)``
* ``EmpiricalAtoms(values)``, equal mass on each value
* ``PiecewiseLinearCdf(x, F)``, linear interpolation between knots

Every kind exposes ``cdf``, the generalized inverse ``quantile``
(``Q(p) = inf{x : F(x) >= p}``), ``density`` where one exists, and
``support``. The evaluators accept scalars or arrays; scalars in give
floats out.

Sampling is inverse-transform driven by the PCG64 bit generator. Only the
raw 64-bit output stream is used (``random_raw``), which NumPy keeps
stable across versions and platforms, so samples are bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "ThresholdDistribution",
    "UniformInterval",
    "Exponential",
    "EmpiricalAtoms",
    "PiecewiseLinearCdf",
    "UnsupportedKindError",
    "dominates_first_order",
    "cdf_sup_distance",
    "from_spec",
]

SAMPLER = "pcg64-raw53-v1"


class UnsupportedKindError(TypeError):
    """Raised when an operation is not defined for a distribution kind."""


def _scalar_or_array(x, out):
    if np.ndim(x) == 0:
        return float(out)
    return out


def _check_probs(p):
    arr = np.asarray(p, dtype=float)
    if np.any(~(arr > 0.0)) or np.any(~(arr < 1.0)):
        raise ValueError(f"quantile level must lie in (0, 1), got {p!r}")
    return arr


class ThresholdDistribution:
    """Base class. Subclasses implement the ``_cdf``/``_quantile`` kernels on arrays."""

    kind: str = ""
    continuous: bool = True

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _scalar_or_array(x, self._cdf(x))

    def quantile(self, p):
        arr = _check_probs(p)
        return _scalar_or_array(arr, self._quantile(arr))

    def density(self, x):
        raise UnsupportedKindError(f"{self.kind} distribution has no density")

    @property
    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def breakpoints(self) -> np.ndarray:
        """Points where the CDF may jump or change slope."""
        lo, hi = self.support
        return np.array([v for v in (lo, hi) if math.isfinite(v)])

    def scaled(self, factor: float) -> ThresholdDistribution:
        """Distribution of ``factor * theta``."""
        raise NotImplementedError

    def sample(self, n: int, seed: int) -> np.ndarray:
        """Draw ``n`` thresholds by inverse transform; deterministic in ``seed``."""
        if n < 1:
            raise ValueError("sample size must be at least 1")
        raw = np.random.PCG64(seed).random_raw(n)
        # top 53 bits, centred in their cell: u is strictly inside (0, 1)
        u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) / 2.0**53
        return np.asarray(self._quantile(u), dtype=float)

    def to_spec(self) -> dict[str, Any]:
        raise NotImplementedError

    def _upper_probe(self) -> float:
        """A finite point above essentially all of the mass."""
        hi = self.support[1]
        if math.isfinite(hi):
            return hi
        return float(self._quantile(np.array([1.0 - 1e-12]))[0])


@dataclass(frozen=True)
class UniformInterval(ThresholdDistribution):
    lower: float = 0.0
    upper: float = 1.0
    kind: str = field(default="uniform", init=False, repr=False)

    def __post_init__(self):
        if not (self.lower >= 0.0 and self.upper > self.lower and math.isfinite(self.upper)):
            raise ValueError(f"need 0 <= lower < upper < inf, got [{self.lower}, {self.upper}]")

    @property
    def support(self):
        return (float(self.lower), float(self.upper))

    def _cdf(self, x):
        return np.clip((x - self.lower) / (self.upper - self.lower), 0.0, 1.0)

    def _quantile(self, p):
        return self.lower + p * (self.upper - self.lower)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lower) & (x <= self.upper)
        return _scalar_or_array(x, np.where(inside, 1.0 / (self.upper - self.lower), 0.0))

    def scaled(self, factor):
        return UniformInterval(self.lower * factor, self.upper * factor)

    def to_spec(self):
        return {"kind": "uniform", "lower": self.lower, "upper": self.upper}


@dataclass(frozen=True)
class Exponential(ThresholdDistribution):
    rate: float = 1.0
    kind: str = field(default="exponential", init=False, repr=False)

    def __post_init__(self):
        if not (self.rate > 0.0 and math.isfinite(self.rate)):
            raise ValueError(f"rate must be positive, got {self.rate}")

    @property
    def support(self):
        return (0.0, math.inf)

    def _cdf(self, x):
        with np.errstate(over="ignore"):
            return np.where(x > 0.0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)

    def _quantile(self, p):
        return -np.log1p(-p) / self.rate

    def density(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(x >= 0.0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)
        return _scalar_or_array(x, out)

    def scaled(self, factor):
        return Exponential(self.rate / factor)

    def to_spec(self):
        return {"kind": "exponential", "rate": self.rate}


@dataclass(frozen=True, eq=False)
class EmpiricalAtoms(ThresholdDistribution):
    """Equal-mass atoms. Values are sorted on construction."""

    values: np.ndarray
    kind: str = field(default="empirical", init=False, repr=False)
    continuous: bool = field(default=False, init=False, repr=False)

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=float).ravel())
        if v.size == 0:
            raise ValueError("empirical distribution needs at least one atom")
        if not np.all(np.isfinite(v)) or v[0] < 0.0:
            raise ValueError("atoms must be finite and nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __eq__(self, other):
        return isinstance(other, EmpiricalAtoms) and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def support(self):
        return (float(self.values[0]), float(self.values[-1]))

    def breakpoints(self):
        return np.unique(self.values)

    def _cdf(self, x):
        return np.searchsorted(self.values, x, side="right") / self.n

    def _quantile(self, p):
        n = self.n
        k = np.ceil(p * n).astype(np.int64)
        # keep the rank consistent with cdf's own count/n arithmetic
        k = np.where((k - 1) / n >= p, k - 1, k)
        k = np.clip(k, 1, n)
        return self.values[k - 1]

    def scaled(self, factor):
        return EmpiricalAtoms(self.values * factor)

    def to_spec(self):
        return {"kind": "empirical", "values": self.values.tolist()}


@dataclass(frozen=True, eq=False)
class PiecewiseLinearCdf(ThresholdDistribution):
    """CDF through knots ``(x_i, F_i)``, linear in between, 0 below ``x_0``.

    Repeated ``x`` values encode jumps; the CDF is right-continuous there.
    """

    x: np.ndarray
    F: np.ndarray
    kind: str = field(default="piecewise", init=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel().copy()
        F = np.asarray(self.F, dtype=float).ravel().copy()
        if x.size < 2 or x.size != F.size:
            raise ValueError("need at least two knots with matching x and F")
        if x[0] < 0.0 or np.any(np.diff(x) < 0.0) or not np.all(np.isfinite(x)):
            raise ValueError("knot positions must be finite, nonnegative and nondecreasing")
        if F[0] < 0.0 or np.any(np.diff(F) < 0.0) or F[-1] != 1.0:
            raise ValueError("knot probabilities must be nondecreasing in [0, 1] and end at 1")
        if x[-1] <= x[0]:
            raise ValueError("knots must span a nonempty interval")
        x.setflags(write=False)
        F.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "F", F)

    def __eq__(self, other):
        return (
            isinstance(other, PiecewiseLinearCdf)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.F, other.F)
        )

    def __hash__(self):
        return hash((self.x.tobytes(), self.F.tobytes()))

    @property
    def support(self):
        return (float(self.x[0]), float(self.x[-1]))

    def breakpoints(self):
        return np.unique(self.x)

    def _segment(self, x):
        # last knot with x_i <= x; the segment to its right is non-degenerate
        i = np.searchsorted(self.x, x, side="right") - 1
        return np.clip(i, 0, self.x.size - 2), i

    def _cdf(self, x):
        i, raw = self._segment(x)
        x0, x1 = self.x[i], self.x[i + 1]
        F0, F1 = self.F[i], self.F[i + 1]
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(x1 > x0, (x - x0) / (x1 - x0), 1.0)
        val = F0 + np.clip(t, 0.0, 1.0) * (F1 - F0)
        val = np.where(raw < 0, 0.0, val)
        return np.where(raw >= self.x.size - 1, 1.0, val)

    def _quantile(self, p):
        k = np.searchsorted(self.F, p, side="left")
        k = np.clip(k, 0, self.F.size - 1)
        km = np.maximum(k - 1, 0)
        F0, F1 = self.F[km], self.F[k]
        x0, x1 = self.x[km], self.x[k]
        with np.errstate(invalid="ignore", divide="ignore"):
            t = np.where(F1 > F0, (p - F0) / (F1 - F0), 1.0)
        return np.where(k == 0, self.x[0], x0 + t * (x1 - x0))

    def density(self, x):
        x = np.asarray(x, dtype=float)
        i, raw = self._segment(x)
        dx = self.x[i + 1] - self.x[i]
        with np.errstate(invalid="ignore", divide="ignore"):
            slope = np.where(dx > 0, (self.F[i + 1] - self.F[i]) / dx, 0.0)
        inside = (raw >= 0) & (raw < self.x.size - 1)
        return _scalar_or_array(x, np.where(inside, slope, 0.0))

    def scaled(self, factor):
        return PiecewiseLinearCdf(self.x * factor, self.F)

    def to_spec(self):
        return {"kind": "piecewise", "x": self.x.tolist(), "F": self.F.tolist()}


def _union_grid(d1: ThresholdDistribution, d2: ThresholdDistribution, grid: int) -> np.ndarray:
    lo = min(d1.support[0], d2.support[0])
    hi = max(d1._upper_probe(), d2._upper_probe())
    pts = [np.linspace(lo, hi, grid)]
    for d in (d1, d2):
        bp = d.breakpoints()
        pts.append(bp)
        pts.append(np.nextafter(bp, -np.inf))
    xs = np.concatenate(pts)
    return np.unique(xs[xs >= 0.0])


def dominates_first_order(d1: ThresholdDistribution, d2: ThresholdDistribution,
                          grid: int = 2001) -> bool:
    """True iff ``d1`` first-order stochastically dominates ``d2``.

    Checked as ``cdf(d1) <= cdf(d2)`` on a grid over the union of supports
    (plus every breakpoint), with strict inequality somewhere.
    """
    if grid < 2:
        raise ValueError("grid must have at least two points")
    xs = _union_grid(d1, d2, grid)
    F1 = np.asarray(d1.cdf(xs))
    F2 = np.asarray(d2.cdf(xs))
    return bool(np.all(F1 <= F2 + 1e-12) and np.any(F1 < F2 - 1e-12))


def cdf_sup_distance(d1: ThresholdDistribution, d2: ThresholdDistribution,
                     grid: int = 20001) -> float:
    """Kolmogorov distance ``sup_x |F1(x) - F2(x)|`` (grid search plus local polish)."""
    xs = _union_grid(d1, d2, grid)
    diff = np.abs(np.asarray(d1.cdf(xs)) - np.asarray(d2.cdf(xs)))
    k = int(np.argmax(diff))
    best = float(diff[k])
    if d1.continuous and d2.continuous and 0 < k < xs.size - 1:
        res = optimize.minimize_scalar(
            lambda t: -abs(d1.cdf(t) - d2.cdf(t)),
            bounds=(xs[k - 1], xs[k + 1]), method="bounded",
            options={"xatol": 1e-13},
        )
        best = max(best, -float(res.fun))
    return best


def density_mass(d: ThresholdDistribution) -> float:
    """Integral of the density over the support, by adaptive quadrature."""
    lo, hi = d.support
    pts = [b for b in d.breakpoints() if lo < b < hi] if math.isfinite(hi) else None
    val, _ = integrate.quad(lambda t: d.density(t), lo, hi, points=pts or None,
                            limit=200, epsabs=1e-12, epsrel=1e-12)
    return float(val)


def from_spec(spec: dict[str, Any]) -> ThresholdDistribution:
    """Build a distribution from its JSON form.

    ``{"kind": "uniform", "lower": a, "upper": b}``,
    ``{"kind": "exponential", "rate": r}``,
    ``{"kind": "empirical", "values": [...]}``,
    ``{"kind": "piecewise", "x": [...], "F": [...]}``.
    """
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValueError("distribution spec must be an object with a 'kind' field")
    kind = spec["kind"]
    extra = set(spec) - {"kind"}
    try:
        if kind == "uniform":
            _only(extra, {"lower", "upper"})
            return UniformInterval(float(spec.get("lower", 0.0)), float(spec.get("upper", 1.0)))
        if kind == "exponential":
            _only(extra, {"rate"})
            return Exponential(float(spec.get("rate", 1.0)))
        if kind == "empirical":
            _only(extra, {"values"})
            return EmpiricalAtoms(np.asarray(spec["values"], dtype=float))
        if kind == "piecewise":
            _only(extra, {"x", "F"})
            return PiecewiseLinearCdf(np.asarray(spec["x"], dtype=float),
                                      np.asarray(spec["F"], dtype=float))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"bad {kind!r} distribution spec: {exc}") from exc
    raise ValueError(f"unknown distribution kind {kind!r}")


def _only(keys, allowed):
    unknown = keys - allowed
    if unknown:
        raise ValueError(f"unknown distribution fields: {sorted(unknown)}")
