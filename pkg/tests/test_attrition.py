import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from resilience_lab.attrition import (
    Action,
    DynamicsParams,
    agent_action,
    combined_map,
    limit_fraction,
    simulate,
    step,
    sweep_pinf,
)
from resilience_lab.distributions import EmpiricalAtoms, Exponential, UniformInterval
from resilience_lab.resilience import resilience_combined

from conftest import continuous_dists


def quad_root(H):
    """Smallest root of p^2 - p + H = 0 (uniform baseline fixed point)."""
    return (1.0 - math.sqrt(1.0 - 4.0 * H)) / 2.0


def test_agent_action_examples():
    assert agent_action(0.5, 0.3, 0.0) is Action.STAY
    assert agent_action(0.5, 0.3, 0.5) is Action.LEAVE
    assert agent_action(0.5, 0.5, 0.0) is Action.LEAVE
    with pytest.raises(ValueError):
        agent_action(0.5, 0.3, 1.0)


def test_step_examples(U):
    assert step(U, 0.0, DynamicsParams(H=0.2)) == pytest.approx(0.2)
    assert step(U, 0.2, DynamicsParams(H=0.2)) == pytest.approx(0.25)
    assert step(U, 0.5, DynamicsParams(H=0.2, alpha=0.0, lam=3.0)) == pytest.approx(0.2)


def test_step_division_guard(U, E):
    assert step(E, 1.0, DynamicsParams(H=0.0)) == 1.0
    assert step(U, 1.0, DynamicsParams(H=0.1, alpha=1.0, lam=2.0)) == 1.0
    with pytest.raises(ValueError):
        step(U, 1.2, DynamicsParams(H=0.1))
    with pytest.raises(ValueError):
        step(U, 0.1, DynamicsParams(H=[0.1, 0.2]))


def test_params_validation():
    for kw in ({"H": -0.1}, {"alpha": 1.5}, {"lam": -1}, {"tol": 0.0}, {"max_iter": 0},
               {"H": []}, {"H": [0.1, -0.2]}):
        with pytest.raises(ValueError):
            DynamicsParams(**kw)


@pytest.mark.parametrize("alpha,lam", [(1.0, 0.0), (0.5, 0.0), (1.0, 0.7), (0.3, 2.0)])
def test_combined_map_reduces_to_formula(U, alpha, lam):
    p = np.linspace(0, 0.9, 10)
    want = np.minimum((0.1 + lam * alpha * p) / (1 - alpha * p), 1.0)
    assert np.allclose(combined_map(U, p, 0.1, alpha, lam), want, atol=1e-15)


def test_simulate_examples(U):
    t = simulate(U, DynamicsParams(H=0.2))
    assert t.converged
    assert t.points[0] == 0.0 and t.points[1] == pytest.approx(0.2)
    assert abs(t.limit - quad_root(0.2)) < 1e-9
    assert simulate(U, DynamicsParams(H=0.3)).limit == 1.0
    z = simulate(U, DynamicsParams(H=0.0))
    assert z.limit == 0.0 and z.converged and z.iterations == 1


def test_simulate_reports_cap():
    t = simulate(UniformInterval(0, 1), DynamicsParams(H=0.2499, max_iter=5))
    assert not t.converged and t.iterations == 5 and len(t.points) == 6


def test_simulate_schedule():
    t = simulate(UniformInterval(0, 1), DynamicsParams(H=[0.3, 0.3, 0.0]))
    # heavy harassment first, then none: the departed fraction falls back
    assert t.points[1] == pytest.approx(0.3)
    assert t.converged and t.limit == 0.0


def test_limit_examples(U, E):
    assert limit_fraction(E, DynamicsParams(H=1 / math.e)) == pytest.approx(1 - 1 / math.e, abs=1e-6)
    assert limit_fraction(U, DynamicsParams(H=0.25)) == pytest.approx(0.5, abs=1e-6)
    assert limit_fraction(U, DynamicsParams(H=1.1)) == 1.0
    with pytest.raises(ValueError):
        limit_fraction(U, DynamicsParams(H=0.1), method="newton")


def test_limit_just_above_tangency_is_total(U):
    for H in (0.25 * (1 + 1e-3), 0.25 + 1e-7):
        assert limit_fraction(U, DynamicsParams(H=H)) == 1.0


@given(st.floats(0.0, 0.2499))
def test_limit_quadratic_oracle(H):
    got = limit_fraction(UniformInterval(0, 1), DynamicsParams(H=H))
    assert abs(got - quad_root(H)) < 1e-8


def test_sweep_examples(U, E):
    curve = sweep_pinf(U, [0, 0.1, 0.25, 0.3])
    vals = [p for _, p in curve]
    assert vals[0] == 0.0
    assert vals[1] == pytest.approx(0.1127016654, abs=1e-8)
    assert vals[2] == pytest.approx(0.5, abs=1e-6)
    assert vals[3] == 1.0
    assert sweep_pinf(E, [1 / math.e])[0][1] == pytest.approx(1 - 1 / math.e, abs=1e-6)
    assert sweep_pinf(U, []) == []
    with pytest.raises(ValueError):
        sweep_pinf(U, [0.2, 0.1])
    with pytest.raises(ValueError):
        sweep_pinf(U, [-0.1])


def test_sweep_threads_identical(U):
    grid = np.linspace(0, 0.5, 51)
    assert sweep_pinf(U, grid, workers=1) == sweep_pinf(U, grid, workers=4)


def test_empirical_limit_matches_iteration():
    d = EmpiricalAtoms([0.1, 0.2, 0.2, 0.5, 0.9, 1.5])
    for H in np.linspace(0, 0.6, 25):
        p = DynamicsParams(H=float(H))
        assert limit_fraction(d, p) == pytest.approx(simulate(d, p).limit, abs=1e-9)


scenario = st.tuples(continuous_dists, st.floats(0.0, 1.0), st.floats(0.0, 1.0),
                     st.floats(0.0, 3.0))


@given(scenario)
def test_trajectories_nondecreasing_and_bounded(sc):
    d, h, alpha, lam = sc
    R = resilience_combined(d, alpha, lam).value
    H = h * (R if math.isfinite(R) and R > 0 else 1.0) * 1.5
    t = simulate(d, DynamicsParams(H=H, alpha=alpha, lam=lam, max_iter=20_000))
    assert np.all(np.diff(t.points) >= 0.0)
    assert np.all((t.points >= 0.0) & (t.points <= 1.0))


@given(continuous_dists, st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(0.0, 2.0))
def test_comparative_statics(d, h, alpha, lam):
    tol = 1e-10
    base = limit_fraction(d, DynamicsParams(H=h, alpha=alpha, lam=lam, tol=tol))
    more_H = limit_fraction(d, DynamicsParams(H=h * 1.1 + 0.01, alpha=alpha, lam=lam, tol=tol))
    more_a = limit_fraction(d, DynamicsParams(H=h, alpha=min(1.0, alpha + 0.1), lam=lam, tol=tol))
    more_l = limit_fraction(d, DynamicsParams(H=h, alpha=alpha, lam=lam + 0.3, tol=tol))
    assert more_H >= base - tol
    assert more_a >= base - tol
    assert more_l >= base - tol


@given(continuous_dists, st.floats(0.0, 1.0))
def test_bisection_agrees_with_iteration(d, u):
    R = resilience_combined(d).value
    # keep clear of the critical level, where iteration crawls
    H = R * (0.9 * u if u < 0.5 else 1.1 + u)
    p = DynamicsParams(H=H, tol=1e-12, max_iter=2_000_000)
    it = simulate(d, p)
    assert it.converged
    assert abs(limit_fraction(d, p) - it.limit) <= 10 * 1e-10


@given(continuous_dists)
def test_cross_module_threshold(d):
    R = resilience_combined(d).value
    tol = 1e-10
    assert limit_fraction(d, DynamicsParams(H=R + 10 * tol + 1e-9 * R)) == 1.0
    assert limit_fraction(d, DynamicsParams(H=max(R - 10 * tol - 1e-6 * R, 0.0))) < 1.0
