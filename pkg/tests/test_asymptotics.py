import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from imitation_portfolio.asymptotics import (
    asymptotic_case1, asymptotic_case2, asymptotic_decision, crossing_time, numeric_crossing,
    ordering_check, trajectory_crossing)
from imitation_portfolio.constants import solve
from imitation_portfolio.errors import ContractError, DomainError
from imitation_portfolio.market import MarketParams, Trajectory, baseline_spec, uniform_grid

SPEC = baseline_spec()
GRID = uniform_grid(50, 2001)
mpmath.mp.dps = 30


def mp_limit_case1(t, a1=0.2, a2=0.4, r=0.04, v=0.03, s=0.17, T=50):
    r, v, s, T, t = map(mpmath.mpf, (r, v, s, T, t))
    c = v * (1 / mpmath.mpf(a1) - 1 / mpmath.mpf(a2)) / s**2
    p2 = v / (mpmath.mpf(a2) * s**2) * mpmath.exp(r * (t - T))
    return float(p2 + c * (1 - mpmath.exp(-r * T)) / T * t + c * mpmath.exp(-r * T))


def test_case1_limit_values():
    assert asymptotic_case1(SPEC, 0.0) == pytest.approx(0.702433, abs=1e-6)
    assert asymptotic_case1(SPEC, 50.0) == pytest.approx(5.190311, abs=1e-6)
    # 0.954704 + 1.121975 + 0.351216 (the expert holding at t = 25 is 0.954704)
    assert asymptotic_case1(SPEC, 25.0) == pytest.approx(mp_limit_case1(25), rel=1e-14)
    assert asymptotic_case1(SPEC, 25.0) == pytest.approx(2.427890, abs=1e-6)


def test_case1_endpoint_identity():
    for a1, a2 in ((0.2, 0.4), (0.4, 0.2), (1.3, 0.05)):
        spec = baseline_spec(alpha1=a1, alpha2=a2)
        assert asymptotic_case1(spec, 0.0) == pytest.approx(spec.retail_rational(0.0), rel=1e-14)
        assert asymptotic_case1(spec, 50.0) == pytest.approx(spec.retail_rational(50.0), rel=1e-14)


def test_case2_limit_values():
    lim = asymptotic_decision(SPEC.with_(boundary_case=2))
    assert lim.slope == 0.0
    assert lim.offset_const == pytest.approx(0.618703, abs=5e-6)
    assert asymptotic_case2(SPEC, 0.0) == pytest.approx(0.969919, abs=5e-6)
    assert asymptotic_case2(SPEC, 0.0) == pytest.approx(SPEC.expert_rational(0.0) + lim.offset_const, rel=1e-15)


def test_case2_is_pure_shift():
    p = asymptotic_case2(SPEC, GRID)
    assert np.allclose(np.diff(p), np.diff(SPEC.expert_rational(GRID)), rtol=0, atol=1e-14)


def test_equal_risk_aversion_gives_expert_path():
    spec = baseline_spec(alpha1=0.3, alpha2=0.3)
    assert np.array_equal(asymptotic_case2(spec, GRID), spec.expert_rational(GRID))
    assert np.allclose(asymptotic_case1(spec, GRID), spec.expert_rational(GRID), rtol=1e-15)


def test_sign_of_offset_and_slope():
    for a1, a2, sign in ((0.2, 0.4, 1), (0.4, 0.2, -1)):
        for case in (1, 2):
            lim = asymptotic_decision(baseline_spec(case=case, alpha1=a1, alpha2=a2))
            assert np.sign(lim.offset_const) == sign
            if case == 1:
                assert np.sign(lim.slope) == sign


def test_crossing_time_value():
    tau = crossing_time(SPEC)
    assert tau == pytest.approx(14.156, abs=1e-3)
    r, T = mpmath.mpf("0.04"), mpmath.mpf(50)
    exact = T + mpmath.log((mpmath.exp(r * T) - 1) / (mpmath.exp(2 * r * T) - 1)) / r + mpmath.log(2) / r
    assert tau == pytest.approx(float(exact), rel=1e-14)


def test_limit_meets_rational_at_crossing():
    tau = crossing_time(SPEC)
    assert asymptotic_case2(SPEC, tau) == pytest.approx(SPEC.retail_rational(tau), rel=1e-9)


@given(st.floats(0.05, 5), st.floats(0.05, 5), st.floats(0.01, 1), st.floats(0.05, 1))
def test_crossing_time_ignores_preferences(a1, a2, v, sigma):
    spec = baseline_spec(alpha1=a1, alpha2=a2).with_(market=MarketParams(r=0.04, v=v, sigma=sigma))
    assert crossing_time(spec) == crossing_time(SPEC)


@given(st.floats(1e-3, 0.5), st.floats(0.5, 200))
def test_crossing_time_in_horizon(r, T):
    spec = baseline_spec(T=T).with_(market=MarketParams(r=r))
    assert 0 <= crossing_time(spec) <= T


def test_domain():
    with pytest.raises(DomainError):
        asymptotic_case1(SPEC, 51.0)


@pytest.mark.parametrize("case", [1, 2])
@pytest.mark.parametrize("a1,a2", [(0.2, 0.4), (0.4, 0.2)])
def test_limit_paths_satisfy_orderings(case, a1, a2):
    spec = baseline_spec(case=case, alpha1=a1, alpha2=a2)
    lim = asymptotic_decision(spec).trajectory(GRID)
    tau = crossing_time(spec) if case == 2 else None
    rep = ordering_check(lim, spec, tau=tau)
    assert rep.violations == 0
    if case == 2:
        assert rep.tau == pytest.approx(14.156, abs=1e-3)


def test_orderings_degenerate_equal_alpha():
    spec = baseline_spec(alpha1=0.3, alpha2=0.3)
    rep = ordering_check(asymptotic_decision(spec).trajectory(GRID), spec)
    assert rep.violations == 0


def test_ordering_check_detects_violations():
    spec = baseline_spec()
    below = Trajectory(GRID, spec.retail_rational(GRID) - 0.01)
    rep = ordering_check(below, spec)
    assert rep.violations == len(GRID) and rep.worst_margin < 0


def test_case2_ordering_flags_wrong_side():
    spec = baseline_spec(case=2)
    # above the rational path everywhere: wrong after tau
    p = Trajectory(GRID, spec.retail_rational(GRID) + 0.01)
    rep = ordering_check(p, spec, tau=crossing_time(spec))
    assert rep.violations > 0


@pytest.mark.parametrize("case", [1, 2])
@pytest.mark.parametrize("a1,a2", [(0.2, 0.4), (0.4, 0.2)])
def test_finite_theta_orderings_and_crossing(case, a1, a2):
    taus = []
    for theta in (0.25, 1.0, 4.0, 16.0):
        spec = baseline_spec(theta=theta, case=case, alpha1=a1, alpha2=a2)
        sol = solve(spec).solution
        rep = ordering_check(sol.trajectory(), spec)
        assert rep.violations == 0
        if case == 2:
            tau = trajectory_crossing(sol.evaluate, spec)
            assert abs(sol.evaluate(tau) - spec.retail_rational(tau)) < 1e-6
            taus.append(tau)
    if case == 2:
        # tau(theta) moves towards the limiting crossing time as theta grows
        assert all(abs(x - 14.1555) > abs(y - 14.1555) for x, y in zip(taus, taus[1:]))


@pytest.mark.parametrize("case", [1, 2])
@pytest.mark.parametrize("a1,a2", [(0.2, 0.4), (0.4, 0.2)])
def test_convergence_to_limit(case, a1, a2):
    gaps = []
    for theta in (1e2, 1e3, 1e4):
        spec = baseline_spec(theta=theta, case=case, alpha1=a1, alpha2=a2)
        p = solve(spec).solution.trajectory()
        lim = asymptotic_decision(spec)(p.grid)
        gaps.append(np.max(np.abs(p.values - lim)) / np.max(np.abs(lim)))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] <= 1e-3


def test_numeric_crossing():
    assert numeric_crossing(lambda x: x - math.pi, 0, 10, 1e-9) == pytest.approx(math.pi, abs=1e-9)
    with pytest.raises(ContractError):
        numeric_crossing(lambda x: x + 1, 0, 1)
