import math

import numpy as np
import pytest
import scipy.special as ss
from hypothesis import given, settings
from hypothesis import strategies as st

from imitation_portfolio.asymptotics import asymptotic_case1, asymptotic_case2
from imitation_portfolio.constants import solve
from imitation_portfolio.errors import ContractError, DomainError
from imitation_portfolio.market import Trajectory, baseline_spec, uniform_grid
from imitation_portfolio.variational import (
    AnalyticSolution, SolutionParams, boundary_coefficients, el_residual, eq8_zeta, forcing,
    gamma_case1, gamma_case2, general_solution_eval, particular_integrals, solve_gammas)

GRID16 = [(case, theta, a1, a2) for case in (1, 2) for theta in (0.25, 1.0, 4.0, 16.0)
          for a1, a2 in ((0.2, 0.4), (0.4, 0.2))]


@pytest.fixture(scope="module")
def solved():
    cache = {}

    def get(case=1, theta=1.0, a1=0.2, a2=0.4, n=2001):
        key = (case, theta, a1, a2, n)
        if key not in cache:
            cache[key] = solve(baseline_spec(theta=theta, case=case, alpha1=a1, alpha2=a2), n=n)
        return cache[key]
    return get


def brute_particular(x, zeta, eta, spec, n=400_001):
    """Trapezoid on a fine grid with scipy's Bessel functions (independent of ours)."""
    y = np.linspace(1.0, x, n)
    g = forcing(y, zeta, eta, spec)
    return np.trapezoid(ss.i0(y) * g, y), np.trapezoid(ss.k0(y) * g, y)


def test_solution_params_invariants():
    spec = baseline_spec()
    p = SolutionParams.for_spec(spec, 3.0, 0.1)
    assert 0 < p.xi < p.zeta
    with pytest.raises(DomainError):
        SolutionParams.for_spec(spec, -1.0, 0.1)
    with pytest.raises(DomainError):
        SolutionParams.for_spec(spec, 1.0, 0.0)


def test_particular_integrals_empty_interval():
    spec = baseline_spec()
    assert particular_integrals(1.0, SolutionParams.for_spec(spec, 4.0, 0.1), spec) == (0.0, 0.0)


@pytest.mark.parametrize("x", [0.3, 0.9, 2.5, 6.0, 15.0])
def test_particular_integrals_match_brute_force(x):
    spec = baseline_spec()
    zeta, eta = 6.0, 0.1
    fi, fk = particular_integrals(x, SolutionParams.for_spec(spec, zeta, eta), spec)
    bi, bk = brute_particular(x, zeta, eta, spec)
    assert fi == pytest.approx(bi, rel=1e-8, abs=1e-10)
    assert fk == pytest.approx(bk, rel=1e-8, abs=1e-10)


def test_particular_integrals_large_theta_keep_only_first_term():
    spec = baseline_spec(theta=1e12)
    zeta, eta, x = 5.0, 0.1, 4.0
    fi, fk = particular_integrals(x, SolutionParams.for_spec(spec, zeta, eta), spec)
    y = np.linspace(1.0, x, 400_001)
    scale = zeta * spec.market.v * math.exp(-spec.market.r * 50) / (0.4 * spec.market.sigma**2)
    assert fi == pytest.approx(scale * np.trapezoid(ss.i0(y) / y**2, y), rel=1e-8)
    assert fk == pytest.approx(scale * np.trapezoid(ss.k0(y) / y**2, y), rel=1e-8)


def test_particular_integrals_positive_for_positive_forcing():
    spec = baseline_spec()
    zeta, eta = 6.0, 0.01
    # g(y) > 0 below y* = sqrt(first coefficient / second)
    y = np.linspace(1, 3, 50)
    assert np.all(forcing(y, zeta, eta, spec) > 0)
    fi, fk = particular_integrals(3.0, SolutionParams.for_spec(spec, zeta, eta), spec)
    assert fi > 0 and fk > 0


def test_particular_integrals_errors():
    spec = baseline_spec()
    params = SolutionParams.for_spec(spec, 3.0, 0.1)
    with pytest.raises(DomainError):
        particular_integrals(0.0, params, spec)
    with pytest.raises(ContractError):
        particular_integrals(2.0, params, spec.with_(theta=0.0))


@pytest.mark.parametrize("case,theta,a1,a2", GRID16)
def test_boundary_certificates(solved, case, theta, a1, a2):
    s = solved(case, theta, a1, a2)
    spec = s.spec
    p0, r0 = s.solution.evaluate(0.0, with_rate=True)
    pT, rT = s.solution.evaluate(50.0, with_rate=True)
    if case == 1:
        assert p0 == pytest.approx(spec.retail_rational(0.0), rel=1e-8)
        assert pT == pytest.approx(spec.retail_rational(50.0), rel=1e-8)
    else:
        r = spec.market.r
        assert r0 == pytest.approx(r * spec.expert_rational(0.0), rel=1e-6)
        assert rT == pytest.approx(r * spec.expert_rational(50.0), rel=1e-6)


def test_case1_endpoint_values(solved):
    sol = solved(1, 1.0).solution
    assert sol.evaluate(0.0) == pytest.approx(0.702433, abs=1e-6)
    assert sol.evaluate(50.0) == pytest.approx(5.190311, abs=5e-7)


def test_case2_endpoint_rates(solved):
    sol = solved(2, 4.0).solution
    assert sol.rate(50.0) == pytest.approx(0.103806, abs=5e-7)
    assert sol.rate(0.0) == pytest.approx(0.014049, abs=5e-7)


@pytest.mark.parametrize("case,theta", [(1, 0.25), (1, 4.0), (2, 1.0), (2, 16.0)])
def test_closed_form_route_matches_stable_route(solved, case, theta):
    s = solved(case, theta)
    stable = s.solution
    params = solve_gammas(SolutionParams.for_spec(s.spec, stable.zeta, stable.eta), s.spec)
    assert params.gamma1 == pytest.approx(stable.params.gamma1, rel=1e-8, abs=1e-10)
    assert params.gamma2 == pytest.approx(stable.params.gamma2, rel=1e-8, abs=1e-10)
    for t in (0.0, 7.3, 25.0, 50.0):
        assert general_solution_eval(t, params, s.spec) == pytest.approx(stable.evaluate(t), rel=1e-8)


def test_gamma_formulas_reproduce_endpoints(solved):
    s = solved(1, 1.0)
    params = SolutionParams.for_spec(s.spec, s.solution.zeta, s.solution.eta)
    coeffs = boundary_coefficients(params, s.spec)
    g1, g2 = gamma_case1(coeffs, params, s.spec)
    full = SolutionParams.for_spec(s.spec, params.zeta, params.eta, g1, g2)
    assert general_solution_eval(0.0, full, s.spec) == pytest.approx(0.7024322659339758, rel=1e-8)
    assert general_solution_eval(50.0, full, s.spec) == pytest.approx(5.190311418685121, rel=1e-8)


def test_boundary_coefficient_invariants(solved):
    s = solved(2, 4.0)
    params = SolutionParams.for_spec(s.spec, s.solution.zeta, s.solution.eta)
    c = boundary_coefficients(params, s.spec)
    for name in ("iota0_0", "iota0_1", "iota1_0", "iota1_1",
                 "kappa0_0", "kappa0_1", "kappa1_0", "kappa1_1"):
        assert getattr(c, name) > 0
    assert c.itilde == c.itilde_1 - c.itilde_0
    assert c.det_case1 != 0 and c.det_case2 != 0
    with pytest.raises(ContractError):
        gamma_case2(c, params, s.spec.with_(theta=0.0))


def test_equal_risk_aversion_large_theta_matches_limit():
    spec = baseline_spec(theta=1e6, alpha1=0.3, alpha2=0.3)
    sol = solve(spec).solution
    t = uniform_grid(50, 201)
    assert np.max(np.abs(sol.evaluate(t) - asymptotic_case1(spec, t))) <= 1e-6
    assert np.allclose(asymptotic_case1(spec, t), spec.expert_rational(t), rtol=1e-14)


def test_case2_large_theta_matches_limit():
    spec = baseline_spec(theta=1e6, case=2)
    sol = solve(spec).solution
    t = uniform_grid(50, 201)
    assert np.max(np.abs(sol.evaluate(t) - asymptotic_case2(spec, t))) <= 1e-4


def test_el_residual_of_analytic_solution(solved):
    s = solved(1, 1.0, n=4001)
    p = s.solution.trajectory()
    assert el_residual(p, s.solution.params, s.spec) <= 1e-4 * np.max(np.abs(p.values))


def test_el_residual_homogeneous_bessel():
    # theta p'' = eta a1 s^2 e^{2r(T-t)} p for p = I0(zeta e^{-rt}) with zeta from the constant relation
    spec = baseline_spec(theta=1.0)
    eta = 0.1
    zeta = eq8_zeta(eta, spec)
    t = uniform_grid(50, 4001)
    p = ss.i0(zeta * np.exp(-spec.market.r * t))
    h = t[1] - t[0]
    lhs = spec.theta * (p[2:] - 2 * p[1:-1] + p[:-2]) / h**2
    rhs = eta * spec.alpha1 * spec.market.sigma**2 * np.exp(2 * spec.market.r * (50 - t[1:-1])) * p[1:-1]
    assert np.max(np.abs(lhs - rhs)) <= 1e-5 * np.max(np.abs(rhs))


def test_el_residual_rejects_rational_path(solved):
    s = solved(1, 1.0)
    grid = uniform_grid(50, 4001)
    bar = Trajectory(grid, s.spec.retail_rational(grid))
    assert el_residual(bar, s.solution.params, s.spec) > 1e-3


def test_variation_of_parameters_derivative(solved):
    s = solved(1, 1.0)
    params = s.solution.params
    spec = s.spec

    def particular(u):
        fi, fk = particular_integrals(u, params, spec)
        return ss.i0(u) * fk - ss.k0(u) * fi

    for u in (1.5, 2.2, 3.9):
        h = 1e-4
        fd = (particular(u + h) - particular(u - h)) / (2 * h)
        fi, fk = particular_integrals(u, params, spec)
        assert fd == pytest.approx(ss.i1(u) * fk + ss.k1(u) * fi, rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("case", [1, 2])
def test_continuity_in_theta(case):
    a = solve(baseline_spec(theta=1.0, case=case)).solution.values
    b = solve(baseline_spec(theta=1.0 + 1e-6, case=case)).solution.values
    assert np.max(np.abs(a - b)) <= 1e-4


def test_small_theta_approaches_rational():
    t = uniform_grid(50, 201)[1:-1]
    gaps = []
    for theta in (1e-2, 1e-3, 1e-4):
        spec = baseline_spec(theta=theta)
        gaps.append(np.max(np.abs(solve(spec).solution.evaluate(t) - spec.retail_rational(t))))
    assert gaps[0] > gaps[1] > gaps[2]


def test_off_grid_evaluation_is_consistent(solved):
    sol = solved(2, 1.0).solution
    fine = AnalyticSolution(sol.spec, sol.zeta, sol.eta, n=8001)
    t = np.array([0.0123, 3.3, 17.77, 49.999])
    assert np.allclose(sol.evaluate(t), fine.evaluate(t), rtol=1e-11, atol=0)


def test_alternative_case1_endpoints():
    spec = baseline_spec(theta=1.0)
    s = solve(spec, endpoints=(1.0, 4.0))
    assert s.report.converged
    assert s.solution.evaluate(0.0) == pytest.approx(1.0, rel=1e-12)
    assert s.solution.evaluate(50.0) == pytest.approx(4.0, rel=1e-12)


def test_theta_zero_is_rational(solved):
    spec = baseline_spec(theta=0.0, case=2)
    s = solve(spec)
    t = uniform_grid(50, 11)
    assert s.report.method == "rational"
    assert np.array_equal(s.solution.evaluate(t), spec.retail_rational(t))
    with pytest.raises(ContractError):
        AnalyticSolution(spec, 1.0, 1.0)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.5, 30.0), st.sampled_from([1, 2]))
def test_certificates_for_random_theta(theta, case):
    spec = baseline_spec(theta=theta, case=case)
    s = solve(spec, n=1001)
    if case == 1:
        assert s.solution.evaluate(0.0) == pytest.approx(spec.retail_rational(0.0), rel=1e-8)
    else:
        assert s.solution.rate(50.0) == pytest.approx(spec.market.r * spec.expert_rational(50.0), rel=1e-6)
