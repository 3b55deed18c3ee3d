"""Optimal holding paths for a CARA investor who imitates an expert's trading rate."""
from .asymptotics import (AsymptoticDecision, OrderingReport, asymptotic_case1, asymptotic_case2,
                          asymptotic_decision, crossing_time, ordering_check, trajectory_crossing)
from .constants import SolveReport, fixed_point_solve, newton_fallback, residual, solve
from .data import EstimatedParams, PriceSeries, estimate_market_params, load_prices_csv, load_rates_csv
from .errors import (ContractError, ConvergenceError, DomainError, InvariantError, NumericError)
from .market import (BoundaryCase, Investor, MarketParams, ProblemSpec, Trajectory,
                     deterministic_equivalent_eta, expected_utility, integral_disparity, objective,
                     baseline_spec, rational_decision, rational_decision_rate)
from .oracle import (McConfig, OracleConfig, compare_analytic_oracle, mc_expected_utility,
                     optimize_trajectory)
from .special_functions import BesselValue, bessel_i0, bessel_i1, bessel_k0, bessel_k1
from .variational import (AnalyticSolution, BoundaryCoefficients, SolutionParams, el_residual,
                          gamma_case1, gamma_case2, general_solution_eval, particular_integrals)

__all__ = [name for name in dir() if not name.startswith("_")]
