"""Large-theta limits of the optimal holding and the ordering diagnostics.

As theta grows the imitation penalty dominates, so the optimal rate is pinned
to the expert's rate. With fixed endpoints (case 1) the limit is the expert's
rational path plus a linear correction that restores both endpoints. With free
endpoints (case 2) it is the expert's path shifted by a constant, and that
shifted path meets the retail rational path at a single time ``tau``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractError, InvariantError
from .market import BoundaryCase, ProblemSpec, Trajectory, _check_time

ORDERING_MARGIN = 1e-12
CROSSING_TOL = 1e-6


@dataclass(frozen=True)
class AsymptoticDecision:
    """``expert_rational(t) + offset_const + slope * t``."""

    case: BoundaryCase
    offset_const: float
    slope: float
    spec: ProblemSpec

    def __call__(self, t):
        t = _check_time(t, self.spec.horizon_T)
        out = self.spec.expert_rational(t) + self.offset_const + self.slope * t
        return float(out) if np.ndim(out) == 0 else out

    def trajectory(self, grid: np.ndarray) -> Trajectory:
        return Trajectory(grid, self(grid))


def _gap_scale(spec: ProblemSpec) -> float:
    m = spec.market
    return m.v * (1.0 / spec.alpha1 - 1.0 / spec.alpha2) / m.sigma**2


def asymptotic_decision(spec: ProblemSpec) -> AsymptoticDecision:
    m, T = spec.market, spec.horizon_T
    c = _gap_scale(spec)
    if spec.boundary_case is BoundaryCase.CASE1:
        decay = math.exp(-m.r * T)
        return AsymptoticDecision(spec.boundary_case, c * decay, c * (-math.expm1(-m.r * T)) / T, spec)
    # (e^{rT} - 1) / (e^{2rT} - 1) = 1 / (e^{rT} + 1)
    return AsymptoticDecision(spec.boundary_case, 2.0 * c / (math.exp(m.r * T) + 1.0), 0.0, spec)


def asymptotic_case1(spec: ProblemSpec, t):
    """Fixed-endpoint limit: matches the retail rational holding at 0 and T."""
    return asymptotic_decision(spec.with_(boundary_case=BoundaryCase.CASE1))(t)


def asymptotic_case2(spec: ProblemSpec, t):
    """Free-endpoint limit: the expert's rational path shifted by a constant."""
    return asymptotic_decision(spec.with_(boundary_case=BoundaryCase.CASE2))(t)


def crossing_time(spec: ProblemSpec) -> float:
    """Time at which the free-endpoint limit meets the retail rational holding.

    Depends only on r and T. Raises :class:`InvariantError` if the result
    leaves [0, T], which would contradict the ordering result it supports.
    """
    r, T = spec.market.r, spec.horizon_T
    # T + ln((e^{rT}-1)/(e^{2rT}-1))/r + ln2/r, with the ratio simplified
    tau = T + (math.log(2.0) - (r * T + math.log1p(math.exp(-r * T)))) / r
    if not 0.0 <= tau <= T:
        raise InvariantError(f"crossing time {tau} lies outside [0, {T}]")
    return tau


def numeric_crossing(diff: Callable[[float], float], lo: float, hi: float,
                     tol: float = CROSSING_TOL) -> float:
    """Bisection for a sign change of ``diff`` on [lo, hi]."""
    f_lo, f_hi = diff(lo), diff(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo > 0) == (f_hi > 0):
        raise ContractError(f"no sign change on [{lo}, {hi}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = diff(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def trajectory_crossing(p, spec: ProblemSpec, tol: float = CROSSING_TOL) -> float | None:
    """First time where ``p`` crosses the retail rational holding, or None.

    ``p`` is a :class:`Trajectory` (linearly interpolated) or any callable of t.
    The grid is scanned for a sign change, which is then refined by bisection.
    """
    T = spec.horizon_T
    fn = p.interpolate if isinstance(p, Trajectory) else p
    grid = p.grid if isinstance(p, Trajectory) else np.linspace(0.0, T, 2001)
    diff = np.asarray(fn(grid)) - spec.retail_rational(grid)
    sign = np.sign(diff)
    idx = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    if len(idx) == 0:
        zeros = np.nonzero(sign == 0)[0]
        return float(grid[zeros[0]]) if len(zeros) else None
    j = idx[0]
    return numeric_crossing(lambda s: float(fn(s)) - spec.retail_rational(s),
                            float(grid[j]), float(grid[j + 1]), tol)


@dataclass
class OrderingReport:
    violations: int
    worst_margin: float
    checked: int
    tau: float | None
    case: BoundaryCase
    exempt: int = 0

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {"violations": self.violations, "worst_margin": self.worst_margin,
                "checked": self.checked, "tau": self.tau, "case": int(self.case),
                "exempt": self.exempt}


def ordering_check(p: Trajectory, spec: ProblemSpec, tau: float | None = None,
                   margin: float = ORDERING_MARGIN, tau_tol: float = CROSSING_TOL) -> OrderingReport:
    """Count grid points where ``p`` breaks the predicted orderings.

    Case 1, alpha1 < alpha2: p >= P1_bar > P2_bar everywhere (reversed when
    alpha1 > alpha2). Case 2, alpha1 < alpha2: p >= P1_bar > P2_bar before
    ``tau`` and P1_bar >= p > P2_bar after it (again reversed for alpha1 >
    alpha2). ``tau`` defaults to the crossing of ``p`` itself; grid points
    within ``tau_tol`` of it are exempt. ``worst_margin`` is the smallest slack
    over all inequalities (negative means a violation). With alpha1 = alpha2
    all three curves must coincide within ``margin``.
    """
    t = p.grid
    if not math.isclose(p.T, spec.horizon_T, rel_tol=1e-12):
        raise ContractError("trajectory does not span [0, T]")
    p1 = spec.retail_rational(t)
    p2 = spec.expert_rational(t)
    x = p.values
    case = spec.boundary_case
    if spec.alpha1 == spec.alpha2:
        slack = -np.maximum(np.abs(x - p1), np.abs(p1 - p2))
        bad = slack < -margin
        return OrderingReport(int(bad.sum()), float(slack.min()), len(t), tau, case)
    sign = 1.0 if spec.alpha1 < spec.alpha2 else -1.0
    exempt = np.zeros(len(t), dtype=bool)
    if case is BoundaryCase.CASE1:
        slack_p = sign * (x - p1)
    else:
        if tau is None:
            tau = trajectory_crossing(p, spec, tau_tol)
        cut = spec.horizon_T if tau is None else tau
        before = t <= cut
        slack_p = np.where(before, sign * (x - p1), sign * (p1 - x))
        if tau is not None:
            exempt = np.abs(t - tau) <= tau_tol
    # strict part: P1_bar vs P2_bar, and p vs P2_bar
    strict = sign * np.minimum(p1 - p2, x - p2) if case is BoundaryCase.CASE2 else sign * (p1 - p2)
    bad = ((slack_p < -margin) | (strict <= margin)) & ~exempt
    worst = float(np.min(np.minimum(slack_p, strict)[~exempt])) if np.any(~exempt) else math.inf
    return OrderingReport(int(bad.sum()), worst, int((~exempt).sum()), tau, case, int(exempt.sum()))
