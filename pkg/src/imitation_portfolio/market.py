"""Market and investor parameters, rational decisions and the reduced objective.

For a deterministic holding path ``p`` the terminal wealth of

    dX = (r X + v p) dt + sigma p dW,   X(0) = x1

is Gaussian, so the CARA expected utility has the closed form
``E[-exp(-a X(T)) / a] = -eta / a`` with

    eta = exp(-a x1 e^{rT} - a v int e^{r(T-t)} p dt
              + (a^2 sigma^2 / 2) int e^{2r(T-t)} p^2 dt).

Everything in this module works on that deterministic reduction.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from .errors import ContractError, DomainError, NumericError

DEFAULT_GRID_POINTS = 2001


class BoundaryCase(enum.IntEnum):
    """Boundary conditions of the retail problem.

    CASE1 pins the holding to the rational decision at both ends.
    CASE2 leaves the endpoints free, so the holding's rate must match the
    expert's rate there.
    """

    CASE1 = 1
    CASE2 = 2

    @classmethod
    def parse(cls, value) -> "BoundaryCase":
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower().removeprefix("case")
        try:
            return cls(int(text))
        except (ValueError, TypeError):
            raise ContractError(f"unknown boundary case {value!r}; expected 1 or 2") from None


@dataclass(frozen=True)
class MarketParams:
    r: float = 0.04
    v: float = 0.03
    sigma: float = 0.17

    def __post_init__(self):
        for name in ("r", "v", "sigma"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.r <= 0:
            raise DomainError(f"interest rate r must be > 0, got {self.r}")
        if self.sigma <= 0:
            raise DomainError(f"volatility sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class Investor:
    alpha: float
    x0: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and self.alpha > 0):
            raise DomainError(f"risk aversion alpha must be > 0, got {self.alpha}")
        if not math.isfinite(self.x0):
            raise DomainError("initial wealth must be finite")


@dataclass(frozen=True)
class ProblemSpec:
    """One retail/expert problem instance."""

    market: MarketParams = field(default_factory=MarketParams)
    retail: Investor = field(default_factory=lambda: Investor(alpha=0.2, x0=1.0))
    expert_alpha: float = 0.4
    horizon_T: float = 50.0
    theta: float = 1.0
    boundary_case: BoundaryCase = BoundaryCase.CASE1

    def __post_init__(self):
        if not (math.isfinite(self.expert_alpha) and self.expert_alpha > 0):
            raise DomainError(f"expert risk aversion must be > 0, got {self.expert_alpha}")
        if not (math.isfinite(self.horizon_T) and self.horizon_T > 0):
            raise DomainError(f"horizon T must be > 0, got {self.horizon_T}")
        if not (math.isfinite(self.theta) and self.theta >= 0):
            raise DomainError(f"imitation coefficient theta must be >= 0, got {self.theta}")
        object.__setattr__(self, "boundary_case", BoundaryCase.parse(self.boundary_case))

    @property
    def alpha1(self) -> float:
        return self.retail.alpha

    @property
    def alpha2(self) -> float:
        return self.expert_alpha

    def with_(self, **changes) -> "ProblemSpec":
        return replace(self, **changes)

    def retail_rational(self, t):
        return rational_decision(self.alpha1, self.market, self.horizon_T, t)

    def expert_rational(self, t):
        return rational_decision(self.alpha2, self.market, self.horizon_T, t)


def baseline_spec(theta: float = 1.0, case=1, alpha1: float = 0.2, alpha2: float = 0.4,
                  x1: float = 1.0, T: float = 50.0) -> ProblemSpec:
    """Problem instance with the calibrated Dow Jones market (r=0.04, v=0.03, sigma=0.17)."""
    return ProblemSpec(
        market=MarketParams(r=0.04, v=0.03, sigma=0.17),
        retail=Investor(alpha=alpha1, x0=x1),
        expert_alpha=alpha2,
        horizon_T=T,
        theta=theta,
        boundary_case=BoundaryCase.parse(case),
    )


def uniform_grid(T: float, n: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    if n < 3:
        raise ContractError(f"grid needs at least 3 points, got {n}")
    grid = np.linspace(0.0, T, n)
    grid[-1] = T
    return grid


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Holdings of the risky asset sampled on a time grid over [0, T]."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape:
            raise ContractError("grid and values must be 1-D arrays of equal length")
        if len(grid) < 3:
            raise ContractError("a trajectory needs at least 3 samples")
        if grid[0] != 0.0:
            raise ContractError("trajectory grid must start at t = 0")
        if np.any(np.diff(grid) <= 0):
            raise ContractError("trajectory grid must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise NumericError("trajectory values must be finite")
        grid.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    @property
    def T(self) -> float:
        return float(self.grid[-1])

    def __len__(self) -> int:
        return len(self.grid)

    @classmethod
    def from_function(cls, fn: Callable, T: float, n: int = DEFAULT_GRID_POINTS) -> "Trajectory":
        grid = uniform_grid(T, n)
        return cls(grid, np.broadcast_to(np.asarray(fn(grid), dtype=float), grid.shape).copy())

    def slopes(self) -> np.ndarray:
        """Forward-difference slopes, one per grid interval."""
        return np.diff(self.values) / np.diff(self.grid)

    def interpolate(self, t) -> np.ndarray:
        return np.interp(t, self.grid, self.values)


def _check_time(t, T: float) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    # one ulp of slack so grids built from linspace are accepted at t = T
    if np.any(arr < 0.0) or np.any(arr > T * (1 + 1e-15)) or not np.all(np.isfinite(arr)):
        raise DomainError(f"time must lie in [0, {T}]")
    return arr


def rational_decision(alpha: float, market: MarketParams, T: float, t):
    """Merton holding v e^{r(t-T)} / (alpha sigma^2) of a CARA investor."""
    if alpha <= 0:
        raise DomainError("alpha must be > 0")
    t = _check_time(t, T)
    out = market.v / (alpha * market.sigma**2) * np.exp(market.r * (t - T))
    return float(out) if out.ndim == 0 else out


def rational_decision_rate(alpha: float, market: MarketParams, T: float, t):
    """Time derivative of :func:`rational_decision`, i.e. r times the holding."""
    return market.r * rational_decision(alpha, market, T, t)


def rational_decision_accel(alpha: float, market: MarketParams, T: float, t):
    return market.r**2 * rational_decision(alpha, market, T, t)


def integral_disparity(p: Trajectory, q: Trajectory) -> float:
    """Half the integrated squared difference of the two paths' rates.

    Rates are forward-difference slopes on each grid interval, so the integral
    is exact for piecewise-linear paths.
    """
    if len(p.grid) != len(q.grid) or not np.array_equal(p.grid, q.grid):
        raise ContractError("integral_disparity needs trajectories on identical grids")
    diff = np.diff(p.values - q.values)
    h = np.diff(p.grid)
    return 0.5 * float(np.sum(diff * diff / h))


def log_eta(p: Trajectory, spec: ProblemSpec) -> float:
    """Exponent of the deterministic-equivalent eta, by composite Simpson."""
    m = spec.market
    a = spec.alpha1
    T = spec.horizon_T
    t = p.grid
    if not math.isclose(p.T, T, rel_tol=1e-12):
        raise ContractError(f"trajectory ends at {p.T}, expected T = {T}")
    growth = np.exp(m.r * (T - t))
    with np.errstate(over="ignore", invalid="ignore"):
        linear = simpson(growth * p.values, x=t)
        quadratic = simpson(growth**2 * p.values**2, x=t)
    exponent = -a * spec.retail.x0 * math.exp(m.r * T) - a * m.v * linear \
        + 0.5 * a * a * m.sigma**2 * quadratic
    if not math.isfinite(exponent):
        raise NumericError(
            f"non-finite eta exponent (linear={linear!r}, quadratic={quadratic!r})")
    return float(exponent)


def deterministic_equivalent_eta(p: Trajectory, spec: ProblemSpec) -> float:
    exponent = log_eta(p, spec)
    if not -745.0 < exponent < 709.0:
        raise NumericError(f"eta is not a positive finite number (log eta = {exponent})")
    return math.exp(exponent)


def expected_utility(p: Trajectory, spec: ProblemSpec) -> float:
    """E[phi_1(X_1(T))] = -eta / alpha_1 for a deterministic holding path."""
    return -deterministic_equivalent_eta(p, spec) / spec.alpha1


def mean_terminal_wealth(p: Trajectory, spec: ProblemSpec) -> float:
    m = spec.market
    T = spec.horizon_T
    return spec.retail.x0 * math.exp(m.r * T) + m.v * float(
        simpson(np.exp(m.r * (T - p.grid)) * p.values, x=p.grid))


def expert_trajectory(spec: ProblemSpec, grid: np.ndarray) -> Trajectory:
    return Trajectory(grid, spec.expert_rational(grid))


def objective(p: Trajectory, spec: ProblemSpec) -> float:
    """Expected utility minus theta times the disparity to the expert's rational path."""
    utility = expected_utility(p, spec)
    if spec.theta == 0:
        return utility
    return utility - spec.theta * integral_disparity(p, expert_trajectory(spec, p.grid))
