"""Bessel-function solution of the retail investor's variational problem.

With ``u = zeta * exp(-r t)`` the stationarity condition of the reduced
objective becomes an inhomogeneous modified Bessel equation of order zero,
so the optimal holding is

    P(t) = g1 I0(u) + g2 K0(u) + I0(u) FK(u) - K0(u) FI(u),

where ``FI(x) = int_1^x I0(y) g(y) dy``, ``FK(x) = int_1^x K0(y) g(y) dy``
and ``g`` is the forcing from :func:`forcing`. ``zeta`` and ``eta`` are the two
self-consistent constants solved by :mod:`imitation_portfolio.constants`.

Two evaluation routes exist:

* :func:`boundary_coefficients` / :func:`gamma_case1` / :func:`gamma_case2` /
  :func:`general_solution_eval` follow the closed-form expressions literally
  (integrals anchored at 1). They are exact but lose digits once ``I0(zeta)``
  is large, and overflow once ``zeta`` passes about 700.
* :class:`AnalyticSolution` rewrites the particular term in Green's-function
  form (K-integral anchored at ``zeta``, I-integral at ``xi``) so every
  exponential factor it multiplies is at most 1. This is the route used by the
  solver. It reports ``gamma1``/``gamma2`` in the closed-form convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import special_functions as sf
from .errors import ContractError, DomainError, NumericError
from .market import (
    DEFAULT_GRID_POINTS,
    BoundaryCase,
    ProblemSpec,
    Trajectory,
    rational_decision,
    rational_decision_accel,
    rational_decision_rate,
    uniform_grid,
)

SINGULAR_GUARD = 1e-300
GL_ORDER = 8
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)
_GL_X = 0.5 * (_GL_X + 1.0)  # nodes on [0, 1]
_GL_W = 0.5 * _GL_W


@dataclass(frozen=True)
class SolutionParams:
    zeta: float
    eta: float
    gamma1: float = float("nan")
    gamma2: float = float("nan")
    boundary_case: BoundaryCase = BoundaryCase.CASE1
    T: float = 50.0
    r: float = 0.04

    def __post_init__(self):
        if not (self.zeta > 0 and math.isfinite(self.zeta)):
            raise DomainError(f"zeta must be positive and finite, got {self.zeta}")
        if not (self.eta > 0 and math.isfinite(self.eta)):
            raise DomainError(f"eta must be positive and finite, got {self.eta}")

    @property
    def xi(self) -> float:
        return self.zeta * math.exp(-self.r * self.T)

    @classmethod
    def for_spec(cls, spec: ProblemSpec, zeta: float, eta: float, gamma1=float("nan"),
                 gamma2=float("nan")) -> "SolutionParams":
        return cls(zeta=zeta, eta=eta, gamma1=gamma1, gamma2=gamma2,
                   boundary_case=spec.boundary_case, T=spec.horizon_T, r=spec.market.r)


@dataclass(frozen=True)
class BoundaryCoefficients:
    """Bessel values and particular integrals at the two ends u = zeta, u = xi.

    Superscript 0 refers to u = zeta (t = 0), superscript 1 to u = xi (t = T).
    """

    iota0_0: float
    iota0_1: float
    iota1_0: float
    iota1_1: float
    kappa0_0: float
    kappa0_1: float
    kappa1_0: float
    kappa1_1: float
    itilde_0: float
    itilde_1: float
    ktilde_0: float
    ktilde_1: float

    @property
    def itilde(self) -> float:
        return self.itilde_1 - self.itilde_0

    @property
    def ktilde(self) -> float:
        return self.ktilde_1 - self.ktilde_0

    @property
    def det_case1(self) -> float:
        return self.iota0_0 * self.kappa0_1 - self.iota0_1 * self.kappa0_0

    @property
    def det_case2(self) -> float:
        return self.iota1_0 * self.kappa1_1 - self.iota1_1 * self.kappa1_0


def eq8_zeta(eta: float, spec: ProblemSpec) -> float:
    """zeta = (sigma e^{rT} / r) sqrt(eta alpha_1 / theta)."""
    m = spec.market
    if spec.theta <= 0:
        raise ContractError("zeta is undefined for theta = 0")
    return m.sigma * math.exp(m.r * spec.horizon_T) / m.r * math.sqrt(eta * spec.alpha1 / spec.theta)


def forcing(y, zeta: float, eta: float, spec: ProblemSpec):
    """g(y) = zeta v e^{-rT} / (alpha_2 sigma^2 y^2) - eta v e^{rT} / (zeta r^2 theta)."""
    if spec.theta <= 0:
        raise ContractError("the forcing term is undefined for theta = 0")
    m = spec.market
    T = spec.horizon_T
    y = np.asarray(y, dtype=float)
    # divide twice: y * y overflows for the huge zeta of an early fixed-point sweep
    first = m.v * math.exp(-m.r * T) / (spec.alpha2 * m.sigma**2) * (zeta / y) / y
    second = eta * m.v * math.exp(m.r * T) / (zeta * m.r**2 * spec.theta)
    return first - second


# ---------------------------------------------------------------------------
# closed-form route


def adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = 60):
    """Adaptive Simpson quadrature of a vector-valued ``f`` over [a, b].

    ``f`` maps an array of abscissae of shape (n,) to shape (k, n). Panels are
    bisected until the Richardson estimate of each component is below the
    panel's share of ``tol``.
    """
    if a == b:
        return np.zeros(np.asarray(f(np.array([a]))).shape[0])
    fa, fm, fb = np.asarray(f(np.array([a, 0.5 * (a + b), b]))).T
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    total = np.zeros_like(whole)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, est, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        fl, fr = np.asarray(f(np.array([0.5 * (lo + mid), 0.5 * (mid + hi)]))).T
        left = (mid - lo) / 6.0 * (flo + 4.0 * fl + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * fr + fhi)
        delta = left + right - est
        if depth >= max_depth or np.all(np.abs(delta) <= 15.0 * eps):
            total += left + right + delta / 15.0
        else:
            stack.append((lo, mid, flo, fl, fmid, left, 0.5 * eps, depth + 1))
            stack.append((mid, hi, fmid, fr, fhi, right, 0.5 * eps, depth + 1))
    return total


def particular_integrals(x: float, params: SolutionParams, spec: ProblemSpec,
                         tol: float = 1e-10) -> tuple[float, float]:
    """Oriented integrals (FI(x), FK(x)) = int_1^x (I0, K0)(y) g(y) dy.

    Integrated in log-space, y = e^s, where the 1/y^2 term of ``g`` is smooth.
    The I-integrand carries the factor exp(-max(1, x)), so ``tol`` bounds the
    error of that scaled integral when x > 1.
    """
    if spec.theta <= 0:
        raise ContractError("particular integrals are undefined for theta = 0")
    if not (x > 0 and math.isfinite(x)):
        raise DomainError(f"particular integrals need x > 0, got {x}")
    shift = max(1.0, x)

    def integrand(s):
        y = np.exp(s)
        gy = forcing(y, params.zeta, params.eta, spec) * y
        i_part = sf.i0e(y) * np.exp(y - shift) * gy
        k_part = sf.k0e(y) * np.exp(-y) * gy
        return np.vstack([i_part, k_part])

    i_scaled, k_val = adaptive_simpson(integrand, 0.0, math.log(x), tol)
    with np.errstate(over="ignore"):
        return float(i_scaled * math.exp(shift)), float(k_val)


def boundary_coefficients(params: SolutionParams, spec: ProblemSpec) -> BoundaryCoefficients:
    zeta, xi = params.zeta, params.xi
    if zeta > 700.0:
        raise NumericError(
            f"zeta = {zeta:.6g}: natural I0(zeta) overflows (scale exponent {zeta:.1f}); "
            "use AnalyticSolution, which works in scaled form")
    it0, kt0 = particular_integrals(zeta, params, spec)
    it1, kt1 = particular_integrals(xi, params, spec)
    return BoundaryCoefficients(
        iota0_0=float(sf.i0(zeta)), iota0_1=float(sf.i0(xi)),
        iota1_0=float(sf.i1(zeta)), iota1_1=float(sf.i1(xi)),
        kappa0_0=float(sf.k0(zeta)), kappa0_1=float(sf.k0(xi)),
        kappa1_0=float(sf.k1(zeta)), kappa1_1=float(sf.k1(xi)),
        itilde_0=it0, itilde_1=it1, ktilde_0=kt0, ktilde_1=kt1,
    )


def _guard(det: float, label: str) -> None:
    if not math.isfinite(det) or abs(det) < SINGULAR_GUARD:
        raise NumericError(f"singular boundary system ({label} determinant = {det!r})")


def gamma_case1(coeffs: BoundaryCoefficients, params: SolutionParams,
                spec: ProblemSpec) -> tuple[float, float]:
    """gamma1, gamma2 for fixed rational endpoints."""
    c = coeffs
    m = spec.market
    det = c.det_case1
    _guard(det, "case 1")
    decay = math.exp(-m.r * spec.horizon_T)
    level = m.v / (spec.alpha1 * m.sigma**2)
    mixed = c.kappa0_1 * c.itilde - c.iota0_1 * c.ktilde
    g1 = -c.ktilde_0 - (c.kappa0_0 * mixed + (c.kappa0_0 - c.kappa0_1 * decay) * level) / det
    g2 = c.itilde_0 + (c.iota0_0 * mixed + (c.iota0_0 - c.iota0_1 * decay) * level) / det
    return g1, g2


def gamma_case2(coeffs: BoundaryCoefficients, params: SolutionParams,
                spec: ProblemSpec) -> tuple[float, float]:
    """gamma1, gamma2 for endpoint rates matched to the expert's rate."""
    if spec.theta <= 0:
        raise ContractError("case 2 has no Bessel solution at theta = 0; use the rational path")
    c = coeffs
    m = spec.market
    det = c.det_case2
    _guard(det, "case 2")
    grow = math.exp(m.r * spec.horizon_T)
    rate = m.v / (params.zeta * spec.alpha2 * m.sigma**2)
    mixed = c.kappa1_1 * c.itilde + c.iota1_1 * c.ktilde
    g1 = -c.ktilde_0 + (c.kappa1_0 * mixed + (c.kappa1_0 * grow - c.kappa1_1 / grow) * rate) / det
    g2 = c.itilde_0 + (c.iota1_0 * mixed + (c.iota1_0 * grow - c.iota1_1 / grow) * rate) / det
    return g1, g2


def solve_gammas(params: SolutionParams, spec: ProblemSpec) -> SolutionParams:
    coeffs = boundary_coefficients(params, spec)
    if spec.boundary_case == BoundaryCase.CASE1:
        g1, g2 = gamma_case1(coeffs, params, spec)
    else:
        g1, g2 = gamma_case2(coeffs, params, spec)
    return SolutionParams.for_spec(spec, params.zeta, params.eta, g1, g2)


def general_solution_eval(t: float, params: SolutionParams, spec: ProblemSpec) -> float:
    """Closed-form holding at time ``t`` from (zeta, eta, gamma1, gamma2)."""
    T = spec.horizon_T
    if not 0.0 <= t <= T:
        raise DomainError(f"t = {t} outside [0, {T}]")
    if math.isnan(params.gamma1) or math.isnan(params.gamma2):
        raise ContractError("params carry no gamma values; call solve_gammas first")
    u = params.zeta * math.exp(-spec.market.r * t)
    fi, fk = particular_integrals(u, params, spec)
    i0e, k0e = float(sf.i0e(u)), float(sf.k0e(u))
    # I0(u) * (g1 + FK) and K0(u) * (g2 - FI), with the e^{+-u} factors applied last
    if u > 700.0:
        raise NumericError(f"overflow: I0 scale exponent {u:.1f}, K0 scale exponent {-u:.1f}")
    with np.errstate(over="raise"):
        value = i0e * math.exp(u) * (params.gamma1 + fk) + k0e * math.exp(-u) * (params.gamma2 - fi)
    if not math.isfinite(value):
        raise NumericError(f"non-finite holding at t = {t} (scale exponents +-{u:.1f})")
    return value


# ---------------------------------------------------------------------------
# scaled Green's-function route


class AnalyticSolution:
    """Optimal holding for given constants (zeta, eta), evaluated stably.

    Construction caches the scaled particular integrals on a uniform grid of
    ``n`` points; evaluation off the grid integrates the remaining partial
    panel with Gauss-Legendre. Instances are immutable after construction.
    """

    def __init__(self, spec: ProblemSpec, zeta: float, eta: float,
                 n: int = DEFAULT_GRID_POINTS, endpoints: tuple[float, float] | None = None):
        if spec.theta <= 0:
            raise ContractError("AnalyticSolution needs theta > 0")
        if spec.market.v <= 0:
            raise DomainError("the solver requires a positive excess return v")
        self.spec = spec
        self.zeta = float(zeta)
        self.eta = float(eta)
        if not (self.zeta > 0 and self.eta > 0 and math.isfinite(self.zeta) and math.isfinite(self.eta)):
            raise DomainError(f"constants must be positive and finite (zeta={zeta}, eta={eta})")
        self.r = spec.market.r
        self.T = spec.horizon_T
        self.xi = self.zeta * math.exp(-self.r * self.T)
        self.grid = uniform_grid(self.T, n)
        self._u = self.zeta * np.exp(-self.r * self.grid)
        self._build_integrals()
        self._solve_boundary(endpoints)

    # -- construction --------------------------------------------------

    def _g(self, u):
        return forcing(u, self.zeta, self.eta, self.spec)

    def _panel_nodes(self, t_lo, t_hi):
        """GL nodes/weights in t on [t_lo, t_hi] (arrays broadcast over panels)."""
        t_lo = np.asarray(t_lo, dtype=float)[..., None]
        t_hi = np.asarray(t_hi, dtype=float)[..., None]
        tau = t_lo + (t_hi - t_lo) * _GL_X
        w = (t_hi - t_lo) * _GL_W
        u = self.zeta * np.exp(-self.r * tau)
        # du = -r u dt; orientation handled by the callers
        jac = w * self.r * u
        return u, jac

    def _build_integrals(self):
        u = self._u
        n = len(u)
        self._i0e, self._i1e, self._k0e, self._k1e = sf.bessel_scaled_all(u)
        un, jac = self._panel_nodes(self.grid[:-1], self.grid[1:])
        gi0, _, gk0, _ = sf.bessel_scaled_all(un.ravel())
        gi0 = gi0.reshape(un.shape)
        gk0 = gk0.reshape(un.shape)
        gj = self._g(un) * jac
        # per panel j (u_{j+1} <= y <= u_j):
        #   k_panel[j] = int K0e(y) e^{u_{j+1} - y} g dy
        #   i_panel[j] = int I0e(y) e^{y - u_j} g dy
        k_panel = np.sum(gk0 * np.exp(u[1:, None] - un) * gj, axis=1)
        i_panel = np.sum(gi0 * np.exp(un - u[:-1, None]) * gj, axis=1)
        step = np.exp(u[1:] - u[:-1])  # <= 1
        sk = np.zeros(n)
        si = np.zeros(n)
        for j in range(n - 1):
            sk[j + 1] = step[j] * sk[j] + k_panel[j]
        for j in range(n - 2, -1, -1):
            si[j] = step[j] * si[j + 1] + i_panel[j]
        # sk[j] = e^{u_j} int_{u_j}^{zeta} K0 g,  si[j] = e^{-u_j} int_{xi}^{u_j} I0 g
        self._sk = sk
        self._si = si

    def _homogeneous(self, u, i0e, i1e, k0e, k1e):
        """Scaled basis I0(u)/I0(zeta), K0(u)/K0(xi) and their u-derivatives."""
        a = i0e / self._i0e[0] * np.exp(u - self.zeta)
        b = k0e / self._k0e[-1] * np.exp(self.xi - u)
        da = i1e / self._i0e[0] * np.exp(u - self.zeta)
        db = -k1e / self._k0e[-1] * np.exp(self.xi - u)
        return a, b, da, db

    def _solve_boundary(self, endpoints):
        spec = self.spec
        ends = [0, -1]
        u = self._u[ends]
        a, b, da, db = self._homogeneous(u, self._i0e[ends], self._i1e[ends],
                                         self._k0e[ends], self._k1e[ends])
        yp = -self._i0e[ends] * self._sk[ends] - self._k0e[ends] * self._si[ends]
        dyp = -self._i1e[ends] * self._sk[ends] + self._k1e[ends] * self._si[ends]
        if spec.boundary_case == BoundaryCase.CASE1:
            if endpoints is None:
                target = np.array([spec.retail_rational(0.0), spec.retail_rational(self.T)])
            else:
                target = np.asarray(endpoints, dtype=float)
            matrix = np.column_stack([a, b])
            rhs = target - yp
        else:
            target = np.array([spec.market.r * spec.expert_rational(0.0),
                               spec.market.r * spec.expert_rational(self.T)])
            # dP/dt = -r u dP/du
            scale = -self.r * u
            matrix = np.column_stack([scale * da, scale * db])
            rhs = target - scale * dyp
        det = float(np.linalg.det(matrix))
        _guard(det, f"case {int(spec.boundary_case)} (scaled)")
        self._c1, self._c2 = np.linalg.solve(matrix, rhs)
        self.values = self._assemble(self._u, self._i0e, self._i1e, self._k0e, self._k1e,
                                     self._sk, self._si)[0]

    def _assemble(self, u, i0e, i1e, k0e, k1e, sk, si):
        a, b, da, db = self._homogeneous(u, i0e, i1e, k0e, k1e)
        p = self._c1 * a + self._c2 * b - i0e * sk - k0e * si
        dp_du = self._c1 * da + self._c2 * db - i1e * sk + k1e * si
        if not np.all(np.isfinite(p)):
            raise NumericError(f"non-finite holding (zeta={self.zeta:.6g}, eta={self.eta:.6g})")
        return p, -self.r * u * dp_du

    # -- evaluation ----------------------------------------------------

    def _scaled_integrals_at(self, t: np.ndarray):
        h = self.grid[1] - self.grid[0]
        j = np.clip(np.floor(t / h).astype(int), 0, len(self.grid) - 2)
        u = self.zeta * np.exp(-self.r * t)
        # K part: from node j (u_j >= u) down to u
        un, jac = self._panel_nodes(self.grid[j], t)
        _, _, gk0, _ = sf.bessel_scaled_all(un.ravel())
        gk0 = gk0.reshape(un.shape)
        sk = np.exp(u - self._u[j]) * self._sk[j] + np.sum(
            gk0 * np.exp(u[:, None] - un) * self._g(un) * jac, axis=1)
        # I part: from xi side, node j+1 (u_{j+1} <= u) up to u
        un, jac = self._panel_nodes(t, self.grid[j + 1])
        gi0, _, _, _ = sf.bessel_scaled_all(un.ravel())
        gi0 = gi0.reshape(un.shape)
        si = np.exp(self._u[j + 1] - u) * self._si[j + 1] + np.sum(
            gi0 * np.exp(un - u[:, None]) * self._g(un) * jac, axis=1)
        return u, sk, si

    def evaluate(self, t, with_rate: bool = False):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t_arr < 0) or np.any(t_arr > self.T) or not np.all(np.isfinite(t_arr)):
            raise DomainError(f"t outside [0, {self.T}]")
        u, sk, si = self._scaled_integrals_at(t_arr)
        i0e, i1e, k0e, k1e = sf.bessel_scaled_all(u)
        p, rate = self._assemble(u, i0e, i1e, k0e, k1e, sk, si)
        if np.ndim(t) == 0:
            p, rate = float(p[0]), float(rate[0])
        return (p, rate) if with_rate else p

    __call__ = evaluate

    def rate(self, t):
        return self.evaluate(t, with_rate=True)[1]

    def trajectory(self, n: int | None = None) -> Trajectory:
        if n is None or n == len(self.grid):
            return Trajectory(self.grid, self.values)
        grid = uniform_grid(self.T, n)
        return Trajectory(grid, self.evaluate(grid))

    # -- closed-form view ------------------------------------------------

    @property
    def params(self) -> SolutionParams:
        """Constants in the closed-form convention (integrals anchored at 1)."""
        if not hasattr(self, "_params"):
            base = SolutionParams.for_spec(self.spec, self.zeta, self.eta)
            _, fk_zeta = particular_integrals(self.zeta, base, self.spec)
            fi_xi, _ = particular_integrals(self.xi, base, self.spec)
            with np.errstate(over="ignore"):
                c1 = self._c1 / (self._i0e[0] * math.exp(self.zeta))
                c2 = self._c2 / (self._k0e[-1] * math.exp(-self.xi))
            self._params = SolutionParams.for_spec(
                self.spec, self.zeta, self.eta, float(c1 - fk_zeta), float(c2 + fi_xi))
        return self._params


def el_residual(p: Trajectory, params: SolutionParams, spec: ProblemSpec) -> float:
    """Max interior residual of theta (p'' - Pbar2'') + eta v e^{r(T-t)} - eta a1 s^2 e^{2r(T-t)} p."""
    t = p.grid
    h = np.diff(t)
    if not np.allclose(h, h[0], rtol=1e-9, atol=0):
        raise ContractError("el_residual needs a uniform grid")
    h = h[0]
    m = spec.market
    T = spec.horizon_T
    pv = p.values
    second = (pv[2:] - 2.0 * pv[1:-1] + pv[:-2]) / (h * h)
    ti = t[1:-1]
    growth = np.exp(m.r * (T - ti))
    res = spec.theta * (second - rational_decision_accel(spec.alpha2, m, T, ti)) \
        + params.eta * m.v * growth - params.eta * spec.alpha1 * m.sigma**2 * growth**2 * pv[1:-1]
    return float(np.max(np.abs(res)))


class RationalSolution:
    """The retail rational (Merton) path: the solution at theta = 0."""

    zeta = math.inf
    eta = float("nan")

    def __init__(self, spec: ProblemSpec, n: int = DEFAULT_GRID_POINTS):
        self.spec = spec
        self.T = spec.horizon_T
        self.grid = uniform_grid(self.T, n)
        self.values = rational_decision(spec.alpha1, spec.market, self.T, self.grid)

    def evaluate(self, t, with_rate: bool = False):
        p = rational_decision(self.spec.alpha1, self.spec.market, self.T, t)
        if with_rate:
            return p, rational_decision_rate(self.spec.alpha1, self.spec.market, self.T, t)
        return p

    __call__ = evaluate

    def rate(self, t):
        return rational_decision_rate(self.spec.alpha1, self.spec.market, self.T, t)

    def trajectory(self, n: int | None = None) -> Trajectory:
        if n is None or n == len(self.grid):
            return Trajectory(self.grid, self.values)
        return Trajectory.from_function(self.evaluate, self.T, n)
