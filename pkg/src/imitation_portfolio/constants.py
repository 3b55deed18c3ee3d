"""Self-consistent integral constants (zeta, eta).

``zeta`` is an explicit function of ``eta``; ``eta`` is the deterministic
equivalent of the trajectory that (zeta, eta) generate. :func:`fixed_point_solve`
runs the plain fixed-point sweep (trajectory -> eta -> zeta) with relaxation,
and :func:`newton_fallback` solves the same two equations by damped Newton.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ContractError, ConvergenceError, NumericError
from .market import DEFAULT_GRID_POINTS, ProblemSpec, deterministic_equivalent_eta, log_eta
from .variational import AnalyticSolution, RationalSolution, eq8_zeta

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 200
# keeps a wild first sweep representable; exp(700) is still a finite double
LOG_ETA_CLIP = 700.0
MIN_NEWTON_SCALE = 1.0 / 64


@dataclass
class TraceRecord:
    k: int
    zeta: float
    eta: float
    delta_zeta: float
    delta_eta: float
    relaxation: float = 1.0
    clipped: bool = False
    step: str = "fixed_point"


@dataclass
class SolveReport:
    zeta: float
    eta: float
    iterations: int
    converged: bool
    final_deltas: tuple[float, float]
    method: str
    residual_norm: float
    trace: list[TraceRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["final_deltas"] = list(self.final_deltas)
        return out


TRACE_COLUMNS = ("k", "zeta", "eta", "delta_zeta", "delta_eta", "relaxation", "clipped", "step")


def trace_csv(trace: list[TraceRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for rec in trace:
        writer.writerow([rec.k, repr(rec.zeta), repr(rec.eta), repr(rec.delta_zeta),
                         repr(rec.delta_eta), repr(rec.relaxation), int(rec.clipped), rec.step])
    return buf.getvalue()


def _check(spec: ProblemSpec, init, tol):
    if spec.theta <= 0:
        raise ContractError("the constants are only defined for theta > 0")
    if spec.market.v <= 0:
        raise ContractError("the solver requires a positive excess return v")
    if min(init) <= 0:
        raise ContractError(f"initial constants must be positive, got {init}")
    if tol <= 0:
        raise ContractError("tolerance must be positive")


def _log_eta_of(spec: ProblemSpec, zeta: float, eta: float, n: int, endpoints=None) -> float:
    return log_eta(AnalyticSolution(spec, zeta, eta, n=n, endpoints=endpoints).trajectory(), spec)


def residual(spec: ProblemSpec, zeta: float, eta: float,
             n: int = DEFAULT_GRID_POINTS, endpoints=None) -> tuple[float, float]:
    """(zeta - zeta(eta), eta - eta(trajectory(zeta, eta))); zero at the solution."""
    if zeta <= 0 or eta <= 0:
        raise ContractError("residual needs positive constants")
    sol = AnalyticSolution(spec, zeta, eta, n=n, endpoints=endpoints)
    return zeta - eq8_zeta(eta, spec), eta - deterministic_equivalent_eta(sol.trajectory(), spec)


def _residual_norm(spec, zeta, eta, n, endpoints=None) -> float:
    try:
        return float(np.max(np.abs(residual(spec, zeta, eta, n, endpoints))))
    except NumericError:
        return math.inf


def fixed_point_solve(spec: ProblemSpec, init: tuple[float, float] = (1.0, 1.0),
                      tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                      n: int = DEFAULT_GRID_POINTS, fallback: bool = True,
                      endpoints: tuple[float, float] | None = None,
                      newton_max_iter: int = DEFAULT_MAX_ITER) -> SolveReport:
    """Iterate trajectory -> eta -> zeta until both updates fall below ``tol``.

    The eta update is relaxed, eta <- (1 - lam) eta + lam eta_new, starting at
    lam = 1. lam is halved whenever the update changes sign without at least
    halving in size, and doubled back towards 1 while it keeps its sign. If
    ``max_iter`` sweeps do not converge and ``fallback`` is set, the last
    iterate is handed to :func:`newton_fallback` with its own budget of
    ``newton_max_iter`` steps.
    """
    _check(spec, init, tol)
    zeta, eta = map(float, init)
    lam = 1.0
    trace: list[TraceRecord] = []
    prev_step = None
    dz = de = math.inf
    for k in range(1, max_iter + 1):
        le = _log_eta_of(spec, zeta, eta, n, endpoints)
        clipped = abs(le) > LOG_ETA_CLIP
        eta_new = math.exp(max(-LOG_ETA_CLIP, min(LOG_ETA_CLIP, le)))
        step = eta_new - eta
        if prev_step is not None and step * prev_step < 0 and abs(step) > 0.5 * abs(prev_step):
            lam *= 0.5
            log.debug("oscillation at sweep %d; relaxation now %g", k, lam)
        elif prev_step is not None and step * prev_step > 0:
            lam = min(1.0, 2.0 * lam)
        prev_step = step
        eta_next = (1.0 - lam) * eta + lam * eta_new
        zeta_next = eq8_zeta(eta_next, spec)
        dz, de = abs(zeta_next - zeta), abs(eta_next - eta)
        zeta, eta = zeta_next, eta_next
        trace.append(TraceRecord(k, zeta, eta, dz, de, lam, clipped, "fixed_point"))
        if dz < tol and de < tol:
            return SolveReport(zeta, eta, k, True, (dz, de), "fixed_point",
                               _residual_norm(spec, zeta, eta, n, endpoints), trace)
    log.info("fixed point did not converge in %d sweeps (dzeta=%g, deta=%g)", max_iter, dz, de)
    if not fallback:
        raise ConvergenceError("fixed-point iteration did not converge", trace,
                               SolveReport(zeta, eta, max_iter, False, (dz, de), "fixed_point",
                                           _residual_norm(spec, zeta, eta, n, endpoints), trace))
    report = newton_fallback(spec, (zeta, eta), tol, newton_max_iter, n, endpoints=endpoints)
    report.trace = trace + report.trace
    return report


def newton_fallback(spec: ProblemSpec, init: tuple[float, float] = (1.0, 1.0),
                    tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                    n: int = DEFAULT_GRID_POINTS, rel_step: float = 1e-6,
                    endpoints: tuple[float, float] | None = None) -> SolveReport:
    """Damped Newton on the two constant equations.

    Works in (log zeta, log eta) on the equivalent residual
    (log zeta - log zeta(eta), log eta - log eta(trajectory)), which keeps
    iterates positive and stays finite when eta(trajectory) would overflow.
    The Jacobian is a forward difference with relative step ``rel_step``; the
    step is halved until the residual norm decreases. If that needs a factor
    below ``MIN_NEWTON_SCALE`` the iterate is taken from one fixed-point sweep
    instead (far from the root the residual norm has non-root minima where
    Newton stalls).
    """
    _check(spec, init, tol)
    m = spec.market
    log_c = math.log(m.sigma / m.r) + m.r * spec.horizon_T + 0.5 * math.log(spec.alpha1 / spec.theta)

    def F(x):
        lz, le = x
        zeta, eta = math.exp(lz), math.exp(le)
        return np.array([lz - log_c - 0.5 * le, le - _log_eta_of(spec, zeta, eta, n, endpoints)])

    x = np.log(np.asarray(init, dtype=float))
    fx = F(x)
    trace: list[TraceRecord] = []
    dz = de = math.inf
    for k in range(max_iter + 1):
        zeta, eta = (float(v) for v in np.exp(x))
        norm = _residual_norm(spec, zeta, eta, n, endpoints)
        if norm < tol and (not trace or (dz < tol and de < tol)):
            return SolveReport(zeta, eta, len(trace), True, (dz, de) if trace else (0.0, 0.0),
                               "newton_fallback", norm, trace)
        if k == max_iter:
            break
        jac = np.empty((2, 2))
        for j in range(2):
            h = rel_step * max(1.0, abs(x[j]))
            xp = x.copy()
            xp[j] += h
            jac[:, j] = (F(xp) - fx) / h
        if not np.all(np.isfinite(jac)) or abs(np.linalg.det(jac)) < 1e-14:
            raise ConvergenceError(f"singular Jacobian at zeta={zeta:.6g}, eta={eta:.6g}", trace)
        step = -np.linalg.solve(jac, fx)
        norm0 = np.linalg.norm(fx)
        scale = 1.0
        kind = "newton"
        while True:
            cand = x + scale * step
            try:
                fc = F(cand)
            except (NumericError, OverflowError, ValueError):
                fc = np.full(2, np.inf)
            if np.all(np.isfinite(fc)) and np.linalg.norm(fc) < norm0:
                break
            scale *= 0.5
            if scale < MIN_NEWTON_SCALE:
                le = max(-LOG_ETA_CLIP, min(LOG_ETA_CLIP, x[1] - fx[1]))
                cand = np.array([log_c + 0.5 * le, le])
                fc = F(cand)
                kind, scale = "fixed_point", 1.0
                break
        new = np.exp(cand)
        dz, de = abs(new[0] - zeta), abs(new[1] - eta)
        x, fx = cand, fc
        trace.append(TraceRecord(k + 1, float(new[0]), float(new[1]), float(dz), float(de),
                                 scale, step=kind))
    report = SolveReport(zeta, eta, len(trace), False, (dz, de), "newton_fallback", norm, trace)
    raise ConvergenceError("Newton fallback did not converge", trace, report)


@dataclass
class Solved:
    solution: AnalyticSolution | RationalSolution
    report: SolveReport
    spec: ProblemSpec


def solve(spec: ProblemSpec, init: tuple[float, float] = (1.0, 1.0), tol: float = DEFAULT_TOL,
          max_iter: int = DEFAULT_MAX_ITER, n: int = DEFAULT_GRID_POINTS,
          method: str = "fixed_point", warm_start: bool = False,
          endpoints: tuple[float, float] | None = None) -> Solved:
    """Solve the constants and build the optimal trajectory.

    theta = 0 returns the retail rational path (the unconstrained optimum); the
    endpoint-rate conditions of case 2 cannot be met there. ``endpoints``
    replaces the case 1 end values (retail rational holdings by default).
    """
    if spec.theta == 0:
        sol = RationalSolution(spec, n)
        report = SolveReport(math.inf, math.nan, 0, True, (0.0, 0.0), "rational", 0.0, [])
        return Solved(sol, report, spec)
    if warm_start:
        eta0 = deterministic_equivalent_eta(RationalSolution(spec, n).trajectory(), spec)
        init = (eq8_zeta(eta0, spec), eta0)
    if method == "fixed_point":
        report = fixed_point_solve(spec, init, tol, max_iter, n, endpoints=endpoints)
    elif method == "newton":
        report = newton_fallback(spec, init, tol, max_iter, n, endpoints=endpoints)
    else:
        raise ContractError(f"unknown method {method!r}")
    return Solved(AnalyticSolution(spec, report.zeta, report.eta, n=n, endpoints=endpoints), report, spec)
