"""Command-line entry point: ``imitation-portfolio <subcommand> [options]``.

Every subcommand writes plain CSV or JSON into the output directory
(``--out-dir``, else ``$IMITATION_PORTFOLIO_OUTDIR``, else the working
directory). Exit status: 0 success, 1 numerical non-convergence, 2 usage or
input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .asymptotics import asymptotic_decision, crossing_time, ordering_check, trajectory_crossing
from .constants import TRACE_COLUMNS, TraceRecord, solve, trace_csv
from .data import DataError, estimate_market_params, load_prices_csv, load_rates_csv
from .errors import ContractError, ConvergenceError, DomainError, InvariantError, NumericError
from .market import (BoundaryCase, Investor, MarketParams, ProblemSpec, Trajectory,
                     expected_utility, objective, uniform_grid)
from .oracle import (McConfig, OracleConfig, compare_analytic_oracle, mc_exact_gaussian,
                     mc_expected_utility)

OUTDIR_ENV = "IMITATION_PORTFOLIO_OUTDIR"
EXIT_OK, EXIT_NONCONVERGED, EXIT_USAGE = 0, 1, 2
DEFAULT_THETAS = (0.25, 1.0, 4.0, 16.0)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    r: float = 0.04
    v: float = 0.03
    sigma: float = 0.17
    alpha1: float = 0.2
    alpha2: float = 0.4
    x1: float = 1.0
    T: float = 50.0
    thetas: tuple[float, ...] = (1.0,)
    case: int = 1
    grid: int = 2001
    output: str | None = None
    out_dir: str | None = None
    fmt: str = "csv"
    seed: int = 20240601
    extra: dict = field(default_factory=dict)

    def spec(self, theta: float | None = None, case: int | None = None,
             alpha1: float | None = None, alpha2: float | None = None) -> ProblemSpec:
        return ProblemSpec(
            market=MarketParams(self.r, self.v, self.sigma),
            retail=Investor(self.alpha1 if alpha1 is None else alpha1, self.x1),
            expert_alpha=self.alpha2 if alpha2 is None else alpha2,
            horizon_T=self.T,
            theta=self.thetas[0] if theta is None else theta,
            boundary_case=BoundaryCase.parse(self.case if case is None else case))

    def validate(self) -> None:
        if self.v <= 0 and self.subcommand not in {"estimate"}:
            raise DomainError(f"excess return v must be > 0, got {self.v}")
        if self.grid < 5 or self.grid % 2 == 0:
            raise UsageError("--grid must be an odd number >= 5 (Simpson quadrature)")
        for theta in self.thetas:
            self.spec(theta)  # raises on bad parameters

    def path(self, default_name: str) -> Path:
        base = Path(self.out_dir or os.environ.get(OUTDIR_ENV) or ".")
        name = Path(self.output or default_name)
        out = name if name.is_absolute() else base / name
        out.parent.mkdir(parents=True, exist_ok=True)
        return out


# ------------------------------------------------------------------ writers

def _num(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else _num(v) for v in row])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ------------------------------------------------------------------ commands

def _curve_block(spec: ProblemSpec, solved, grid):
    p_star = np.asarray(solved.solution.evaluate(grid))
    limit = asymptotic_decision(spec)(grid)
    return p_star, spec.retail_rational(grid), spec.expert_rational(grid), limit


def _solve_record(spec: ProblemSpec, solved, grid) -> dict:
    traj = Trajectory(grid, np.asarray(solved.solution.evaluate(grid)))
    rep = solved.report
    rec = {"theta": spec.theta, "case": int(spec.boundary_case),
           "alpha1": spec.alpha1, "alpha2": spec.alpha2,
           "zeta": rep.zeta, "eta": rep.eta, "method": rep.method,
           "iterations": rep.iterations, "converged": rep.converged,
           "residual_norm": rep.residual_norm, "final_deltas": list(rep.final_deltas),
           "objective": objective(traj, spec),
           "ordering": ordering_check(traj, spec).to_dict(),
           "trace": [asdict(t) for t in rep.trace]}
    if rep.method == "rational":
        rec["note"] = "theta = 0: retail rational holding returned"
        rec["gamma1"] = rec["gamma2"] = None
    else:
        params = solved.solution.params
        rec["gamma1"], rec["gamma2"] = params.gamma1, params.gamma2
    if spec.boundary_case is BoundaryCase.CASE2:
        rec["tau_limit"] = crossing_time(spec)
        rec["tau_theta"] = trajectory_crossing(solved.solution.evaluate, spec)
    return rec


def _run_solves(cfg: RunConfig, grid):
    records, blocks, status = [], [], EXIT_OK
    for theta in cfg.thetas:
        spec = cfg.spec(theta)
        try:
            solved = solve(spec, n=cfg.grid)
        except ConvergenceError as err:
            records.append({"theta": theta, "converged": False, "error": str(err),
                            "trace": [asdict(t) for t in err.trace]})
            status = EXIT_NONCONVERGED
            continue
        records.append(_solve_record(spec, solved, grid))
        blocks.append((theta, _curve_block(spec, solved, grid)))
    return records, blocks, status


CURVE_HEADER = ["theta", "t", "P1_star", "P1_bar", "P2_bar", "P1_inf"]


def _write_solves(cfg: RunConfig, default_name: str, grid, records, blocks) -> None:
    rows = [(theta, t, *vals) for theta, curves in blocks for t, *vals in zip(grid, *curves)]
    meta = {"config": _config_dict(cfg), "solves": records}
    if cfg.fmt == "json":
        meta["curves"] = [dict(zip(CURVE_HEADER, r)) for r in rows]
        _write_json(cfg.path(default_name + ".json"), meta)
    else:
        out = cfg.path(default_name + ".csv")
        _write_csv(out, CURVE_HEADER, rows)
        _write_json(out.with_suffix(".json"), meta)
    trace_rows = [(rec["theta"], *line.split(","))
                  for rec in records
                  for line in trace_csv([TraceRecord(**t) for t in rec["trace"]]).splitlines()[1:]]
    _write_csv(cfg.path(default_name + "_trace.csv").with_name(
        Path(cfg.path(default_name + ".csv")).stem + "_trace.csv"),
        ["theta", *TRACE_COLUMNS], trace_rows)


def cmd_solve(cfg: RunConfig) -> int:
    """Curves t, P1_star, P1_bar, P2_bar, P1_inf per theta plus a JSON sidecar."""
    grid = uniform_grid(cfg.T, cfg.grid)
    records, blocks, status = _run_solves(cfg, grid)
    _write_solves(cfg, "solve", grid, records, blocks)
    return status


def cmd_asymptotic(cfg: RunConfig) -> int:
    grid = uniform_grid(cfg.T, cfg.grid)
    spec = cfg.spec()
    limit = asymptotic_decision(spec)
    out = cfg.path("asymptotic.csv")
    _write_csv(out, ["t", "P1_bar", "P2_bar", "P1_inf"],
               zip(grid, spec.retail_rational(grid), spec.expert_rational(grid), limit(grid)))
    meta = {"config": _config_dict(cfg), "offset": limit.offset_const, "slope": limit.slope,
            "ordering": ordering_check(limit.trajectory(grid), spec,
                                       tau=crossing_time(spec) if limit.case is BoundaryCase.CASE2
                                       else None).to_dict()}
    if spec.boundary_case is BoundaryCase.CASE2:
        meta["tau"] = crossing_time(spec)
    _write_json(out.with_suffix(".json"), meta)
    return EXIT_OK


def cmd_oracle(cfg: RunConfig) -> int:
    ocfg = OracleConfig(grid_points=cfg.extra.get("oracle_grid", 401))
    mcfg = McConfig(paths=cfg.extra.get("paths", 200_000), steps=cfg.extra.get("steps", 2000),
                    seed=cfg.seed, workers=cfg.extra.get("workers", 1))
    reports, status = [], EXIT_OK
    for theta in cfg.thetas:
        spec = cfg.spec(theta)
        try:
            cmp = compare_analytic_oracle(spec, ocfg)
        except ConvergenceError as err:
            reports.append({"theta": theta, "converged": False, "error": str(err)})
            status = EXIT_NONCONVERGED
            continue
        rec = cmp.to_dict()
        if not cfg.extra.get("skip_mc"):
            solved = solve(spec, n=cfg.grid)
            traj = solved.solution.trajectory(cfg.grid)
            est, se = mc_expected_utility(traj, spec, mcfg)
            rec["monte_carlo"] = {"estimate": est, "standard_error": se,
                                  "closed_form": expected_utility(traj, spec),
                                  "seed": mcfg.seed, "paths": mcfg.paths, "steps": mcfg.steps}
        reports.append(rec)
    _write_json(cfg.path("oracle.json"), {"config": _config_dict(cfg), "reports": reports})
    return status


def _named_path(name: str, spec: ProblemSpec, grid, n: int) -> Trajectory:
    if name == "zero":
        return Trajectory(grid, np.zeros_like(grid))
    if name == "p1bar":
        return Trajectory(grid, spec.retail_rational(grid))
    if name == "p2bar":
        return Trajectory(grid, spec.expert_rational(grid))
    if name == "asymptotic":
        return asymptotic_decision(spec).trajectory(grid)
    if name == "optimal":
        return Trajectory(grid, np.asarray(solve(spec, n=n).solution.evaluate(grid)))
    raise UsageError(f"unknown path {name!r}")


def cmd_simulate(cfg: RunConfig) -> int:
    grid = uniform_grid(cfg.T, cfg.grid)
    mcfg = McConfig(paths=cfg.extra.get("paths", 200_000), steps=cfg.extra.get("steps", 2000),
                    seed=cfg.seed, workers=cfg.extra.get("workers", 1))
    results = []
    for theta in cfg.thetas:
        spec = cfg.spec(theta)
        for name in cfg.extra.get("paths_named", ["zero", "p1bar", "p2bar", "optimal"]):
            traj = _named_path(name, spec, grid, cfg.grid)
            est, se = (mc_exact_gaussian if cfg.extra.get("exact") else mc_expected_utility)(traj, spec, mcfg)
            closed = expected_utility(traj, spec)
            results.append({"theta": theta, "path": name, "estimate": est, "standard_error": se,
                            "closed_form": closed,
                            "z_score": (est - closed) / se if se > 0 else 0.0})
    _write_json(cfg.path("simulate.json"),
                {"config": _config_dict(cfg), "mc": asdict(mcfg), "results": results})
    return EXIT_OK


def cmd_estimate(cfg: RunConfig) -> int:
    prices = load_prices_csv(cfg.extra["prices"])
    rates = load_rates_csv(cfg.extra["rates"]) if cfg.extra.get("rates") else [cfg.r]
    est = estimate_market_params(prices, rates)
    _write_json(cfg.path("estimate.json"), est.to_dict())
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    """Both cases x both risk-aversion orders over the theta list.

    Writes one curve file per (case, order) panel under ``sweep/`` and a
    summary table of the solved constants.
    """
    grid = uniform_grid(cfg.T, cfg.grid)
    header = ["case", "alpha1", "alpha2", "theta", "zeta", "eta", "gamma1", "gamma2",
              "iterations", "residual_norm", "violations", "tau_theta"]
    rows, status = [], EXIT_OK
    for case in (1, 2):
        for a1, a2 in ((cfg.alpha1, cfg.alpha2), (cfg.alpha2, cfg.alpha1)):
            sub = replace(cfg, case=case, alpha1=a1, alpha2=a2, output=None)
            records, blocks, st = _run_solves(sub, grid)
            status = max(status, st)
            _write_solves(sub, f"sweep/case{case}_a{a1:g}_{a2:g}", grid, records, blocks)
            for rec in records:
                if not rec.get("converged"):
                    continue
                rows.append((str(case), a1, a2, rec["theta"], rec["zeta"], rec["eta"],
                             _or_nan(rec["gamma1"]), _or_nan(rec["gamma2"]), rec["iterations"],
                             rec["residual_norm"], rec["ordering"]["violations"],
                             _or_nan(rec.get("tau_theta"))))
    _write_csv(cfg.path("sweep/summary.csv"), header, rows)
    return status


def _or_nan(x):
    return math.nan if x is None else x


COMMANDS = {"solve": cmd_solve, "asymptotic": cmd_asymptotic, "oracle": cmd_oracle,
            "simulate": cmd_simulate, "estimate": cmd_estimate, "sweep": cmd_sweep}


def _config_dict(cfg: RunConfig) -> dict:
    out = asdict(cfg)
    out.pop("out_dir")
    out.pop("output")
    return out


# ------------------------------------------------------------------ parsing

def _theta_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty theta list")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model")
    g.add_argument("--r", type=float, default=0.04, help="risk-free rate")
    g.add_argument("--v", type=float, default=0.03, help="excess return of the risky asset")
    g.add_argument("--sigma", type=float, default=0.17, help="volatility")
    g.add_argument("--alpha1", type=float, default=0.2, help="retail risk aversion")
    g.add_argument("--alpha2", type=float, default=0.4, help="expert risk aversion")
    g.add_argument("--x1", type=float, default=1.0, help="retail initial wealth")
    g.add_argument("--T", type=float, default=50.0, help="horizon in years")
    g.add_argument("--theta", type=_theta_list, default=None,
                   help="imitation coefficient, or a comma-separated list")
    g.add_argument("--case", type=int, choices=(1, 2), default=1, help="boundary case")
    o = common.add_argument_group("output")
    o.add_argument("--grid", type=int, default=2001, help="time grid points (odd)")
    o.add_argument("-o", "--output", help="output file name (relative to --out-dir)")
    o.add_argument("--out-dir", help=f"output directory (default ${OUTDIR_ENV} or .)")
    o.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    o.add_argument("--seed", type=int, default=20240601, help="random seed")
    o.add_argument("--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="imitation-portfolio", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="subcommand", required=True)
    subs.add_parser("solve", parents=[common], help="optimal holding path(s) and solver report")
    subs.add_parser("asymptotic", parents=[common], help="large-theta limit and crossing time")
    p = subs.add_parser("oracle", parents=[common], help="compare with brute-force optimiser and MC")
    p.add_argument("--oracle-grid", type=int, default=401)
    p.add_argument("--paths", type=int, default=200_000)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--skip-mc", action="store_true")
    p = subs.add_parser("simulate", parents=[common], help="Monte Carlo expected utility")
    p.add_argument("--paths", type=int, default=200_000)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--path", dest="paths_named", action="append",
                   choices=("zero", "p1bar", "p2bar", "optimal", "asymptotic"))
    p.add_argument("--exact", action="store_true", help="sample terminal wealth exactly")
    p = subs.add_parser("estimate", parents=[common], help="estimate r, v, sigma from CSV data")
    p.add_argument("--prices", required=True, help="CSV with date,close")
    p.add_argument("--rates", help="CSV with date,rate (defaults to --r)")
    subs.add_parser("sweep", parents=[common], help="both cases and risk orders over a theta list")
    return parser


_EXTRA = ("oracle_grid", "paths", "steps", "workers", "skip_mc", "paths_named", "exact",
          "prices", "rates")


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    thetas = ns.theta or (DEFAULT_THETAS if ns.subcommand == "sweep" else (1.0,))
    extra = {k: getattr(ns, k) for k in _EXTRA if getattr(ns, k, None) is not None}
    return RunConfig(subcommand=ns.subcommand, r=ns.r, v=ns.v, sigma=ns.sigma,
                     alpha1=ns.alpha1, alpha2=ns.alpha2, x1=ns.x1, T=ns.T, thetas=thetas,
                     case=ns.case, grid=ns.grid, output=ns.output, out_dir=ns.out_dir,
                     fmt=ns.fmt, seed=ns.seed, extra=extra)


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(ns)
        cfg.validate()
        return COMMANDS[cfg.subcommand](cfg)
    except (UsageError, DomainError, ContractError, DataError, FileNotFoundError) as err:
        print(f"imitation-portfolio: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, NumericError, InvariantError) as err:
        print(f"imitation-portfolio: numerical failure: {err}", file=sys.stderr)
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
