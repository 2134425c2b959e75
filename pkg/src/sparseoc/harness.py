"""Experiment driver: built-in examples, single solves, sweeps and comparisons."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from sklearn.base import clone

from .dca import IterationRecord, sparsity_count
from .estimators import SparseControlDCA, SparseControlPD, linear_quadratic_control
from .grid import Grid, write_field_csv
from .pd import match_regularization
from .penalty import PenaltyParams, cost_J, cost_Jgamma
from .problem import BoxConstraints, ControlProblem

__all__ = [
    "EXAMPLES",
    "GAMMA_SWEEP",
    "BETA_SWEEP",
    "P_SWEEP",
    "RunConfig",
    "RunResult",
    "build_example",
    "desired_state",
    "make_estimator",
    "solve",
    "sweep",
    "compare",
    "run",
]

logger = logging.getLogger(__name__)

EXAMPLES = ("example1", "example2_comparison", "example3_box", "custom")
ALGORITHMS = ("dca", "pd", "compare")
SWEEP_PARAMS = ("gamma", "beta", "p", "alpha")

# example -> defaults for the fields left as None in RunConfig
EXAMPLE_DEFAULTS = {
    "example1": dict(alpha=0.25, beta=1e-3, gamma=1000.0, algorithm="dca",
                     quadrature="trapezoid", grad_weight=0.0, init="zero", max_outer=500),
    "custom": dict(alpha=0.25, beta=1e-3, gamma=1000.0, algorithm="dca",
                   quadrature="trapezoid", grad_weight=0.0, init="zero", max_outer=500),
    "example2_comparison": dict(alpha=0.0, beta=5e-3, gamma=None, algorithm="compare",
                                quadrature="uniform", grad_weight=1.0, init="tikhonov",
                                max_outer=100),
    "example3_box": dict(alpha=0.0, beta=1e-4, gamma=1000.0, algorithm="dca",
                         quadrature="trapezoid", grad_weight=0.0, init="zero", max_outer=500),
}

# reference sweep grids for the first example
GAMMA_SWEEP = (100.0, 200.0, 500.0, 1000.0, 1500.0, 2000.0, 2500.0, 3000.0, 4000.0, 5000.0)
BETA_SWEEP = (2e-4, 5e-4, 1e-3, 1.5e-3, 2e-3, 2.5e-3, 3e-3)
P_SWEEP = (1.0, 1.2, 1.5, 2.0, 4.0, 8.0, 10.0, 20.0)

EXAMPLE3_BOXES = {"signed": (-0.035, 0.035), "nonnegative": (0.0, 0.035)}
# the comparison problem scales the first example's target so that the
# optimal control is far from zero
EXAMPLE2_SCALE = 10.0


def _exp_cos(x, y):
    return np.exp(-np.cos(2 * np.pi * x * y) ** 2 / 0.1)


def _sin_sin(x, y):
    return np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)


@dataclass
class RunConfig:
    """Settings of one experiment; ``None`` fields take the example default.

    ``variant`` selects the Example 3 data: ``"signed"`` uses the sine target
    with bounds ``[-0.035, 0.035]``, ``"nonnegative"`` the first example's
    target with ``[0, 0.035]``. ``init`` is ``"zero"`` or ``"tikhonov"`` (the
    ``beta = 0`` minimizer). ``continuation`` warm-starts each sweep entry
    from the previous solution; by default only gamma sweeps do this.
    ``timings`` writes wall-clock times into ``iterations.csv`` (off by
    default so that outputs are reproducible byte for byte).
    """

    example: str = "example1"
    n: int = 31
    alpha: float = None
    beta: float = None
    gamma: float = None
    p: float = 2.0
    box: tuple = None
    algorithm: str = None
    outer_tol: float = 1e-6
    max_outer: int = None
    sweep: tuple = None
    output_dir: str = "sparseoc-out"
    seed: int = 0
    init: str = None
    continuation: bool = None
    variant: str = "signed"
    quadrature: str = None
    grad_weight: float = None
    epsilon: float = None
    pd_sign: str = "adjoint"
    regularization_error: float = 0.0075
    linear_solver: str = "direct"
    timings: bool = False

    def __post_init__(self):
        if self.box is not None:
            self.box = tuple(float(b) for b in self.box)
        if self.sweep is not None:
            name, values = self.sweep
            self.sweep = (str(name), tuple(float(v) for v in values))

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        d = asdict(self)
        if d["box"] is not None:
            d["box"] = list(d["box"])
        if d["sweep"] is not None:
            d["sweep"] = [d["sweep"][0], list(d["sweep"][1])]
        return d

    def resolved(self):
        """Copy with example defaults filled in, validated."""
        if self.example not in EXAMPLES:
            raise ValueError(f"unknown example {self.example!r}; choose from {EXAMPLES}")
        d = self.to_dict()
        for key, value in EXAMPLE_DEFAULTS[self.example].items():
            if d[key] is None:
                d[key] = value
        if self.example == "example3_box" and d["box"] is None:
            if self.variant not in EXAMPLE3_BOXES:
                raise ValueError(f"variant must be one of {tuple(EXAMPLE3_BOXES)}")
            d["box"] = EXAMPLE3_BOXES[self.variant]
        if self.example == "example2_comparison":
            gamma, eps = match_regularization(d["p"], d["regularization_error"])
            if d["gamma"] is None:
                d["gamma"] = gamma
            if d["epsilon"] is None:
                d["epsilon"] = eps
        if d["epsilon"] is None:
            d["epsilon"] = 1e-4
        if d["continuation"] is None:
            d["continuation"] = d["sweep"] is not None and d["sweep"][0] == "gamma"
        out = RunConfig.from_dict(d)
        out.validate()
        return out

    def validate(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.p >= 1:
            raise ValueError("p must be >= 1")
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.algorithm is not None and self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if not self.outer_tol > 0:
            raise ValueError("outer_tol must be positive")
        if self.max_outer is not None and (int(self.max_outer) != self.max_outer
                                           or self.max_outer < 1):
            raise ValueError("max_outer must be a positive integer")
        if self.box is not None:
            if len(self.box) != 2:
                raise ValueError("box must be a pair (lo, hi)")
            BoxConstraints(*self.box)
        if self.sweep is not None:
            name, values = self.sweep
            if name not in SWEEP_PARAMS:
                raise ValueError(f"can only sweep over {SWEEP_PARAMS}")
            if not values:
                raise ValueError("sweep needs at least one value")
        if self.init is not None and self.init not in ("zero", "tikhonov"):
            raise ValueError("init must be 'zero' or 'tikhonov'")


def desired_state(config, grid):
    """Target field of the configured example."""
    if config.example == "example3_box" and config.variant == "signed":
        return grid.sample(_sin_sin)
    y_d = grid.sample(_exp_cos)
    if config.example == "example2_comparison":
        y_d = EXAMPLE2_SCALE * y_d
    return y_d


def build_example(config):
    """ControlProblem for ``config`` (defaults resolved)."""
    cfg = config.resolved()
    grid = Grid(cfg.n, cfg.quadrature)
    params = PenaltyParams(p=cfg.p, gamma=cfg.gamma, alpha=cfg.alpha, beta=cfg.beta)
    box = None if cfg.box is None else BoxConstraints(*cfg.box)
    return ControlProblem(grid, desired_state(cfg, grid), params, box=box,
                          grad_weight=cfg.grad_weight, linear_solver=cfg.linear_solver)


def make_estimator(config, algorithm=None):
    cfg = config.resolved()
    algorithm = algorithm or cfg.algorithm
    common = dict(n=cfg.n, alpha=cfg.alpha, beta=cfg.beta, p=cfg.p, grad_weight=cfg.grad_weight,
                  quadrature=cfg.quadrature, init=cfg.init, linear_solver=cfg.linear_solver)
    if algorithm == "pd":
        return SparseControlPD(epsilon=cfg.epsilon, max_iter=cfg.max_outer, sign=cfg.pd_sign,
                               **common)
    return SparseControlDCA(gamma=cfg.gamma, box=cfg.box, outer_tol=cfg.outer_tol,
                            max_outer=cfg.max_outer, **common)


@dataclass
class RunResult:
    config: RunConfig
    estimators: dict = field(default_factory=dict)
    sweep_rows: list = field(default_factory=list)


def solve(config, algorithm=None, u0=None):
    """Fit one estimator on the example data; returns the fitted estimator."""
    cfg = config.resolved()
    problem = build_example(cfg)
    est = make_estimator(cfg, algorithm)
    return est.fit(problem.y_d, u0=u0)


def sweep(config):
    """Solve along ``config.sweep``; returns a list of (value, fitted estimator)."""
    cfg = config.resolved()
    name, values = cfg.sweep
    problem = build_example(cfg)
    base = make_estimator(cfg)
    out = []
    u_prev = None
    for value in values:
        est = clone(base).set_params(**{name: value})
        u0 = u_prev if cfg.continuation else None
        est.fit(problem.y_d, u0=u0)
        out.append((value, est))
        u_prev = est.control_
    return out


def compare(config):
    """DCA and PD from the same start on the comparison problem."""
    cfg = config.resolved()
    problem = build_example(cfg)
    u0 = None
    if cfg.init == "tikhonov":
        u0 = linear_quadratic_control(problem)
    fitted = {}
    for algorithm in ("dca", "pd"):
        est = make_estimator(cfg, algorithm)
        fitted[algorithm] = est.fit(problem.y_d, u0=u0)
    return fitted


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_iterations(path, report, timings):
    rows = []
    for rec in report.iterations:
        vals = [getattr(rec, c) for c in IterationRecord.columns()]
        if not timings:
            vals[-1] = math.nan
        rows.append(vals)
    _write_csv(path, IterationRecord.columns(), rows)


def _summary(est, cfg):
    report = est.report_
    problem = est.problem_
    data = report.summary()
    data["cost_exact"] = cost_J(problem, est.control_).as_dict()
    if report.algorithm == "dca":
        data["cost_smoothed"] = cost_Jgamma(problem, est.control_).as_dict()
    data["null_entries_1e-3"] = sparsity_count(est.control_, 1e-3)
    if problem.box is not None:
        data["box_violation"] = problem.box.violation(est.control_)
    data["config"] = cfg.to_dict()
    return data


def _write_solution(out, est, cfg, status="ok", error=None):
    out.mkdir(parents=True, exist_ok=True)
    grid = est.problem_.grid
    _write_iterations(out / "iterations.csv", est.report_, cfg.timings)
    write_field_csv(out / "u.csv", grid, est.control_)
    write_field_csv(out / "y.csv", grid, est.state_)
    write_field_csv(out / "phi.csv", grid, est.adjoint_)
    summary = _summary(est, cfg)
    summary["status"] = status
    if error:
        summary["error"] = error
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_failure(out, cfg, error):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "summary.json", "w") as fh:
        json.dump({"status": "failed", "error": error, "config": cfg.to_dict()}, fh,
                  indent=2, sort_keys=True)
        fh.write("\n")


SWEEP_COLUMNS = ["value", "cost", "cost_exact", "null_entries", "iterations", "converged",
                 "final_residual"]


def _sweep_row(value, est):
    report = est.report_
    last = report.iterations[-1].residual if report.iterations else math.nan
    cost = (cost_Jgamma(est.problem_, est.control_).total if report.algorithm == "dca"
            else cost_J(est.problem_, est.control_).total)
    return [value, cost, est.cost().total, sparsity_count(est.control_), report.n_iter,
            report.converged, last]


def run(config):
    """Run ``config`` and write its outputs; returns a process exit code.

    0 on success, 1 when a solver fails (partial outputs carry
    ``"status": "failed"``), 2 on invalid settings or IO errors.
    """
    try:
        cfg = config.resolved()
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
    except (ValueError, OSError) as exc:
        logger.error("%s", exc)
        return 2
    try:
        if cfg.sweep is not None:
            name, _ = cfg.sweep
            rows = []
            for value, est in sweep(cfg):
                _write_solution(out / f"{name}={value:g}", est, cfg)
                rows.append(_sweep_row(value, est))
            _write_csv(out / "sweep.csv", ["parameter"] + SWEEP_COLUMNS,
                       [[name] + r for r in rows])
        elif cfg.algorithm == "compare":
            fitted = compare(cfg)
            rows = []
            for algorithm, est in fitted.items():
                _write_solution(out / algorithm, est, cfg)
                rep = est.report_
                rows.append([algorithm, est.cost().total, sparsity_count(est.control_),
                             sparsity_count(est.control_, 1e-3), rep.n_iter])
            _write_csv(out / "comparison.csv", ["algorithm", "cost_exact", "null_entries",
                                                "null_entries_1e-3", "iterations"], rows)
        else:
            _write_solution(out, solve(cfg), cfg)
    except OSError as exc:
        logger.error("cannot write outputs: %s", exc)
        return 2
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        logger.error("solver failed: %s", exc)
        try:
            _write_failure(out, cfg, str(exc))
        except OSError:
            pass
        return 1
    return 0
