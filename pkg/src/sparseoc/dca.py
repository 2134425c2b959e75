"""DC algorithm for the Huber-smoothed sparse control problem.

Each outer step linearizes the concave correction at ``u_k`` (``beta * w_k``
is the gradient of ``H``) and solves the convex L^1 subproblem warm-started
at ``u_k``. Because the subproblem solver never returns a point with a
larger subproblem objective than its start, the smoothed cost is
non-increasing along the iteration.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .grid import norm_l2_sq
from .l1 import inclusion_residual, lipschitz_estimate, solve_l1
from .penalty import cost_Jgamma, w_field

__all__ = [
    "IterationRecord",
    "KKTResiduals",
    "SolveReport",
    "dca_solve",
    "stationarity_residual",
    "kkt_residuals",
    "null_beta_threshold",
    "sparsity_count",
]

logger = logging.getLogger(__name__)


@dataclass
class IterationRecord:
    k: int
    cost: float
    residual: float
    zeta_gap: float
    null_entries: int
    inner_iterations: int
    elapsed_seconds: float

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]


@dataclass
class KKTResiduals:
    gradient_eq: float
    zeta_bound: float
    sign_consistency: float
    complementarity: float = 0.0

    def max(self):
        return max(self.gradient_eq, self.zeta_bound, self.sign_consistency, self.complementarity)


@dataclass
class SolveReport:
    iterations: list
    u: np.ndarray
    y: np.ndarray
    phi: np.ndarray
    zeta: np.ndarray
    w: np.ndarray
    converged: bool
    kkt: KKTResiduals = None
    algorithm: str = "dca"
    inner_tolerances: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def n_iter(self):
        return len(self.iterations)

    @property
    def costs(self):
        return np.array([r.cost for r in self.iterations])

    def summary(self):
        """JSON-ready scalars; fields are left out."""
        last = self.iterations[-1] if self.iterations else None
        return {
            "algorithm": self.algorithm,
            "converged": bool(self.converged),
            "iterations": self.n_iter,
            "final_cost": None if last is None else last.cost,
            "final_residual": None if last is None else last.residual,
            "null_entries": sparsity_count(self.u),
            "kkt": None if self.kkt is None else asdict(self.kkt),
            "warnings": list(self.warnings),
        }

    def to_json(self, **kwargs):
        data = self.summary()
        data["iteration_table"] = [asdict(r) for r in self.iterations]
        return json.dumps(data, **kwargs)


def sparsity_count(u, tol=0.0):
    """Number of nodes with ``|u_i| <= tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return int(np.count_nonzero(np.abs(u) <= tol))


def _smooth_gradient(problem, u, phi):
    g = phi + problem.params.alpha * u
    if problem.grad_weight:
        g = g + problem.grad_weight * problem.grad_energy_gradient(u)
    return g


def stationarity_residual(problem, u, phi, w):
    """Stationarity measure of ``u`` for the smoothed problem.

    ``zeta = (beta w - grad F(u)) / (beta delta_gamma)`` should be a
    subgradient of ``|.|`` at ``u``: on the support the residual is
    ``|zeta - sign(u)|``, off the support ``max(|zeta| - 1, 0)``. With box
    constraints, nodes at a bound only count when the normal cone cannot
    absorb the violation.

    Returns
    -------
    residual : float
        Maximum over nodes.
    zeta : ndarray
    """
    lam = problem.params.threshold
    if lam <= 0:
        raise ValueError("stationarity residual needs beta * delta_gamma > 0")
    g = _smooth_gradient(problem, u, phi) - problem.params.beta * w
    zeta = -g / lam
    res = inclusion_residual(g, u, lam, problem.box) / lam
    return float(np.max(res, initial=0.0)), zeta


def _gradient_residual(problem, u, phi):
    """Fallback measure when there is no L^1 term: projected-gradient violation."""
    g = _smooth_gradient(problem, u, phi)
    return float(np.max(inclusion_residual(g, u, 0.0, problem.box), initial=0.0))


def kkt_residuals(problem, u, phi, w):
    """Residuals of the pointwise optimality system at ``u``.

    ``zeta`` is taken as ``sign(u)`` on the support and as the clipped
    ratio elsewhere; ``lambda_a``/``lambda_b`` are the positive/negative parts
    of the gradient-equation residual.
    """
    params = problem.params
    lam = params.threshold
    g0 = _smooth_gradient(problem, u, phi) - params.beta * w
    support = u != 0
    raw = -g0 / lam if lam > 0 else np.zeros_like(u)
    zeta = np.where(support, np.sign(u), np.clip(raw, -1.0, 1.0))
    r = g0 + lam * zeta
    if problem.box is not None:
        active = problem.box.at_lower(u) | problem.box.at_upper(u)
    else:
        active = np.zeros(u.shape, dtype=bool)
    free = ~active
    grad_eq = float(np.max(np.abs(r[free]), initial=0.0))
    off = free & ~support
    zeta_bound = float(np.max(np.abs(raw[off]) - 1.0, initial=0.0))
    on = free & support
    sign_cons = float(np.max(np.abs(raw[on] - np.sign(u[on])), initial=0.0))
    comp = 0.0
    if problem.box is not None:
        lam_a = np.maximum(r, 0.0)
        lam_b = np.maximum(-r, 0.0)
        ua = np.broadcast_to(problem.box.ua, u.shape)
        ub = np.broadcast_to(problem.box.ub, u.shape)
        with np.errstate(invalid="ignore"):
            ca = np.where(np.isfinite(ua), lam_a * (u - ua), 0.0)
            cb = np.where(np.isfinite(ub), lam_b * (ub - u), 0.0)
        comp = float(np.max(np.maximum(ca, cb), initial=0.0))
    return KKTResiduals(max(grad_eq, 0.0), max(zeta_bound, 0.0), sign_cons, comp)


def null_beta_threshold(problem, M=1.0):
    """``M**((p-1)/p) * |S*(S f - y_d)|_inf``: above it, zero is a local minimizer."""
    if not M > 0:
        raise ValueError("M must be positive")
    p = problem.params.p
    phi0 = problem.adjoint(problem.Sf)
    return M ** ((p - 1.0) / p) * float(np.max(np.abs(phi0)))


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise FloatingPointError("non-finite values in DC iterate")


def dca_solve(problem, u0=None, outer_tol=1e-6, max_outer=500, inner_max_iter=5000,
              zeta_gap_tol=1e-8, callback=None):
    """Run the DC algorithm from ``u0`` (zero by default).

    Stops when the stationarity residual drops to ``outer_tol``, when the
    iteration stalls (``zeta_gap < zeta_gap_tol`` while neither the residual
    nor the cost decreases) or after ``max_outer`` steps. ``converged``
    reflects the residual test only.

    Parameters
    ----------
    problem : ControlProblem
    u0 : ndarray, optional
    outer_tol : float
    max_outer : int
    inner_max_iter : int
        Iteration cap for each subproblem solve.
    callback : callable, optional
        Called as ``callback(record, u)`` after every outer step.

    Returns
    -------
    SolveReport
    """
    if outer_tol <= 0:
        raise ValueError("outer_tol must be positive")
    params = problem.params
    grid = problem.grid
    lam = params.threshold
    # H vanishes identically: a single convex solve is the whole method
    trivial_h = params.p == 1 or params.beta == 0

    u = np.zeros(grid.size) if u0 is None else grid.check_field(u0, "u0").copy()
    u = problem.feasible(u)
    L = lipschitz_estimate(problem)

    def measure(u):
        y = problem.state(u)
        phi = problem.adjoint(y)
        w = w_field(u, params)
        _check_finite(y, phi, w)
        if lam > 0:
            res, zeta = stationarity_residual(problem, u, phi, w)
        else:
            res, zeta = _gradient_residual(problem, u, phi), np.zeros_like(u)
        return y, phi, w, res, zeta

    y, phi, w, res, zeta = measure(u)
    records, tolerances, notes = [], [], []
    converged = res <= outer_tol
    cost = cost_Jgamma(problem, u).total
    k = 0
    prev_res = res
    while not converged and k < max_outer:
        k += 1
        t0 = time.perf_counter()
        scale = lam if lam > 0 else 1.0
        target = outer_tol if trivial_h else res
        inner_tol = max(1e-10, 0.1 * scale * target)
        sub = solve_l1(problem, params.beta * w, u_init=u, tol=inner_tol,
                       max_iter=inner_max_iter, L=L)
        if not sub.converged:
            notes.append(f"k={k}: inner solve stopped at residual {sub.kkt_residual:.3e} "
                         f"(tol {inner_tol:.3e})")
            logger.warning(notes[-1])
        u_new = sub.u
        y, phi, w, res, zeta_new = measure(u_new)
        new_cost = cost_Jgamma(problem, u_new).total
        if new_cost > cost + 10 * inner_tol:
            notes.append(f"k={k}: cost increased by {new_cost - cost:.3e}")
            logger.warning(notes[-1])
        gap = math.sqrt(norm_l2_sq(grid, zeta_new - zeta))
        # a stall: multipliers frozen, residual not improving and no cost
        # decrease above roundoff
        stalled = (gap < zeta_gap_tol and res >= prev_res
                   and cost - new_cost <= 64 * np.finfo(float).eps * abs(cost))
        u, zeta, cost, prev_res = u_new, zeta_new, new_cost, res
        rec = IterationRecord(
            k=k, cost=cost, residual=res, zeta_gap=gap,
            null_entries=sparsity_count(u), inner_iterations=sub.inner_iterations,
            elapsed_seconds=time.perf_counter() - t0,
        )
        records.append(rec)
        tolerances.append(inner_tol)
        logger.debug("dca k=%d cost=%.10g residual=%.3e null=%d inner=%d",
                     k, cost, res, rec.null_entries, rec.inner_iterations)
        if callback is not None:
            callback(rec, u)
        converged = res <= outer_tol
        if trivial_h or stalled:
            break

    kkt = kkt_residuals(problem, u, phi, w)
    return SolveReport(
        iterations=records, u=u, y=y, phi=phi, zeta=zeta, w=w,
        converged=bool(converged), kkt=kkt, algorithm="dca",
        inner_tolerances=tolerances, warnings=notes,
    )
