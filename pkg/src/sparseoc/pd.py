"""Primal-dual reweighting scheme for the gradient-penalized sparse problem.

The comparison problem is::

    min  1/2 |y - y_d|^2 + kappa/2 |grad u|^2 + alpha/2 |u|^2 + beta * Upsilon_p(u)
    s.t. E y = u,   E = -Laplace (Dirichlet)

Each iteration freezes the weight ``D_k = (beta/p) / max(eps**(2-1/p), |u_k|**(2-1/p))``
and solves the block system in ``(u, phi, y)``::

    (kappa E + alpha I + D_k) u + phi = 0
    E phi - y = s * y_d
    -u + E y = 0

with ``s = +1`` as printed in the reference scheme and ``s = -1`` for the
sign that matches ``E phi = y - y_d``. Eliminating ``u = E y`` and ``phi``
leaves one sparse SPD system for ``y``::

    (E (kappa E + alpha I + D_k) E + I) y = -s * y_d

The scheme works in the Euclidean nodal inner product, so it is only
consistent with the ``"uniform"`` quadrature.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import brentq

from .dca import IterationRecord, SolveReport, sparsity_count
from .grid import SolverError, norm_l2_sq
from .penalty import PenaltyParams, cost_J, huber_root

__all__ = [
    "PDParams",
    "pd_solve",
    "pd_weight",
    "pd_regularizer",
    "regularization_error",
    "match_regularization",
]

SIGNS = ("printed", "adjoint")


@dataclass(frozen=True)
class PDParams:
    """Knobs of the primal-dual scheme.

    Parameters
    ----------
    epsilon : float
        Floor of the reweighting denominator; must be positive.
    p : float
    beta : float
    max_iter : int
    tol : float
        Stop when ``|u_{k+1} - u_k| / |u_k| <= tol``.
    sign : {"printed", "adjoint"}
        Right-hand side convention of the adjoint row.
    """

    epsilon: float = 1e-4
    p: float = 2.0
    beta: float = 1e-3
    max_iter: int = 100
    tol: float = 1e-10
    sign: str = "printed"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.p > 1:
            raise ValueError("the primal-dual scheme needs p > 1")
        if not self.beta >= 0:
            raise ValueError("beta must be nonnegative")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValueError("max_iter must be a positive integer")
        if self.sign not in SIGNS:
            raise ValueError(f"sign must be one of {SIGNS}")


def pd_weight(u, pd):
    """Diagonal of ``D_k``; bounded by ``(beta/p) * eps**-(2-1/p)``."""
    expo = 2.0 - 1.0 / pd.p
    return (pd.beta / pd.p) / np.maximum(pd.epsilon ** expo, np.abs(u) ** expo)


def pd_regularizer(t, p, epsilon):
    """Local majorant of ``|t|**(1/p)`` whose derivative matches the PD weight.

    Quadratic ``|t|**2 / (2 p eps**(2-1/p)) + (1 - 1/(2p)) eps**(1/p)`` on
    ``|t| < eps`` and ``|t|**(1/p)`` outside.
    """
    a = np.abs(np.asarray(t, dtype=float))
    quad = a * a / (2.0 * p * epsilon ** (2.0 - 1.0 / p)) + (1.0 - 0.5 / p) * epsilon ** (1.0 / p)
    return np.where(a < epsilon, quad, a ** (1.0 / p))


def _huber_error(t, p, gamma):
    params = PenaltyParams(p=p, gamma=gamma, alpha=0.0, beta=0.0)
    return np.abs(t) ** (1.0 / p) - huber_root(t, params)


def regularization_error(kind, p, param, t_step=0.005, t_max=1.0):
    """``sup_t ||t|^(1/p) - t_r(t)|`` for the smoothed or the PD regularizer.

    Parameters
    ----------
    kind : {"huber", "pd"}
    p : float
    param : float
        ``gamma`` for ``"huber"``, ``epsilon`` for ``"pd"``.
    t_step : float or None
        With a step the supremum is taken over ``t = 0, t_step, ..., t_max``;
        ``None`` gives the exact supremum over the real line.
    """
    if kind not in ("huber", "pd"):
        raise ValueError(f"unknown regularizer {kind!r}")
    if not param > 0:
        raise ValueError("regularization parameter must be positive")
    if t_step is not None:
        if not t_step > 0:
            raise ValueError("t_step must be positive")
        t = np.arange(0.0, t_max + 0.5 * t_step, t_step)
        if kind == "huber":
            err = _huber_error(t, p, param)
        else:
            err = pd_regularizer(t, p, param) - t ** (1.0 / p)
        return float(np.max(np.abs(err)))
    if kind == "pd":
        # the majorant is furthest from |t|^(1/p) at t = 0
        return (1.0 - 0.5 / p) * param ** (1.0 / p)
    if p == 1:
        return 0.0
    # on |t| <= 1/gamma the error t^(1/p) - delta t peaks where its slope vanishes;
    # beyond 1/gamma it decreases
    delta = PenaltyParams(p=p, gamma=param, alpha=0.0, beta=0.0).delta_gamma
    t_star = min((p * delta) ** (p / (1.0 - p)), 1.0 / param)
    return float(t_star ** (1.0 / p) - delta * t_star)


def match_regularization(p, target_Re, t_step=0.005, bracket=(1e-2, 1e12)):
    """Regularization parameters whose error is about ``target_Re``.

    Returns
    -------
    gamma : float
        Smoothing parameter with ``regularization_error("huber", ...) ~ target_Re``,
        found by bisection on ``log gamma``.
    epsilon : float
        PD floor with the same error.
    """
    if not target_Re > 0:
        raise ValueError("target_Re must be positive")
    if not p > 1:
        raise ValueError("matching needs p > 1")

    def gap(log_gamma):
        return regularization_error("huber", p, math.exp(log_gamma), t_step) - target_Re

    lo, hi = (math.log(b) for b in bracket)
    if gap(lo) < 0 or gap(hi) > 0:
        raise ValueError(f"target_Re={target_Re} is outside the reachable range")
    if t_step is None:
        log_gamma = brentq(gap, lo, hi, xtol=1e-12)
    else:
        # the sampled error is monotone but only piecewise smooth: plain bisection
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if gap(mid) > 0:
                lo = mid
            else:
                hi = mid
        log_gamma = hi
    gamma = math.exp(log_gamma)
    # the PD error sits at t = 0 in both modes, so epsilon has a closed form
    epsilon = (target_Re / (1.0 - 0.5 / p)) ** p
    return gamma, epsilon


def _check_problem(problem):
    if problem.operator.c0 != 0:
        raise ValueError("the primal-dual scheme assumes E = -Laplace (c0 = 0)")
    if problem.box is not None:
        raise ValueError("the primal-dual scheme does not handle box constraints")
    if problem.grid.quadrature != "uniform":
        raise ValueError("the primal-dual scheme needs the uniform quadrature")
    if np.any(problem.f != 0):
        raise ValueError("the primal-dual scheme assumes f = 0")
    if problem.grad_weight == 0 and problem.params.alpha == 0:
        raise ValueError("need grad_weight > 0 or alpha > 0")


def pd_solve(problem, pd, u0=None, callback=None):
    """Run the primal-dual scheme.

    Parameters
    ----------
    problem : ControlProblem
        Uses ``grad_weight`` as ``kappa`` and ``params.alpha``; the
        penalty exponent and weight come from ``pd``.
    pd : PDParams
    u0 : ndarray, optional
        Initial control (zero by default).

    Returns
    -------
    SolveReport
        ``residual`` holds the relative change of ``u``; the recorded cost
        uses the exact quasinorm and is not monotone in general.
    """
    _check_problem(problem)
    grid = problem.grid
    E = problem.pde.matrix.tocsr()
    kappa, alpha = problem.grad_weight, problem.params.alpha
    s = 1.0 if pd.sign == "printed" else -1.0
    rhs = -s * problem.y_d
    cost_problem = problem.replace(p=pd.p, beta=pd.beta)
    base = kappa * E + alpha * sp.identity(grid.size, format="csr")
    ident = sp.identity(grid.size, format="csr")

    u = np.zeros(grid.size) if u0 is None else grid.check_field(u0, "u0").copy()
    records = []
    converged = False
    y = phi = None
    for k in range(1, int(pd.max_iter) + 1):
        t0 = time.perf_counter()
        D = sp.diags(pd_weight(u, pd))
        M = (E @ (base + D) @ E + ident).tocsc()
        y = spla.spsolve(M, rhs)
        if not np.all(np.isfinite(y)):
            raise SolverError("primal-dual system produced non-finite values")
        u_new = E @ y
        phi = -((base + D) @ u_new)
        nrm = math.sqrt(norm_l2_sq(grid, u))
        change = math.sqrt(norm_l2_sq(grid, u_new - u))
        rel = change / nrm if nrm > 0 else (0.0 if change == 0 else math.inf)
        u = u_new
        rec = IterationRecord(
            k=k, cost=cost_J(cost_problem, u).total, residual=rel, zeta_gap=0.0,
            null_entries=sparsity_count(u), inner_iterations=1,
            elapsed_seconds=time.perf_counter() - t0,
        )
        records.append(rec)
        if callback is not None:
            callback(rec, u)
        if rel <= pd.tol:
            converged = True
            break

    if y is None:
        y = problem.state(u)
        phi = np.zeros_like(u)
    return SolveReport(
        iterations=records, u=u, y=y, phi=phi, zeta=np.zeros_like(u),
        w=pd_weight(u, pd), converged=converged, kkt=None, algorithm="pd",
    )
