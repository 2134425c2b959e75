"""Accelerated proximal gradient solver for the convex L^1 subproblem.

The subproblem at a DC step reads::

    min_u  F(u) - <w, u> + lam * |u|_1   (+ indicator of the box)

with ``F`` the smooth tracking/Tikhonov part and ``lam = beta * delta_gamma``.
Gradients are taken in the quadrature inner product, so the proximal map is
the node-wise ``clamp(soft_threshold(x, lam / L))``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .grid import inner, norm_l1, norm_l2_sq
from .problem import project_box

__all__ = [
    "SubproblemResult",
    "soft_threshold",
    "project_box",
    "lipschitz_estimate",
    "inclusion_residual",
    "solve_l1",
]


def soft_threshold(v, lam):
    if np.any(np.asarray(lam) < 0):
        raise ValueError("threshold must be nonnegative")
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


def _power_iteration(op, grid, rng, max_iter, rtol):
    v = rng.standard_normal(grid.size)
    v /= np.sqrt(norm_l2_sq(grid, v))
    est = 0.0
    for _ in range(max_iter):
        Mv = op(v)
        new = inner(grid, v, Mv)
        nrm = np.sqrt(norm_l2_sq(grid, Mv))
        if nrm == 0.0:
            return 0.0, True
        v = Mv / nrm
        if abs(new - est) <= rtol * abs(new):
            return new, True
        est = new
    return est, False


def lipschitz_estimate(problem, inflate=1.05, max_iter=500, rtol=1e-8, seed=0):
    """Upper bound for the Lipschitz constant of the smooth gradient.

    ``1.05 * lambda_max(S*S) + alpha`` with the top eigenvalue found by power
    iteration in the quadrature inner product. The gradient-penalty term, when
    present, is bounded by the row-sum norm of ``C^{-1} h^2 E``.
    """
    grid = problem.grid
    pde = problem.pde
    rng = np.random.default_rng(seed)

    def normal(v):
        return pde.adjoint(pde.state(v))

    lam, ok = _power_iteration(normal, grid, rng, max_iter, rtol)
    if not ok:
        w = grid.weights
        bound = (w.max() / w.min()) / pde.min_eigenvalue**2
        warnings.warn(
            "power iteration did not converge; using the conservative bound "
            f"{bound:.3e} for |S|^2", RuntimeWarning, stacklevel=2,
        )
        lam = bound / inflate
    L = inflate * lam + problem.params.alpha
    if problem.grad_weight:
        E = abs(pde.laplacian)
        rowsum = np.asarray(E.sum(axis=1)).ravel()
        L += problem.grad_weight * grid.h**2 * float(np.max(rowsum / grid.weights))
    return L


def inclusion_residual(g, u, lam, box=None):
    """Pointwise distance of 0 to ``g + lam * d|u| + N_box(u)``.

    The set is an interval at every node; the distance of 0 to ``[lo, hi]``
    is ``max(lo, -hi, 0)``.
    """
    sgn = np.sign(u)
    zero = u == 0
    lo = g + lam * np.where(zero, -1.0, sgn)
    hi = g + lam * np.where(zero, 1.0, sgn)
    if box is not None:
        lo = np.where(box.at_lower(u), -np.inf, lo)
        hi = np.where(box.at_upper(u), np.inf, hi)
    return np.maximum(np.maximum(lo, -hi), 0.0)


@dataclass
class SubproblemResult:
    u: np.ndarray
    inner_iterations: int
    kkt_residual: float
    objective: float
    converged: bool


class _Subproblem:
    """Objective pieces of one subproblem, reusing the linearity of ``S``."""

    def __init__(self, problem, w, lam):
        self.problem = problem
        self.grid = problem.grid
        self.w = w
        self.lam = lam
        self.alpha = problem.params.alpha
        self.kappa = problem.grad_weight

    def state(self, u):
        return self.problem.pde.state(u)

    def value(self, u, Su):
        g, P = self.grid, self.problem
        r = Su + P.Sf - P.y_d
        val = 0.5 * norm_l2_sq(g, r) + 0.5 * self.alpha * norm_l2_sq(g, u) - inner(g, self.w, u)
        if self.kappa:
            val += 0.5 * self.kappa * P.grad_energy(u)
        return val + self.lam * norm_l1(g, u)

    def gradient(self, u, Su):
        P = self.problem
        grad = P.pde.adjoint(Su + P.Sf - P.y_d) + self.alpha * u - self.w
        if self.kappa:
            grad = grad + self.kappa * P.grad_energy_gradient(u)
        return grad


def solve_l1(problem, w, u_init=None, tol=1e-8, max_iter=5000, box=None, L=None,
             lam=None):
    """Minimize ``F(u) - <w, u> + lam |u|_1`` over the optional box.

    FISTA with function-value restart: an iterate that would increase the
    objective is rejected and the momentum reset, so accepted iterates are
    monotone and the result never has a larger objective than ``u_init``.

    Parameters
    ----------
    problem : ControlProblem
    w : ndarray
        Linear term (``beta * w_k`` in the DC iteration).
    u_init : ndarray, optional
        Warm start; projected onto the box. Zero by default.
    tol : float
        Target for the maximum pointwise optimality residual.
    box : BoxConstraints, optional
        Defaults to ``problem.box``.
    L : float, optional
        Step-size constant; estimated when omitted.
    lam : float, optional
        L^1 weight; defaults to ``beta * delta_gamma``.

    Returns
    -------
    SubproblemResult
        ``converged`` is False when ``max_iter`` was hit first; the best
        iterate is returned either way.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    grid = problem.grid
    box = problem.box if box is None else box
    w = grid.check_field(w, "w")
    lam = problem.params.threshold if lam is None else float(lam)
    if L is None:
        L = lipschitz_estimate(problem)
    sub = _Subproblem(problem, w, lam)

    def prox(v):
        out = soft_threshold(v, lam / L)
        return out if box is None else project_box(out, box.ua, box.ub)

    x = np.zeros(grid.size) if u_init is None else grid.check_field(u_init, "u_init").copy()
    if box is not None:
        x = box.project(x)
    Sx = sub.state(x)
    fx = sub.value(x, Sx)
    gx = sub.gradient(x, Sx)
    kkt = float(np.max(inclusion_residual(gx, x, lam, box)))
    start = (x, fx, kkt)
    z, gz, t = x, gx, 1.0
    it = 0

    def descends(f_new, f_old):
        # objective gains below roundoff still count as progress
        return f_new <= f_old + 64 * np.finfo(float).eps * (abs(f_old) + 1e-300)

    while kkt > tol and it < max_iter:
        it += 1
        x_new = prox(z - gz / L)
        Sx_new = sub.state(x_new)
        f_new = sub.value(x_new, Sx_new)
        if not descends(f_new, fx) and t > 1.0:
            # restart from the last accepted point
            z, gz, t = x, gx, 1.0
            continue
        g_new = sub.gradient(x_new, Sx_new)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        mom = (t - 1.0) / t_new
        # the gradient is affine in u, so the extrapolated gradient is exact
        z = x_new + mom * (x_new - x)
        gz = g_new + mom * (g_new - gx)
        if descends(f_new, fx):
            x, Sx, fx, gx = x_new, Sx_new, f_new, g_new
            kkt = float(np.max(inclusion_residual(gx, x, lam, box)))
        else:
            # plain prox-gradient step failed to descend: only roundoff is left
            z, gz = x, gx
            break
        t = t_new
    if not descends(fx, start[1]):
        x, fx, kkt = start
    return SubproblemResult(
        u=x, inner_iterations=it, kkt_residual=kkt, objective=fx, converged=kkt <= tol,
    )
