"""Huber-type smoothing of the L^{1/p} quasinorm and its DC splitting.

All scalar functions are vectorized over numpy arrays. With
``c = (1 - p) / (p * gamma)`` the smoothed absolute value is::

    h(v) = gamma**(p-1) / p * |v|**p     if |v| <= 1/gamma
           |v| + c                       otherwise

and ``h(v)**(1/p) = delta * |v| - j(v)`` with ``delta = gamma**((p-1)/p) / p**(1/p)``
and ``j`` convex, nonnegative and C^1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import integrate, norm_l1, norm_l2_sq

__all__ = [
    "PenaltyParams",
    "CostBreakdown",
    "huber",
    "huber_root",
    "upsilon_p",
    "upsilon_pg",
    "j_value",
    "j_prime",
    "w_field",
    "cost_smooth",
    "cost_J",
    "cost_Jgamma",
    "dc_G",
    "dc_H",
]


@dataclass(frozen=True)
class PenaltyParams:
    """Penalty weights ``(p, gamma, alpha, beta)`` and the derived slope ``delta_gamma``."""

    p: float = 2.0
    gamma: float = 1000.0
    alpha: float = 0.25
    beta: float = 1e-3
    delta_gamma: float = field(init=False)

    def __post_init__(self):
        p, gamma, alpha, beta = (float(v) for v in (self.p, self.gamma, self.alpha, self.beta))
        if not p >= 1:
            raise ValueError(f"p must be >= 1, got {p}")
        if not gamma > 0 or not math.isfinite(gamma):
            raise ValueError(f"gamma must be a positive real, got {gamma}")
        if not alpha >= 0 or not beta >= 0:
            raise ValueError("alpha and beta must be nonnegative")
        for name, v in (("p", p), ("gamma", gamma), ("alpha", alpha), ("beta", beta)):
            object.__setattr__(self, name, v)
        object.__setattr__(self, "delta_gamma", gamma ** ((p - 1) / p) / p ** (1 / p))

    @property
    def shift(self):
        """Constant ``(1 - p) / (p gamma)`` of the outer branch of ``h``."""
        return (1.0 - self.p) / (self.p * self.gamma)

    @property
    def threshold(self):
        """Weight ``beta * delta_gamma`` of the L^1 term in the convex part."""
        return self.beta * self.delta_gamma


@dataclass(frozen=True)
class CostBreakdown:
    tracking: float
    tikhonov: float
    sparsity: float
    gradient: float = 0.0

    @property
    def total(self):
        return self.tracking + self.tikhonov + self.gradient + self.sparsity

    def as_dict(self):
        return {
            "tracking": self.tracking,
            "tikhonov": self.tikhonov,
            "gradient": self.gradient,
            "sparsity": self.sparsity,
            "total": self.total,
        }


def huber(v, params):
    a = np.abs(np.asarray(v, dtype=float))
    p, g = params.p, params.gamma
    inner_branch = (g * np.minimum(a, 1.0 / g)) ** p / (p * g)
    return np.where(a <= 1.0 / g, inner_branch, a + params.shift)


def huber_root(v, params):
    """``huber(v) ** (1/p)``, clamped at zero against junction roundoff."""
    return np.maximum(huber(v, params), 0.0) ** (1.0 / params.p)


def upsilon_p(grid, u, params):
    return integrate(grid, np.abs(u) ** (1.0 / params.p))


def upsilon_pg(grid, u, params):
    return integrate(grid, huber_root(u, params))


def j_value(z, params):
    a = np.abs(np.asarray(z, dtype=float))
    if params.p == 1:
        return np.zeros_like(a)
    outer = params.delta_gamma * a - np.maximum(a + params.shift, 0.0) ** (1.0 / params.p)
    return np.where(a > 1.0 / params.gamma, outer, 0.0)


def j_prime(z, params):
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    if params.p == 1:
        return np.zeros_like(a)
    p = params.p
    active = a > 1.0 / params.gamma
    base = np.where(active, a + params.shift, 1.0)
    slope = params.delta_gamma - base ** ((1.0 - p) / p) / p
    return np.where(active, slope * np.sign(z), 0.0)


def w_field(u, params):
    """Derivative of the concave correction: ``beta * w`` is the gradient of ``H``."""
    return j_prime(u, params)


def _tracking_parts(problem, u, y):
    grid = problem.grid
    tracking = 0.5 * norm_l2_sq(grid, y - problem.y_d)
    tikhonov = 0.5 * problem.params.alpha * norm_l2_sq(grid, u)
    gradient = 0.5 * problem.grad_weight * problem.grad_energy(u) if problem.grad_weight else 0.0
    return tracking, tikhonov, gradient


def cost_smooth(problem, u, y=None):
    """Smooth part ``F`` and its gradient in the quadrature inner product.

    Returns
    -------
    F : float
    grad : ndarray
        ``phi + alpha * u`` (plus the gradient-penalty term when present),
        where ``phi`` is the adjoint state.
    """
    if y is None:
        y = problem.state(u)
    tracking, tikhonov, gradient = _tracking_parts(problem, u, y)
    phi = problem.adjoint(y)
    grad = phi + problem.params.alpha * u
    if problem.grad_weight:
        grad = grad + problem.grad_weight * problem.grad_energy_gradient(u)
    return tracking + tikhonov + gradient, grad


def _cost(problem, u, sparsity):
    y = problem.state(u)
    tracking, tikhonov, gradient = _tracking_parts(problem, u, y)
    return CostBreakdown(tracking, tikhonov, problem.params.beta * sparsity, gradient)


def cost_J(problem, u):
    """Cost with the exact quasinorm term."""
    return _cost(problem, u, upsilon_p(problem.grid, u, problem.params))


def cost_Jgamma(problem, u):
    """Cost with the Huber-smoothed quasinorm term."""
    return _cost(problem, u, upsilon_pg(problem.grid, u, problem.params))


def dc_G(problem, u):
    F, _ = cost_smooth(problem, u)
    return F + problem.params.threshold * norm_l1(problem.grid, u)


def dc_H(problem, u):
    return problem.params.beta * integrate(problem.grid, j_value(u, problem.params))
