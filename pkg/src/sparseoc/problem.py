"""Problem data for the elliptic control problem with sparsity penalty."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .grid import EllipticOperator, EllipticOperatorSpec, Grid
from .penalty import PenaltyParams

__all__ = ["BoxConstraints", "ControlProblem", "solve_state", "solve_adjoint", "project_box"]


def project_box(v, ua, ub):
    ua = np.asarray(ua, dtype=float)
    ub = np.asarray(ub, dtype=float)
    if np.any(ua > ub):
        raise ValueError("lower bound exceeds upper bound")
    return np.minimum(np.maximum(v, ua), ub)


@dataclass(frozen=True, eq=False)
class BoxConstraints:
    """Pointwise bounds ``ua <= u <= ub`` with ``ua <= 0 <= ub`` and ``ua < ub``.

    Bounds may be scalars or nodal arrays.
    """

    ua: object = -np.inf
    ub: object = np.inf

    def __post_init__(self):
        ua = np.asarray(self.ua, dtype=float)
        ub = np.asarray(self.ub, dtype=float)
        if np.any(ua > 0) or np.any(ub < 0):
            raise ValueError("box constraints must satisfy ua <= 0 <= ub")
        if np.any(ua >= ub):
            raise ValueError("box constraints must satisfy ua < ub")
        object.__setattr__(self, "ua", ua)
        object.__setattr__(self, "ub", ub)

    def project(self, v):
        return project_box(v, self.ua, self.ub)

    def at_lower(self, u):
        return np.broadcast_to(u <= self.ua, np.shape(u))

    def at_upper(self, u):
        return np.broadcast_to(u >= self.ub, np.shape(u))

    def violation(self, u):
        return float(np.max(np.maximum(self.ua - u, 0.0) + np.maximum(u - self.ub, 0.0), initial=0.0))

    def as_tuple(self):
        def _plain(a):
            return float(a) if a.ndim == 0 else a.tolist()

        return _plain(self.ua), _plain(self.ub)


@dataclass(frozen=True, eq=False)
class ControlProblem:
    """Minimize ``1/2 |y - y_d|^2 + alpha/2 |u|^2 + beta * Upsilon(u)`` s.t. ``A y = u + f``.

    Parameters
    ----------
    grid : Grid
    y_d : array_like
        Desired state at the nodes.
    params : PenaltyParams
    f : array_like, optional
        Fixed source term; zero by default.
    operator : EllipticOperatorSpec, optional
    box : BoxConstraints, optional
    grad_weight : float
        Weight ``kappa`` of an extra ``kappa/2 |grad u|^2`` control cost
        (finite-difference Dirichlet energy). Zero except for the
        primal-dual comparison problem.
    linear_solver : {"direct", "cg"}
    """

    grid: Grid
    y_d: np.ndarray
    params: PenaltyParams = field(default_factory=PenaltyParams)
    f: np.ndarray = None
    operator: EllipticOperatorSpec = field(default_factory=EllipticOperatorSpec)
    box: BoxConstraints = None
    grad_weight: float = 0.0
    linear_solver: str = "direct"

    def __post_init__(self):
        g = self.grid
        object.__setattr__(self, "y_d", g.check_field(self.y_d, "y_d"))
        f = np.zeros(g.size) if self.f is None else g.check_field(self.f, "f")
        object.__setattr__(self, "f", f)
        if self.grad_weight < 0:
            raise ValueError("grad_weight must be nonnegative")
        for arr in (self.y_d, self.f):
            arr.setflags(write=False)

    def replace(self, **changes):
        """Copy with some fields changed; ``alpha`` etc. update ``params``."""
        param_keys = {"p", "gamma", "alpha", "beta"}
        pchanges = {k: changes.pop(k) for k in list(changes) if k in param_keys}
        kwargs = {
            "grid": self.grid, "y_d": self.y_d, "params": self.params, "f": self.f,
            "operator": self.operator, "box": self.box,
            "grad_weight": self.grad_weight, "linear_solver": self.linear_solver,
        }
        kwargs.update(changes)
        if pchanges:
            base = kwargs["params"]
            merged = {k: getattr(base, k) for k in param_keys}
            merged.update(pchanges)
            kwargs["params"] = PenaltyParams(**merged)
        new = ControlProblem(**kwargs)
        # the factorization only depends on grid, operator and solver
        if (new.grid is self.grid and new.operator == self.operator
                and new.linear_solver == self.linear_solver and "pde" in self.__dict__):
            new.__dict__["pde"] = self.pde
        return new

    @cached_property
    def pde(self):
        return EllipticOperator(self.grid, self.operator, method=self.linear_solver)

    @cached_property
    def Sf(self):
        Sf = self.pde.state(self.f)
        Sf.setflags(write=False)
        return Sf

    def state(self, u):
        """``y = S(u + f)``."""
        return self.pde.state(u) + self.Sf

    def adjoint(self, y):
        """``phi = S*(y - y_d)``."""
        return self.pde.adjoint(y - self.y_d)

    def grad_energy(self, u):
        """Finite-difference ``|grad u|^2`` with zero boundary values."""
        h2 = self.grid.h ** 2
        return float(h2 * np.dot(u, self.pde.laplacian @ u))

    def grad_energy_gradient(self, u):
        """Gradient of ``1/2 grad_energy`` in the quadrature inner product."""
        return self.grid.h ** 2 * (self.pde.laplacian @ u) / self.grid.weights

    def feasible(self, u):
        return u if self.box is None else self.box.project(u)


def solve_state(problem, u):
    return problem.state(problem.grid.check_field(u, "u"))


def solve_adjoint(problem, y):
    return problem.adjoint(problem.grid.check_field(y, "y"))
