"""scikit-learn style wrappers around the two solvers.

An estimator is configured with the discretization and penalty parameters;
``fit`` takes the desired state (and optionally a source term) as a nodal
field. ``transform`` maps controls to states with the fitted operator.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .dca import dca_solve
from .grid import Grid
from .pd import PDParams, pd_solve
from .penalty import PenaltyParams, cost_J
from .problem import BoxConstraints, ControlProblem

__all__ = ["SparseControlDCA", "SparseControlPD", "linear_quadratic_control"]

INITS = ("zero", "tikhonov")


def linear_quadratic_control(problem, tol=1e-10):
    """Minimizer for ``beta = 0`` (the Tikhonov start)."""
    return dca_solve(problem.replace(beta=0.0), outer_tol=tol).u


class _ControlEstimator(TransformerMixin, BaseEstimator):

    def _problem(self, y_d, f):
        grid = Grid(self.n, self.quadrature)
        box = None if self.box is None else BoxConstraints(*self.box)
        params = PenaltyParams(p=self.p, gamma=self._gamma(), alpha=self.alpha, beta=self.beta)
        return ControlProblem(grid, y_d, params, f=f, box=box, grad_weight=self.grad_weight,
                              linear_solver=self.linear_solver)

    def _gamma(self):
        return self.gamma

    def _start(self, problem, u0):
        if u0 is not None:
            return u0
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}, got {self.init!r}")
        if self.init == "tikhonov":
            return linear_quadratic_control(problem)
        return None

    def _finish(self, problem, report):
        self.problem_ = problem
        self.report_ = report
        self.control_ = report.u
        self.state_ = problem.state(report.u)
        self.adjoint_ = problem.adjoint(self.state_)
        self.n_iter_ = report.n_iter
        return self

    def transform(self, X):
        """States for one control field or a stack of them (rows)."""
        check_is_fitted(self, "control_")
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            return self.problem_.state(self.problem_.grid.check_field(X, "control"))
        return np.vstack([self.problem_.state(self.problem_.grid.check_field(x, "control"))
                          for x in X])

    def cost(self, u=None):
        """Cost with the exact quasinorm at ``u`` (the fitted control by default)."""
        check_is_fitted(self, "control_")
        return cost_J(self.problem_, self.control_ if u is None else u)

    def score(self, X=None, y=None):
        return -self.cost().total


class SparseControlDCA(_ControlEstimator):
    """Sparse control by the DC algorithm.

    Parameters
    ----------
    n : int
        Interior nodes per axis.
    alpha, beta, gamma, p : float
        Penalty parameters.
    box : tuple of float, optional
        Control bounds ``(lo, hi)``.
    grad_weight : float
        Weight of the ``|grad u|^2 / 2`` control cost.
    quadrature : {"trapezoid", "uniform"}
    init : {"zero", "tikhonov"}
        Starting control when ``fit`` gets none.
    outer_tol, max_outer :
        Stopping knobs of the outer iteration.
    linear_solver : {"direct", "cg"}

    Attributes
    ----------
    control_, state_, adjoint_ : ndarray
    report_ : SolveReport
    problem_ : ControlProblem
    n_iter_ : int
    """

    def __init__(self, n=31, alpha=0.25, beta=1e-3, gamma=1000.0, p=2.0, box=None,
                 grad_weight=0.0, quadrature="trapezoid", init="zero", outer_tol=1e-6,
                 max_outer=500, linear_solver="direct"):
        self.n = n
        self.alpha = alpha
        self.beta = beta
        self.gamma = gamma
        self.p = p
        self.box = box
        self.grad_weight = grad_weight
        self.quadrature = quadrature
        self.init = init
        self.outer_tol = outer_tol
        self.max_outer = max_outer
        self.linear_solver = linear_solver

    def fit(self, y_d, f=None, u0=None, callback=None):
        problem = self._problem(y_d, f)
        report = dca_solve(problem, u0=self._start(problem, u0), outer_tol=self.outer_tol,
                           max_outer=self.max_outer, callback=callback)
        return self._finish(problem, report)


class SparseControlPD(_ControlEstimator):
    """Comparison solver: the primal-dual reweighting scheme.

    Parameters mirror :class:`SparseControlDCA`; ``epsilon`` replaces
    ``gamma`` and ``sign`` picks the adjoint-row convention (see
    :class:`~sparseoc.pd.PDParams`). The fitted problem carries a nominal
    ``gamma`` only so that the shared problem type can be built.
    """

    def __init__(self, n=31, alpha=0.0, beta=1e-3, epsilon=1e-4, p=2.0, grad_weight=1.0,
                 quadrature="uniform", init="zero", max_iter=100, tol=1e-10, sign="printed",
                 linear_solver="direct"):
        self.n = n
        self.alpha = alpha
        self.beta = beta
        self.epsilon = epsilon
        self.p = p
        self.grad_weight = grad_weight
        self.quadrature = quadrature
        self.init = init
        self.max_iter = max_iter
        self.tol = tol
        self.sign = sign
        self.linear_solver = linear_solver

    box = None

    def _gamma(self):
        return 1.0 / self.epsilon

    def fit(self, y_d, f=None, u0=None, callback=None):
        problem = self._problem(y_d, f)
        pd = PDParams(epsilon=self.epsilon, p=self.p, beta=self.beta, max_iter=self.max_iter,
                      tol=self.tol, sign=self.sign)
        report = pd_solve(problem, pd, u0=self._start(problem, u0), callback=callback)
        self._finish(problem, report)
        # the scheme's multiplier follows its own sign convention
        self.adjoint_ = report.phi
        return self
