"""Finite-difference discretization of elliptic problems on the unit square.

Fields are plain numpy vectors of length ``n**2`` holding values at the
interior nodes in row-major order (``values.reshape(n, n)[j, i]`` is the node
at ``x = (i + 1) h``, ``y = (j + 1) h``). Homogeneous Dirichlet boundary
values are implicit zeros.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "Grid",
    "EllipticOperatorSpec",
    "EllipticOperator",
    "SolverError",
    "build_grid",
    "assemble_operator",
    "integrate",
    "inner",
    "norm_l1",
    "norm_l2_sq",
    "write_field_csv",
    "read_field_csv",
]

QUADRATURES = ("trapezoid", "uniform")


class SolverError(RuntimeError):
    """Raised when a linear solve fails to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform lattice of interior nodes on (0, 1)^2.

    Parameters
    ----------
    n : int
        Interior nodes per axis.
    quadrature : {"trapezoid", "uniform"}
        ``"trapezoid"`` integrates over the rectangle spanned by the interior
        nodes (weights ``h^2 * {1, 1/2, 1/4}`` for interior, edge and corner
        nodes). ``"uniform"`` gives every node the weight ``h^2``.
    """

    n: int
    quadrature: str = "trapezoid"
    h: float = field(init=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"grid size must be a positive integer, got {self.n!r}")
        if self.quadrature not in QUADRATURES:
            raise ValueError(f"unknown quadrature {self.quadrature!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "h", 1.0 / (self.n + 1))

    @property
    def size(self):
        return self.n * self.n

    @cached_property
    def axis(self):
        return self.h * np.arange(1, self.n + 1)

    @cached_property
    def coords(self):
        """Array of shape ``(n**2, 2)`` with the ``(x, y)`` node positions."""
        X, Y = np.meshgrid(self.axis, self.axis, indexing="xy")
        return np.column_stack([X.ravel(), Y.ravel()])

    @property
    def x(self):
        return self.coords[:, 0]

    @property
    def y(self):
        return self.coords[:, 1]

    @cached_property
    def weights(self):
        h, n = self.h, self.n
        if self.quadrature == "uniform":
            w = np.full(self.size, h * h)
        else:
            w1 = np.full(n, h)
            if n > 1:
                # a single node has a degenerate hull; it keeps the full cell
                w1[0] = w1[-1] = 0.5 * h
            w = np.outer(w1, w1).ravel()
        w.setflags(write=False)
        return w

    @property
    def area(self):
        return float(self.weights.sum())

    def check_field(self, values, name="field"):
        """Return ``values`` as a float vector of length ``n**2``."""
        v = np.asarray(values, dtype=float)
        if v.shape == (self.n, self.n):
            v = v.ravel()
        elif v.ndim == 0:
            v = np.full(self.size, float(v))
        if v.shape != (self.size,):
            raise ValueError(
                f"{name} has shape {np.shape(values)}, expected ({self.size},)"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError(f"{name} contains non-finite values")
        return v

    def sample(self, func):
        """Evaluate ``func(x, y)`` at the nodes."""
        return self.check_field(func(self.x, self.y), name=getattr(func, "__name__", "sample"))


def build_grid(n, quadrature="trapezoid"):
    return Grid(n, quadrature)


@dataclass(frozen=True)
class EllipticOperatorSpec:
    """``-Laplace + c0 * I`` with homogeneous Dirichlet conditions."""

    kind: str = "negative_laplacian"
    c0: float = 0.0

    def __post_init__(self):
        if self.kind != "negative_laplacian":
            raise ValueError(f"unsupported operator kind {self.kind!r}")
        if not np.isfinite(self.c0) or self.c0 < 0:
            raise ValueError("c0 must be a nonnegative real")


def laplacian_matrix(n, h):
    """5-point stencil of ``-Laplace`` on the interior lattice (CSR)."""
    main = np.full(n, 2.0)
    off = np.full(n - 1, -1.0)
    T = sp.diags([off, main, off], [-1, 0, 1], shape=(n, n))
    I = sp.identity(n)
    return (sp.kron(I, T) + sp.kron(T, I)).tocsr() / (h * h)


class EllipticOperator:
    """Assembled discrete operator with state and weighted-adjoint solves.

    ``S = A^{-1}`` is the control-to-state map. Its adjoint with respect to
    the quadrature inner product ``<u, v> = sum(c * u * v)`` is
    ``S* = C^{-1} A^{-1} C``; it reduces to ``A^{-1}`` for uniform weights.

    Parameters
    ----------
    grid : Grid
    spec : EllipticOperatorSpec
    method : {"direct", "cg"}
        ``"direct"`` factorizes once with sparse LU and reuses the factors;
        ``"cg"`` runs Jacobi-preconditioned conjugate gradients.
    rtol : float
        Relative residual tolerance for CG.
    """

    def __init__(self, grid, spec=None, method="direct", rtol=1e-10, maxiter=None):
        if method not in ("direct", "cg"):
            raise ValueError(f"unknown linear solver {method!r}")
        self.grid = grid
        self.spec = spec if spec is not None else EllipticOperatorSpec()
        self.method = method
        self.rtol = rtol
        self.maxiter = maxiter if maxiter is not None else 10 * grid.size + 100
        self.laplacian = laplacian_matrix(grid.n, grid.h)
        A = self.laplacian
        if self.spec.c0:
            A = (A + self.spec.c0 * sp.identity(grid.size)).tocsr()
        self.matrix = A
        self._w = np.asarray(grid.weights)

    def __call__(self, values):
        return self.matrix @ values

    apply = __call__

    @cached_property
    def _lu(self):
        return spla.splu(self.matrix.tocsc())

    @cached_property
    def _jacobi(self):
        d = 1.0 / self.matrix.diagonal()
        return spla.LinearOperator(self.matrix.shape, matvec=lambda v: d * v)

    def solve(self, rhs):
        """Solve ``A x = rhs``."""
        rhs = np.asarray(rhs, dtype=float)
        if self.method == "direct":
            x = self._lu.solve(rhs)
        else:
            x, info = spla.cg(
                self.matrix, rhs, rtol=self.rtol, atol=0.0,
                maxiter=self.maxiter, M=self._jacobi,
            )
            if info != 0:
                res = np.linalg.norm(self.matrix @ x - rhs) / max(np.linalg.norm(rhs), 1e-300)
                raise SolverError(
                    f"CG did not converge in {self.maxiter} iterations "
                    f"(relative residual {res:.3e})", residual=res,
                )
        if not np.all(np.isfinite(x)):
            raise SolverError("linear solve produced non-finite values")
        return x

    def state(self, source):
        """``S source``: the solution of ``A y = source``."""
        return self.solve(source)

    def adjoint(self, source):
        """``S* source`` with respect to the quadrature inner product."""
        return self.solve(self._w * source) / self._w

    @cached_property
    def min_eigenvalue(self):
        """Smallest eigenvalue of the assembled matrix (closed form)."""
        h = self.grid.h
        return 8.0 * np.sin(0.5 * np.pi * h) ** 2 / h**2 + self.spec.c0


def assemble_operator(grid, spec=None, method="direct", **kwargs):
    return EllipticOperator(grid, spec, method=method, **kwargs)


def integrate(grid, values):
    return float(np.dot(grid.weights, values))


def inner(grid, u, v):
    return float(np.dot(grid.weights, u * v))


def norm_l2_sq(grid, values):
    return inner(grid, values, values)


def norm_l1(grid, values):
    return float(np.dot(grid.weights, np.abs(values)))


def write_field_csv(path, grid, values):
    """Dump a field as ``x,y,value`` rows with 17 significant digits."""
    values = grid.check_field(values)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "y", "value"])
        for (x, y), v in zip(grid.coords, values):
            writer.writerow([f"{x:.17g}", f"{y:.17g}", f"{v:.17g}"])


def read_field_csv(path):
    """Read a field dump; returns ``(coords, values)``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, :2], data[:, 2]
