"""Primal Newton solver for the squared-hinge support tensor machine.

Given a Gram matrix ``K``, labels ``y`` in {-1, +1} and ``lam > 0`` the
solver minimises

    J(beta) = lam * beta' D K D beta + (1/n) * sum_i max(0, 1 - y_i f_i)^2,
    f = K D beta,  D = diag(y)

over ``beta``.  With ``S`` the current support set (points with
``y_i f_i < 1``) every iteration solves the stationarity system of the
quadratic piece selected by ``S``:

    (n lam I + I_S D K D) beta = I_S 1

which is a full Newton step on ``J``.  Iteration starts from
``beta = 1`` and stops when ``||beta_new - beta||_2 < tol``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DataError, ShapeError, SolverError
from .kernels import GramMatrix


@dataclass(frozen=True, eq=False)
class StmProblem:
    gram: GramMatrix
    labels: np.ndarray
    lam: float

    def __post_init__(self):
        y = np.asarray(self.labels, dtype=np.float64).ravel()
        if y.size != self.gram.n:
            raise ShapeError(f"{y.size} labels for a {self.gram.n}x{self.gram.n} Gram matrix")
        if not np.all(np.abs(y) == 1.0):
            raise DataError("labels must be -1 or +1")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        y.flags.writeable = False
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.gram.n


@dataclass(frozen=True, eq=False)
class StmSolution:
    beta: np.ndarray
    support_mask: np.ndarray
    iterations: int
    converged: bool
    objective: float


def margins(p: StmProblem, beta) -> np.ndarray:
    """``y_i f_i`` for every training point."""
    y = p.labels
    return y * (p.gram.values @ (y * np.asarray(beta, dtype=np.float64)))


def objective_value(p: StmProblem, beta) -> float:
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (p.n,):
        raise ShapeError(f"beta has shape {beta.shape}, expected ({p.n},)")
    a = p.labels * beta
    reg = p.lam * float(a @ p.gram.values @ a)
    hinge = np.maximum(0.0, 1.0 - margins(p, beta))
    return reg + float(hinge @ hinge) / p.n


def decision_value(beta, labels, kernel_row) -> float:
    """``sum_i kernel_row[i] * labels[i] * beta[i]``."""
    beta = np.asarray(beta, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    kernel_row = np.asarray(kernel_row, dtype=np.float64)
    if not beta.shape == labels.shape == kernel_row.shape:
        raise ShapeError(f"length mismatch: {beta.shape}, {labels.shape}, {kernel_row.shape}")
    return float(kernel_row @ (labels * beta))


def _newton_step(p: StmProblem, support: np.ndarray, iteration: int) -> np.ndarray:
    n, y = p.n, p.labels
    lhs = np.eye(n) * (n * p.lam)
    s = np.flatnonzero(support)
    lhs[s, :] += y[s, None] * p.gram.values[s, :] * y[None, :]
    rhs = support.astype(np.float64)
    try:
        lu, piv = scipy.linalg.lu_factor(lhs, check_finite=True)
        beta = scipy.linalg.lu_solve((lu, piv), rhs)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"Newton system not solvable at iteration {iteration}: {exc}", iteration) from exc
    if not np.all(np.isfinite(beta)) or np.any(np.abs(np.diag(lu)) == 0.0):
        raise SolverError(f"singular Newton system at iteration {iteration}", iteration)
    return beta


def newton_solve(p: StmProblem, tol: float = 1e-6, max_iter: int = 50) -> StmSolution:
    """Run the active-set Newton iteration.

    If a support set recurs before convergence the iterate is replaced by
    the midpoint of the old and new ``beta`` to break the cycle.  Running out
    of iterations returns ``converged=False``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    beta = np.ones(p.n)
    seen: set[bytes] = set()
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        # boundary points (margin exactly 1) join the active set: the loss has
        # zero slope there, and it avoids a wasted step from beta = 1
        support = margins(p, beta) <= 1.0
        new = _newton_step(p, support, it)
        if np.linalg.norm(new - beta) < tol:
            beta = new
            converged = True
            break
        key = np.packbits(support).tobytes()
        if key in seen:
            new = 0.5 * (beta + new)
        seen.add(key)
        beta = new
    beta.flags.writeable = False
    support = margins(p, beta) < 1.0
    return StmSolution(beta, support, it, converged, objective_value(p, beta))
