"""Random-projection STMs and the thresholded voting ensemble built from them."""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._rng import derive_seed
from .errors import DataError, ShapeError, SolverError, TecError
from .kernels import KernelSpec, cross_kernel, gram_matrix, median_bandwidth
from .projection import (ProjectionSet, default_target_dims, identity_projection,
                         project_many, sample_projection_set)
from .stm import StmProblem, newton_solve
from .tensor import CpTensor


def sign(g) -> np.ndarray:
    """Sign with ``sign(0) = +1``."""
    return np.where(np.asarray(g) >= 0, 1, -1)


@dataclass(eq=False)
class StmModel:
    """One trained RPSTM: coefficients plus the projected training factors."""

    beta: np.ndarray
    labels: np.ndarray
    training_factors: list[CpTensor]
    kernel_spec: KernelSpec
    projection: ProjectionSet
    lam: float
    iterations: int = 0
    converged: bool = True
    objective: float = float("nan")
    timings: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if len(self.beta) != len(self.training_factors) or len(self.labels) != len(self.beta):
            raise ShapeError("beta, labels and training factors must have equal length")
        dims = self.projection.target_dims
        if any(t.mode_dims != dims for t in self.training_factors):
            raise ShapeError("stored training factors do not match the projection dims")

    @property
    def mode_dims(self) -> tuple[int, ...]:
        return self.projection.mode_dims

    def decision_function(self, xs: Sequence[CpTensor]) -> np.ndarray:
        for x in xs:
            if x.mode_dims != self.mode_dims:
                raise ShapeError(f"sample dims {x.mode_dims} do not match model dims {self.mode_dims}")
        projected = project_many(list(xs), self.projection)
        k = cross_kernel(projected, self.training_factors, self.kernel_spec)
        return k @ (self.labels * self.beta)


def _check_training(train: Sequence[CpTensor], labels) -> np.ndarray:
    y = np.asarray(labels, dtype=np.float64).ravel()
    if len(train) == 0:
        raise DataError("empty training set")
    if y.size != len(train):
        raise ShapeError(f"{y.size} labels for {len(train)} samples")
    if not np.all(np.abs(y) == 1):
        raise DataError("labels must be -1 or +1")
    if np.all(y == y[0]):
        raise DataError("training data contain a single class")
    return y


def train_rpstm(train: Sequence[CpTensor], labels, kernel_spec: KernelSpec | None = None,
                lam: float = 1e-2, target_dims: Sequence[int] | None = None, seed: int = 0,
                scaling: str = "inv_sqrt_p", project: bool = True,
                tol: float = 1e-6, max_iter: int = 50) -> StmModel:
    """Project, build the Gram matrix and solve for one ensemble member.

    ``kernel_spec=None`` picks per-mode bandwidths with the median heuristic
    on the projected factors.  ``project=False`` skips compression (identity
    matrices), which reduces the model to a plain STM.
    """
    y = _check_training(train, labels)
    dims = train[0].mode_dims
    rank = max(t.rank for t in train)
    t0 = time.perf_counter()
    if project:
        target = default_target_dims(dims) if target_dims is None else tuple(target_dims)
        proj = sample_projection_set(dims, target, rank, seed, scaling)
    else:
        proj = identity_projection(dims, rank)
    projected = project_many(list(train), proj)
    spec = kernel_spec or KernelSpec(bandwidth=median_bandwidth(projected))
    gram = gram_matrix(projected, spec)
    t1 = time.perf_counter()
    sol = newton_solve(StmProblem(gram, y, lam), tol=tol, max_iter=max_iter)
    t2 = time.perf_counter()
    return StmModel(sol.beta, y, projected, spec, proj, lam, sol.iterations, sol.converged,
                    sol.objective, {"project+gram": t1 - t0, "solve": t2 - t1})


def rpstm_predict(m: StmModel, x: CpTensor) -> float:
    """Decision value of a single member for one tensor."""
    return float(m.decision_function([x])[0])


@dataclass(eq=False)
class TecModel:
    members: list[StmModel]
    gamma: float = 0.0
    master_seed: int = 0

    def __post_init__(self):
        if len(self.members) < 1:
            raise ValueError("an ensemble needs at least one member")
        if not -1.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [-1, 1], got {self.gamma}")

    @property
    def b(self) -> int:
        return len(self.members)

    @property
    def mode_dims(self) -> tuple[int, ...]:
        return self.members[0].mode_dims


def member_seed(master_seed: int, m: int) -> int:
    return derive_seed(master_seed, m)


def _map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _member_failure(m: int, exc: TecError) -> TecError:
    msg = f"ensemble member {m} failed: {exc}"
    if isinstance(exc, SolverError):
        return SolverError(msg, exc.iteration)
    return type(exc)(msg)


def tec_train(train: Sequence[CpTensor], labels, b: int = 5, gamma: float = 0.0,
              lam: float = 1e-2, target_dims: Sequence[int] | None = None,
              kernel_spec: KernelSpec | None = None, master_seed: int = 0,
              scaling: str = "inv_sqrt_p", project: bool = True, threads: int = 1,
              tol: float = 1e-6, max_iter: int = 50) -> TecModel:
    """Train ``b`` RPSTMs with seeds ``derive_seed(master_seed, m)``.

    Members are independent, so ``threads > 1`` trains them concurrently;
    results do not depend on the thread count.
    """
    if b < 1:
        raise ValueError("b must be >= 1")
    _check_training(train, labels)

    def fit(m: int) -> StmModel:
        try:
            return train_rpstm(train, labels, kernel_spec, lam, target_dims, member_seed(master_seed, m),
                               scaling, project, tol, max_iter)
        except TecError as exc:
            raise _member_failure(m, exc) from exc

    return TecModel(_map(fit, list(range(b)), threads), gamma, master_seed)


def member_decisions(m: TecModel, xs: Sequence[CpTensor], threads: int = 1) -> np.ndarray:
    """``(b, n)`` array of member decision values."""
    rows = _map(lambda member: member.decision_function(xs), m.members, threads)
    return np.vstack(rows)


def vote(decisions: np.ndarray, gamma: float) -> np.ndarray:
    """Labels from member decision values: +1 where the mean sign is ``>= gamma``."""
    decisions = np.atleast_2d(decisions)
    tau = sign(decisions).sum(axis=0) / decisions.shape[0]
    return np.where(tau >= gamma, 1, -1).astype(np.int8)


def tec_votes(m: TecModel, xs: Sequence[CpTensor], threads: int = 1) -> np.ndarray:
    """Mean member sign ``tau`` for every sample."""
    d = member_decisions(m, xs, threads)
    return sign(d).sum(axis=0) / m.b


def tec_predict_many(m: TecModel, xs: Sequence[CpTensor], threads: int = 1) -> np.ndarray:
    return vote(member_decisions(m, xs, threads), m.gamma)


def tec_predict(m: TecModel, x: CpTensor) -> int:
    return int(tec_predict_many(m, [x])[0])
