"""CP tensors, dense tensors, unfolding and CP-ALS.

Unfolding follows Kolda & Bader: the mode-``n`` unfolding of an
``I_1 x ... x I_d`` tensor is ``I_n x prod(I_j, j != n)`` and the remaining
indices are laid out with the *lowest* mode varying fastest.  With that
convention ``unfold(X, n) == A_n @ khatri_rao(A_d, ..., A_{n+1}, A_{n-1}, ..., A_1).T``
for ``X = [A_1, ..., A_d]``.

Modes are 0-based throughout the Python API.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Callable, Sequence

import numpy as np

from ._rng import stream
from .errors import CapacityError, ShapeError

#: Largest dense tensor (in entries) that :func:`cp_reconstruct` will build.
MAX_DENSE_ENTRIES = 1 << 28


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class CpTensor:
    """A d-mode tensor held as factor matrices ``factors[j]`` of shape ``(I_j, r)``.

    The tensor is ``sum_k factors[0][:, k] o factors[1][:, k] o ... o factors[d-1][:, k]``.
    Factor arrays are copied and made read-only on construction.
    """

    factors: tuple[np.ndarray, ...]

    def __init__(self, factors: Sequence[np.ndarray]):
        if len(factors) < 1:
            raise ShapeError("a CP tensor needs at least one mode")
        fs = []
        for j, f in enumerate(factors):
            f = np.asarray(f, dtype=np.float64)
            if f.ndim == 1:
                f = f[:, None]
            if f.ndim != 2 or f.shape[0] < 1 or f.shape[1] < 1:
                raise ShapeError(f"factor {j} must be a non-empty 2-d array, got shape {f.shape}")
            fs.append(_frozen(f))
        rank = fs[0].shape[1]
        for j, f in enumerate(fs):
            if f.shape[1] != rank:
                raise ShapeError(f"factor {j} has {f.shape[1]} columns, expected rank {rank}")
            if not np.all(np.isfinite(f)):
                raise ShapeError(f"factor {j} has non-finite entries")
        object.__setattr__(self, "factors", tuple(fs))

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def ndim(self) -> int:
        return len(self.factors)

    @property
    def mode_dims(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    def component(self, mode: int, k: int) -> np.ndarray:
        return self.factors[mode][:, k]

    def __repr__(self) -> str:
        dims = "x".join(map(str, self.mode_dims))
        return f"CpTensor({dims}, rank={self.rank})"


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """Row-major dense tensor: ``values`` is flat with length ``prod(mode_dims)``."""

    mode_dims: tuple[int, ...]
    values: np.ndarray

    def __init__(self, mode_dims: Sequence[int], values):
        dims = tuple(int(i) for i in mode_dims)
        if not dims or any(i < 1 for i in dims):
            raise ShapeError(f"invalid mode dims {dims}")
        v = np.asarray(values, dtype=np.float64).reshape(-1)
        if v.size != int(np.prod(dims)):
            raise ShapeError(f"{v.size} values do not fill a {dims} tensor")
        if not np.all(np.isfinite(v)):
            raise ShapeError("dense tensor has non-finite entries")
        object.__setattr__(self, "mode_dims", dims)
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def from_array(cls, a) -> DenseTensor:
        a = np.asarray(a, dtype=np.float64)
        return cls(a.shape, a.reshape(-1))

    @property
    def ndim(self) -> int:
        return len(self.mode_dims)

    @property
    def array(self) -> np.ndarray:
        """Read-only view with shape ``mode_dims``."""
        return self.values.reshape(self.mode_dims)

    def __repr__(self) -> str:
        return f"DenseTensor({'x'.join(map(str, self.mode_dims))})"


def cp_reconstruct(t: CpTensor, max_entries: int = MAX_DENSE_ENTRIES) -> DenseTensor:
    """Expand ``t`` into a dense tensor.

    Raises
    ------
    CapacityError
        If the dense result would hold more than ``max_entries`` values.
    """
    size = int(np.prod([int(i) for i in t.mode_dims], dtype=object))
    if size > max_entries:
        raise CapacityError(f"dense reconstruction needs {size} entries (limit {max_entries})")
    # Row-major: first mode slowest, so the last factor sits on the right of the KR chain.
    kr = reduce(khatri_rao, t.factors)
    return DenseTensor(t.mode_dims, kr.sum(axis=1))


def _check_mode(ndim: int, mode: int) -> int:
    if not 0 <= mode < ndim:
        raise ShapeError(f"mode {mode} out of range for a {ndim}-mode tensor")
    return mode


def mode_unfold(t: DenseTensor | np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding, shape ``(I_mode, prod of the other dims)``."""
    a = t.array if isinstance(t, DenseTensor) else np.asarray(t)
    _check_mode(a.ndim, mode)
    return np.reshape(np.moveaxis(a, mode, 0), (a.shape[mode], -1), order="F")


def mode_refold(m: np.ndarray, mode: int, mode_dims: Sequence[int]) -> DenseTensor:
    """Inverse of :func:`mode_unfold`."""
    dims = tuple(int(i) for i in mode_dims)
    _check_mode(len(dims), mode)
    rest = dims[:mode] + dims[mode + 1:]
    m = np.asarray(m)
    if m.shape != (dims[mode], int(np.prod(rest))):
        raise ShapeError(f"matrix of shape {m.shape} is not a mode-{mode} unfolding of {dims}")
    a = np.reshape(m, (dims[mode],) + rest, order="F")
    return DenseTensor.from_array(np.moveaxis(a, 0, mode))


def khatri_rao(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise Kronecker product; column ``k`` is ``np.kron(a[:, k], b[:, k])``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeError(f"khatri_rao needs equal column counts, got {a.shape} and {b.shape}")
    return (a[:, None, :] * b[None, :, :]).reshape(a.shape[0] * b.shape[0], a.shape[1])


def canonicalize(factors: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Put CP factors in a balanced, sign-fixed, weight-sorted form.

    Each rank-one term keeps its value, but its overall magnitude ``w`` is
    split evenly (every column gets norm ``w ** (1/d)``), the column sums of
    modes ``0 .. d-2`` are made non-negative (signs pushed into the last
    mode) and components are ordered by decreasing ``w``.  Without this the
    kernel would compare factors whose scale and sign are arbitrary.
    """
    fs = [np.array(f, dtype=np.float64) for f in factors]
    d = len(fs)
    norms = np.array([np.linalg.norm(f, axis=0) for f in fs])  # (d, r)
    weights = np.prod(norms, axis=0)
    r = weights.size
    out = [np.zeros_like(f) for f in fs]
    for k in range(r):
        if weights[k] == 0.0:
            continue
        scale = weights[k] ** (1.0 / d)
        sign = 1.0
        for j in range(d):
            col = fs[j][:, k] / norms[j, k]
            if j < d - 1:
                s = col.sum()
                if s < 0 or (s == 0 and col[np.flatnonzero(col)[0]] < 0):
                    col = -col
                    sign = -sign
            else:
                col = sign * col
            out[j][:, k] = scale * col
    order = np.argsort(-weights, kind="stable")
    return [f[:, order] for f in out]


def relative_error(x: np.ndarray, factors: Sequence[np.ndarray]) -> float:
    """``||x - [factors]||_F / ||x||_F`` with the reconstruction done densely."""
    approx = reduce(khatri_rao, factors).sum(axis=1).reshape(x.shape)
    nx = np.linalg.norm(x)
    return float(np.linalg.norm(x - approx) / nx) if nx > 0 else 0.0


def cp_als(
    t: DenseTensor,
    rank: int = 3,
    max_sweeps: int = 100,
    tol: float = 1e-6,
    seed: int = 0,
    callback: Callable[[int, float, list[np.ndarray]], None] | None = None,
) -> CpTensor:
    """Rank-``rank`` CP decomposition by alternating least squares.

    Factors start i.i.d. uniform on [0, 1) from ``seed``.  Each sweep solves
    the damped normal equations for every mode in turn; iteration stops after
    ``max_sweeps`` or when the relative residual improves by less than
    ``tol``.  ``callback(sweep, rel_error, factors)`` is invoked after every
    sweep.  The returned factors are passed through :func:`canonicalize`.
    """
    if rank < 1:
        raise ShapeError("rank must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.asarray(t.array, dtype=np.float64)
    dims = t.mode_dims
    d = len(dims)
    if not np.any(x):
        return CpTensor([np.zeros((i, rank)) for i in dims])

    rng = stream(seed, "als-init")
    fs = [rng.random((i, rank)) for i in dims]
    unfolded = [mode_unfold(x, n) for n in range(d)]
    prev = np.inf
    for sweep in range(1, max_sweeps + 1):
        for n in range(d):
            others = [fs[m] for m in reversed(range(d)) if m != n]
            gram = reduce(np.multiply, (f.T @ f for f in others), np.ones((rank, rank)))
            kr = reduce(khatri_rao, others) if others else np.ones((1, rank))
            mttkrp = unfolded[n] @ kr
            damp = 1e-10 * np.trace(gram)
            fs[n] = np.linalg.solve(gram + damp * np.eye(rank), mttkrp.T).T
        err = relative_error(x, fs)
        if callback is not None:
            callback(sweep, err, [f.copy() for f in fs])
        if prev - err < tol:
            break
        prev = err
    return CpTensor(canonicalize(fs))
