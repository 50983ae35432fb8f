"""Per-mode Gaussian kernels and the cross-norm tensor kernel.

For CP tensors ``X = sum_k x_k^(1) o ... o x_k^(d)`` and ``Y`` likewise,

    K(X, Y) = sum_{k, l} prod_j exp(-||x_k^(j) - y_l^(j)||^2 / (2 sigma_j^2))

The heavy loops live in a compiled extension (``tec._kernels_ext``) when it
has been built; otherwise a numpy/scipy implementation is used.  Set
``TEC_BACKEND=python`` to force the fallback.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import pdist

from . import _kernels_py
from .errors import ShapeError
from .tensor import CpTensor

try:
    if os.environ.get("TEC_BACKEND", "").lower() == "python":
        raise ImportError("compiled backend disabled by TEC_BACKEND")
    from . import _kernels_ext as _backend

    BACKEND = "compiled"
except ImportError:
    _backend = _kernels_py
    BACKEND = "python"

BACKENDS = {"python": _kernels_py}
if BACKEND == "compiled":
    BACKENDS["compiled"] = _backend

FAMILIES = ("gaussian_rbf",)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and per-mode bandwidths ``sigma_j``.

    ``bandwidth`` may be a scalar (broadcast to every mode) or a sequence
    with one entry per mode.
    """

    family: str = "gaussian_rbf"
    bandwidth: float | tuple[float, ...] = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        bw = np.atleast_1d(np.asarray(self.bandwidth, dtype=np.float64))
        if bw.ndim != 1 or bw.size == 0 or not np.all(np.isfinite(bw)) or np.any(bw <= 0):
            raise ValueError(f"bandwidths must be positive and finite, got {self.bandwidth!r}")
        value = float(bw[0]) if np.ndim(self.bandwidth) == 0 else tuple(float(b) for b in bw)
        object.__setattr__(self, "bandwidth", value)

    def bandwidths(self, d: int) -> np.ndarray:
        if isinstance(self.bandwidth, float):
            return np.full(d, self.bandwidth)
        if len(self.bandwidth) != d:
            raise ShapeError(f"kernel has {len(self.bandwidth)} bandwidths for a {d}-mode tensor")
        return np.array(self.bandwidth)

    def inv_two_sigma_sq(self, d: int) -> np.ndarray:
        bw = self.bandwidths(d)
        return 1.0 / (2.0 * bw * bw)


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Symmetric ``n x n`` matrix of tensor-kernel values."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ShapeError(f"Gram matrix must be square, got {v.shape}")
        if not np.array_equal(v, v.T):
            raise ValueError("Gram matrix is not symmetric")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.values)[0])


def mode_kernel_eval(a, b, family: str = "gaussian_rbf", bandwidth: float = 1.0) -> float:
    """Single per-mode kernel value ``exp(-||a - b||^2 / (2 sigma^2))``."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ShapeError(f"vector lengths differ: {a.size} vs {b.size}")
    if family not in FAMILIES:
        raise ValueError(f"unknown kernel family {family!r}")
    if not bandwidth > 0 or not np.isfinite(bandwidth):
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    diff = a - b
    return float(np.exp(-np.dot(diff, diff) / (2.0 * bandwidth * bandwidth)))


def stack_components(data: Sequence[CpTensor], rank: int | None = None):
    """Pack CP tensors into ``(comps, mask, offsets)`` for the backend loops.

    ``comps[i, k]`` is the concatenation over modes of component ``k`` of
    tensor ``i``; tensors of lower rank are zero-padded and masked out.
    """
    if len(data) == 0:
        raise ShapeError("no tensors to stack")
    dims = data[0].mode_dims
    for i, t in enumerate(data):
        if t.mode_dims != dims:
            raise ShapeError(f"tensor {i} has mode dims {t.mode_dims}, expected {dims}")
    r = max(t.rank for t in data) if rank is None else rank
    offsets = np.zeros(len(dims) + 1, dtype=np.intp)
    offsets[1:] = np.cumsum(dims)
    comps = np.zeros((len(data), r, offsets[-1]))
    mask = np.zeros((len(data), r))
    for i, t in enumerate(data):
        if t.rank > r:
            raise ShapeError(f"tensor {i} has rank {t.rank} > {r}")
        for j, f in enumerate(t.factors):
            comps[i, : t.rank, offsets[j]:offsets[j + 1]] = f.T
        mask[i, : t.rank] = 1.0
    return comps, mask, offsets


def _backend_for(name: str | None):
    if name is None:
        return _backend
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available (have {sorted(BACKENDS)})") from None


def cross_kernel(a: Sequence[CpTensor], b: Sequence[CpTensor], spec: KernelSpec,
                 backend: str | None = None) -> np.ndarray:
    """Matrix ``K[i, m] = tensor_kernel(a[i], b[m])``."""
    if a[0].mode_dims != b[0].mode_dims:
        raise ShapeError(f"mode dims differ: {a[0].mode_dims} vs {b[0].mode_dims}")
    r = max(max(t.rank for t in a), max(t.rank for t in b))
    ca, ma, offsets = stack_components(a, r)
    cb, mb, _ = stack_components(b, r)
    inv = spec.inv_two_sigma_sq(len(a[0].mode_dims))
    return _backend_for(backend).cross(ca, ma, cb, mb, offsets, inv)


def tensor_kernel(x: CpTensor, y: CpTensor, spec: KernelSpec, backend: str | None = None) -> float:
    """Cross-norm tensor kernel between two CP tensors (ranks may differ)."""
    if x.mode_dims != y.mode_dims:
        raise ShapeError(f"mode dims differ: {x.mode_dims} vs {y.mode_dims}")
    return float(cross_kernel([x], [y], spec, backend)[0, 0])


def gram_matrix(data: Sequence[CpTensor], spec: KernelSpec, backend: str | None = None) -> GramMatrix:
    """Training Gram matrix; only the lower triangle is evaluated."""
    comps, mask, offsets = stack_components(data)
    inv = spec.inv_two_sigma_sq(len(data[0].mode_dims))
    return GramMatrix(_backend_for(backend).gram(comps, mask, offsets, inv))


def median_bandwidth(data: Sequence[CpTensor], max_components: int = 1000) -> tuple[float, ...]:
    """Per-mode median heuristic.

    ``sigma_j`` is the median Euclidean distance between all pairs of mode-j
    component vectors pooled over ``data``.  At most ``max_components``
    evenly spaced components are used per mode.
    """
    d = data[0].ndim
    sigmas = []
    for j in range(d):
        vecs = np.concatenate([t.factors[j].T for t in data], axis=0)
        if len(vecs) > max_components:
            vecs = vecs[np.linspace(0, len(vecs) - 1, max_components).astype(int)]
        dist = pdist(vecs) if len(vecs) > 1 else np.zeros(1)
        med = float(np.median(dist))
        sigmas.append(med if med > 0 and np.isfinite(med) else 1.0)
    return tuple(sigmas)
