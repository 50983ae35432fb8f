"""Per-mode, per-component Gaussian random projection of CP tensors.

Component ``k`` of mode ``j`` is mapped by its own matrix ``A[j][k]`` of
shape ``(P_j, I_j)``.  Matrices are never stored: a :class:`ProjectionSet`
is regenerated bit-for-bit from ``(seed, scaling, mode_dims, target_dims,
rank)``, each matrix drawn from its own sub-stream so that a set of higher
rank extends a lower-rank one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._rng import stream
from .errors import ShapeError
from .tensor import CpTensor

SCALINGS = ("inv_sqrt_p", "unit_variance", "identity")


@dataclass(frozen=True, eq=False)
class ProjectionSet:
    mode_dims: tuple[int, ...]
    target_dims: tuple[int, ...]
    rank: int
    seed: int
    scaling: str = "inv_sqrt_p"
    matrices: tuple[tuple[np.ndarray, ...], ...] = field(default=(), repr=False)

    def descriptor(self) -> dict:
        return {
            "seed": int(self.seed),
            "scaling": self.scaling,
            "mode_dims": list(self.mode_dims),
            "target_dims": list(self.target_dims),
            "rank": int(self.rank),
        }

    @classmethod
    def from_descriptor(cls, desc: dict) -> ProjectionSet:
        if desc["scaling"] == "identity":
            return identity_projection(desc["mode_dims"], desc["rank"])
        return sample_projection_set(desc["mode_dims"], desc["target_dims"], desc["rank"],
                                     desc["seed"], desc["scaling"])


def _check_dims(mode_dims, target_dims):
    mode_dims = tuple(int(i) for i in mode_dims)
    target_dims = tuple(int(p) for p in target_dims)
    if len(mode_dims) != len(target_dims):
        raise ShapeError(f"{len(target_dims)} target dims for {len(mode_dims)} modes")
    for j, (i, p) in enumerate(zip(mode_dims, target_dims)):
        if not 1 <= p <= i:
            raise ShapeError(f"target dim {p} for mode {j} must lie in [1, {i}]")
    return mode_dims, target_dims


def sample_projection_set(mode_dims: Sequence[int], target_dims: Sequence[int], rank: int,
                          seed: int, scaling: str = "inv_sqrt_p") -> ProjectionSet:
    """Draw ``d * rank`` Gaussian matrices.

    ``scaling="inv_sqrt_p"`` gives entries with variance ``1 / P_j`` (so
    ``E||A x||^2 = ||x||^2``); ``"unit_variance"`` gives standard normals.
    """
    mode_dims, target_dims = _check_dims(mode_dims, target_dims)
    if rank < 1:
        raise ShapeError("rank must be >= 1")
    if scaling not in ("inv_sqrt_p", "unit_variance"):
        raise ValueError(f"unknown scaling {scaling!r}")
    mats = []
    for j, (i, p) in enumerate(zip(mode_dims, target_dims)):
        scale = 1.0 / math.sqrt(p) if scaling == "inv_sqrt_p" else 1.0
        row = []
        for k in range(rank):
            a = stream(seed, "projection", j, k).standard_normal((p, i))
            if scale != 1.0:
                a *= scale
            a.flags.writeable = False
            row.append(a)
        mats.append(tuple(row))
    return ProjectionSet(mode_dims, target_dims, int(rank), int(seed), scaling, tuple(mats))


def identity_projection(mode_dims: Sequence[int], rank: int) -> ProjectionSet:
    """Projection set whose matrices are identities (no compression)."""
    mode_dims = tuple(int(i) for i in mode_dims)
    mats = []
    for i in mode_dims:
        eye = np.eye(i)
        eye.flags.writeable = False
        mats.append((eye,) * rank)
    return ProjectionSet(mode_dims, mode_dims, int(rank), 0, "identity", tuple(mats))


def project_cp(t: CpTensor, p: ProjectionSet) -> CpTensor:
    """Project every component: column ``k`` of factor ``j`` becomes ``A[j][k] @ x_k^(j)``."""
    if t.mode_dims != p.mode_dims:
        raise ShapeError(f"tensor dims {t.mode_dims} do not match projection dims {p.mode_dims}")
    if t.rank > p.rank:
        raise ShapeError(f"projection covers rank {p.rank}, tensor has rank {t.rank}")
    out = []
    for j, f in enumerate(t.factors):
        cols = [p.matrices[j][k] @ f[:, k] for k in range(t.rank)]
        out.append(np.stack(cols, axis=1))
    return CpTensor(out)


def project_many(data: Sequence[CpTensor], p: ProjectionSet) -> list[CpTensor]:
    """:func:`project_cp` over a list, batching the matrix products per component."""
    if not data:
        return []
    ranks = {t.rank for t in data}
    if len(ranks) > 1:
        return [project_cp(t, p) for t in data]
    r = ranks.pop()
    if data[0].mode_dims != p.mode_dims:
        raise ShapeError(f"tensor dims {data[0].mode_dims} do not match projection dims {p.mode_dims}")
    if r > p.rank:
        raise ShapeError(f"projection covers rank {p.rank}, tensors have rank {r}")
    per_mode = []
    for j in range(len(p.mode_dims)):
        stacked = np.stack([t.factors[j] for t in data])  # (n, I_j, r)
        proj = np.stack([stacked[:, :, k] @ p.matrices[j][k].T for k in range(r)], axis=2)
        per_mode.append(proj)
    return [CpTensor([m[i] for m in per_mode]) for i in range(len(data))]


def default_target_dims(mode_dims: Sequence[int], fraction: float = 0.7) -> tuple[int, ...]:
    """``P_j = max(1, floor(fraction * I_j))``."""
    if not 0 < fraction <= 1:
        raise ValueError(f"projection fraction must lie in (0, 1], got {fraction}")
    return tuple(max(1, math.floor(fraction * int(i) + 1e-9)) for i in mode_dims)


def jl_target_dim(n: int, eps: float, delta1: float, rank: int, d: int) -> int:
    """Theory-guided projected dimension ``ceil(3 r^(2/d) eps^-2 log(n/delta1)^(1/d)) + 1``."""
    if n < 1 or rank < 1 or d < 1:
        raise ValueError("n, rank and d must be positive")
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    if not 0 < delta1 < 0.5:
        raise ValueError(f"delta1 must lie in (0, 1/2), got {delta1}")
    log_term = math.log(n / delta1)
    return math.ceil(3.0 * rank ** (2.0 / d) * eps ** -2 * log_term ** (1.0 / d)) + 1
