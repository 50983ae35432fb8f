"""Seeded generators for the simulation models F1-F5, M1 and T1.

F-models are emitted directly as CP factors; M1 and T1 are dense and must
go through CP-ALS before classification.  Class 1 gets label -1, class 2
label +1, and all class-1 samples precede class-2 samples.

Gamma(a, b) is read as shape ``a``, rate ``b`` (mean ``a / b``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._rng import stream
from .tensor import CpTensor, DenseTensor

MODELS = ("F1", "F2", "F3", "F4", "F5", "M1", "T1")


@dataclass(frozen=True)
class CovarianceSpec:
    kind: str
    dim: int
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in ("identity", "ar", "minij"):
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.kind == "ar" and not -1 < self.param < 1:
            raise ValueError(f"AR coefficient must lie in (-1, 1), got {self.param}")


@dataclass(frozen=True)
class SimModelSpec:
    model: str
    samples_per_class: int
    seed: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; choose from {', '.join(MODELS)}")
        if self.samples_per_class < 1:
            raise ValueError("samples_per_class must be >= 1")


def build_covariance(spec: CovarianceSpec) -> np.ndarray:
    idx = np.arange(spec.dim)
    if spec.kind == "identity":
        return np.eye(spec.dim)
    if spec.kind == "ar":
        return spec.param ** np.abs(idx[:, None] - idx[None, :]).astype(np.float64)
    return np.minimum.outer(idx + 1, idx + 1).astype(np.float64)


def _gaussian(rng: np.random.Generator, mean, chol: np.ndarray, n: int) -> np.ndarray:
    z = rng.standard_normal((n, chol.shape[0]))
    return mean + z @ chol.T


def mvn_sample(mean, cov, n: int, seed: int) -> np.ndarray:
    """``n`` draws from N(mean, cov) as rows; ``L z + mean`` with ``cov = L L'``."""
    cov = np.asarray(cov, dtype=np.float64)
    mean = np.broadcast_to(np.asarray(mean, dtype=np.float64), (cov.shape[0],))
    chol = np.linalg.cholesky(cov)  # raises LinAlgError when not PD
    return _gaussian(stream(seed, "mvn"), mean, chol, n)


def model_info(model: str) -> dict:
    """Shape, storage kind and CP rank of a simulation model."""
    if model in ("F1", "F4"):
        return {"mode_dims": (30, 30, 30), "kind": "cp", "rank": 1}
    if model in ("F2", "F5"):
        return {"mode_dims": (50, 50, 50, 50), "kind": "cp", "rank": 1}
    if model == "F3":
        return {"mode_dims": (50, 50, 50, 50), "kind": "cp", "rank": 3}
    if model in ("M1", "T1"):
        return {"mode_dims": (30, 30, 30), "kind": "dense", "rank": None}
    raise ValueError(f"unknown model {model!r}")


def _f2_chols(dim: int) -> list[np.ndarray]:
    covs = [
        CovarianceSpec("identity", dim),
        CovarianceSpec("ar", dim, 0.7),
        CovarianceSpec("minij", dim),
        CovarianceSpec("ar", dim, 0.7),
    ]
    return [np.linalg.cholesky(build_covariance(c)) for c in covs]


def _gaussian_cp(rng, chols, mean, rank):
    return CpTensor([_gaussian(rng, mean, L, rank).T for L in chols])


def _gamma(rng, shape, rate, size):
    return rng.gamma(shape, 1.0 / rate, size)


def _sample(model: str, cls: int, rng: np.random.Generator, cache: dict):
    """One sample of class ``cls`` (0 or 1)."""
    if model == "F1":
        eye = cache.setdefault("eye30", np.eye(30))
        return _gaussian_cp(rng, [eye] * 3, 0.5 * cls, 1)
    if model in ("F2", "F3"):
        chols = cache.setdefault("f2", _f2_chols(50))
        return _gaussian_cp(rng, chols, float(cls), 1 if model == "F2" else 3)
    if model == "F4":
        x1 = _gamma(rng, 6.0 if cls else 4.0, 2.0, 30)
        x2 = rng.standard_normal(30)
        x3 = rng.uniform(0.0, 1.0, 30)
        return CpTensor([x1, x2, x3])
    if model == "F5":
        x1 = _gamma(rng, 5.0 if cls else 4.0, 2.0, 50)
        x2 = rng.standard_normal(50)
        x3 = _gamma(rng, 2.0, 1.0, 50)
        lo = 4.5 if cls else 3.5
        x4 = rng.uniform(lo, lo + 1.0, 50)
        return CpTensor([x1, x2, x3, x4])
    if model == "M1":
        return DenseTensor((30, 30, 30), rng.standard_normal(27000) + 0.5 * cls)
    if model == "T1":
        sigma3 = cache.setdefault("ar30", build_covariance(CovarianceSpec("ar", 30, 0.7)))
        z = rng.standard_normal((30, 30, 30)) + 0.5 * cls
        # Z x_1 I x_2 I x_3 Sigma3
        return DenseTensor.from_array(np.einsum("ijk,lk->ijl", z, sigma3))
    raise ValueError(f"unknown model {model!r}")


def generate(spec: SimModelSpec) -> tuple[list, np.ndarray]:
    """Balanced sample list and labels (int8, -1 then +1)."""
    rng = stream(spec.seed, "datagen", spec.model)
    cache: dict = {}
    samples = []
    for cls in (0, 1):
        for _ in range(spec.samples_per_class):
            samples.append(_sample(spec.model, cls, rng, cache))
    labels = np.repeat(np.array([-1, 1], dtype=np.int8), spec.samples_per_class)
    return samples, labels
