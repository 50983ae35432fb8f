"""Experiment plumbing: input preparation, repeated-split evaluation and CV tuning."""
from __future__ import annotations

import dataclasses
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._rng import derive_seed, stream
from .errors import DataError
from .ensemble import member_decisions, tec_predict_many, tec_train, vote
from .kernels import KernelSpec
from .projection import default_target_dims
from .tensor import CpTensor, DenseTensor, canonicalize, cp_als

DEFAULT_B_GRID = tuple(range(2, 21))
DEFAULT_GAMMA_GRID = tuple(round(-1.0 + 0.1 * i, 1) for i in range(21))


@dataclass(frozen=True)
class RunConfig:
    rank: int = 3
    lam: float = 1e-2
    b: int = 5
    gamma: float = 0.0
    proj_frac: float = 0.7
    proj_dims: tuple[int, ...] | None = None
    bandwidth: float | tuple[float, ...] | None = None
    scaling: str = "inv_sqrt_p"
    seed: int = 0
    splits: int = 100
    train_size: int = 140
    test_size: int = 60
    folds: int = 5
    threads: int = 1
    als_sweeps: int = 100
    als_tol: float = 1e-6
    tol: float = 1e-6
    max_iter: int = 50

    def __post_init__(self):
        checks = [
            (self.rank >= 1, "rank must be >= 1"),
            (self.lam > 0, "lambda must be positive"),
            (self.b >= 1, "b must be >= 1"),
            (-1.0 <= self.gamma <= 1.0, "gamma must lie in [-1, 1]"),
            (0.0 < self.proj_frac <= 1.0, "projection fraction must lie in (0, 1]"),
            (self.splits >= 1, "splits must be >= 1"),
            (self.train_size >= 2 and self.test_size >= 1, "train size must be >= 2 and test size >= 1"),
            (self.folds >= 2, "folds must be >= 2"),
            (self.threads >= 1, "threads must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)

    def target_dims(self, mode_dims: Sequence[int]) -> tuple[int, ...]:
        if self.proj_dims is not None:
            return tuple(self.proj_dims)
        return default_target_dims(mode_dims, self.proj_frac)

    def kernel_spec(self) -> KernelSpec | None:
        return None if self.bandwidth is None else KernelSpec(bandwidth=self.bandwidth)

    def echo(self) -> dict:
        d = dataclasses.asdict(self)
        d["proj_dims"] = None if self.proj_dims is None else list(self.proj_dims)
        if isinstance(d["bandwidth"], tuple):
            d["bandwidth"] = list(d["bandwidth"])
        return d


@dataclass
class EvalReport:
    split_errors: list[float]
    seconds: float
    config: dict
    timings: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(np.mean(self.split_errors))

    @property
    def se(self) -> float:
        """Standard deviation of the split error rates (0 for a single split)."""
        if len(self.split_errors) < 2:
            return 0.0
        return float(np.std(self.split_errors, ddof=1))

    def to_dict(self) -> dict:
        return {
            "split_errors": list(self.split_errors),
            "mean_error": self.mean,
            "se": self.se,
            "splits": len(self.split_errors),
            "seconds": self.seconds,
            "timings": dict(self.timings),
            "config": self.config,
        }

    def table(self) -> str:
        rows = [("splits", f"{len(self.split_errors)}"),
                ("mean error (%)", f"{self.mean:.2f}"),
                ("S.E.", f"{self.se:.2f}"),
                ("time (s)", f"{self.seconds:.2f}")]
        rows += [(f"  {k}", f"{v:.2f}") for k, v in sorted(self.timings.items())]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def prepare_samples(samples: Sequence, rank: int = 3, seed: int = 0, max_sweeps: int = 100,
                    tol: float = 1e-6) -> list[CpTensor]:
    """Bring raw samples into canonical CP form.

    Dense tensors are decomposed by CP-ALS at ``rank``; CP tensors keep their
    rank and are canonicalized (balanced scale, fixed signs, sorted
    components) so that two factorizations of the same tensor look alike.
    """
    out = []
    for i, s in enumerate(samples):
        if isinstance(s, DenseTensor):
            out.append(cp_als(s, rank, max_sweeps, tol, derive_seed(seed, "als", i)))
        elif isinstance(s, CpTensor):
            out.append(CpTensor(canonicalize(s.factors)))
        else:
            raise DataError(f"sample {i} is neither a CP nor a dense tensor")
    return out


def _train(data, labels, cfg: RunConfig, b: int, master_seed: int, threads: int = 1):
    return tec_train(data, labels, b=b, gamma=cfg.gamma, lam=cfg.lam,
                     target_dims=cfg.target_dims(data[0].mode_dims), kernel_spec=cfg.kernel_spec(),
                     master_seed=master_seed, scaling=cfg.scaling, threads=threads,
                     tol=cfg.tol, max_iter=cfg.max_iter)


def _add_timings(acc: dict, model) -> None:
    for member in model.members:
        for k, v in member.timings.items():
            acc[k] = acc.get(k, 0.0) + v


def run_benchmark(data: Sequence[CpTensor], labels, cfg: RunConfig) -> EvalReport:
    """Repeat: shuffle, train on ``train_size``, test on the next ``test_size``.

    Split ``s`` draws its permutation from stream ``(seed, "split", s)`` and
    its ensemble seed from ``derive_seed(seed, "tec", s)``; splits run on
    ``cfg.threads`` threads and are reduced in split order.
    """
    y = np.asarray(labels)
    n = len(data)
    if n < cfg.train_size + cfg.test_size:
        raise DataError(f"{n} samples cannot supply {cfg.train_size} train + {cfg.test_size} test")
    start = time.perf_counter()

    def one(s: int):
        perm = stream(cfg.seed, "split", s).permutation(n)
        tr, te = perm[: cfg.train_size], perm[cfg.train_size: cfg.train_size + cfg.test_size]
        model = _train([data[i] for i in tr], y[tr], cfg, cfg.b, derive_seed(cfg.seed, "tec", s))
        t0 = time.perf_counter()
        pred = tec_predict_many(model, [data[i] for i in te])
        timings: dict = {"predict": time.perf_counter() - t0}
        _add_timings(timings, model)
        return 100.0 * float(np.mean(pred != y[te])), timings

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(one, range(cfg.splits)))
    else:
        results = [one(s) for s in range(cfg.splits)]
    timings: dict = {}
    for _, t in results:
        for k, v in t.items():
            timings[k] = timings.get(k, 0.0) + v
    return EvalReport([e for e, _ in results], time.perf_counter() - start, cfg.echo(), timings)


def stratified_folds(labels, k: int, seed: int, attempt: int = 0) -> np.ndarray:
    """Fold index per sample; each class is shuffled and dealt round-robin."""
    y = np.asarray(labels)
    rng = stream(seed, "cv", attempt)
    fold = np.empty(y.size, dtype=np.int64)
    for c in (-1, 1):
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(idx.size)]
        fold[idx] = np.arange(idx.size) % k
    return fold


def _folds_ok(y: np.ndarray, fold: np.ndarray, k: int) -> bool:
    for f in range(k):
        test = fold == f
        if not test.any() or np.unique(y[~test]).size < 2:
            return False
    return True


def tune(data: Sequence[CpTensor], labels, cfg: RunConfig,
         b_grid: Sequence[int] = DEFAULT_B_GRID,
         gamma_grid: Sequence[float] = DEFAULT_GAMMA_GRID) -> tuple[RunConfig, list[dict]]:
    """Two-stage cross-validated choice of ``b`` and ``gamma``.

    Stage 1 fixes ``gamma = 0`` and scans ``b_grid``; stage 2 fixes the best
    ``b`` and scans ``gamma_grid``.  Ties go to the smaller ``b`` and then to
    the ``gamma`` closest to 0 (negative side first).  One ensemble of
    ``max(b_grid)`` members is trained per fold; smaller ensembles are its
    leading members, which is exactly what ``tec_train`` would produce.
    """
    if not b_grid or not gamma_grid:
        raise ValueError("tuning grids must be non-empty")
    y = np.asarray(labels)
    k = cfg.folds
    fold = stratified_folds(y, k, cfg.seed)
    if not _folds_ok(y, fold, k):
        fold = stratified_folds(y, k, cfg.seed, attempt=1)
        if not _folds_ok(y, fold, k):
            raise DataError(f"cannot build {k} folds with both classes in every training part")
    b_max = max(b_grid)

    def fold_decisions(f: int):
        tr, te = np.flatnonzero(fold != f), np.flatnonzero(fold == f)
        model = _train([data[i] for i in tr], y[tr], cfg, b_max, derive_seed(cfg.seed, "cv-tec", f))
        return te, member_decisions(model, [data[i] for i in te])

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            per_fold = list(pool.map(fold_decisions, range(k)))
    else:
        per_fold = [fold_decisions(f) for f in range(k)]

    def cv_error(b: int, gamma: float) -> float:
        wrong = sum(int(np.sum(vote(dec[:b], gamma) != y[te])) for te, dec in per_fold)
        return 100.0 * wrong / y.size

    rows = [{"stage": 1, "b": int(b), "gamma": 0.0, "cv_error": cv_error(b, 0.0)} for b in b_grid]
    best_b = min(rows, key=lambda r: (r["cv_error"], r["b"]))["b"]
    stage2 = [{"stage": 2, "b": best_b, "gamma": float(g), "cv_error": cv_error(best_b, g)} for g in gamma_grid]
    best_gamma = min(stage2, key=lambda r: (r["cv_error"], abs(r["gamma"]), r["gamma"]))["gamma"]
    return dataclasses.replace(cfg, b=best_b, gamma=best_gamma), rows + stage2
