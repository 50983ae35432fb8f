"""Binary tensor blobs plus dataset and model archives.

``TEC-DENSE-1``
    ``b"TEC-DENSE-1\\n"``, an ASCII line ``"d I_1 ... I_d\\n"``, then the
    values as little-endian binary64 in row-major order.
``TEC-CP-1``
    ``b"TEC-CP-1\\n"``, ``"d r I_1 ... I_d\\n"``, then every factor in mode
    order, each stored column-major, little-endian binary64.
``TEC-DATA-1``
    Directory with ``manifest.json``, ``samples/NNNNNN.cp|.dense`` and an
    optional ``labels.i8`` (signed bytes).
``TEC-MODEL-1``
    Directory with ``manifest.json`` and per member ``member_NNN/`` holding
    ``factors.cp`` (the projected training tensors as concatenated TEC-CP-1
    records), ``beta.f64`` and ``labels.f64``.  Projection matrices are not
    stored; they are regenerated from the seed in the manifest.

Manifests are written with sorted keys and no timestamps, so identical
inputs give byte-identical archives.
"""
from __future__ import annotations

import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Sequence

import numpy as np

from .errors import DataError, ShapeError
from .ensemble import StmModel, TecModel
from .kernels import KernelSpec
from .projection import ProjectionSet
from .tensor import CpTensor, DenseTensor

DENSE_MAGIC = b"TEC-DENSE-1\n"
CP_MAGIC = b"TEC-CP-1\n"
DATA_FORMAT = "TEC-DATA-1"
MODEL_FORMAT = "TEC-MODEL-1"
_F8 = np.dtype("<f8")


def _read_line(f: BinaryIO) -> bytes:
    line = f.readline(4096)
    if not line.endswith(b"\n"):
        raise DataError("truncated header")
    return line


def _read_f8(f: BinaryIO, count: int) -> np.ndarray:
    raw = f.read(count * 8)
    if len(raw) != count * 8:
        raise DataError(f"expected {count} binary64 values, got {len(raw) // 8}")
    return np.frombuffer(raw, dtype=_F8).astype(np.float64)


def _ints(line: bytes, what: str) -> list[int]:
    try:
        vals = [int(tok) for tok in line.decode("ascii").split()]
    except (UnicodeDecodeError, ValueError):
        raise DataError(f"malformed {what} line {line!r}") from None
    if not vals or any(v < 1 for v in vals):
        raise DataError(f"malformed {what} line {line!r}")
    return vals


def write_dense(f: BinaryIO, t: DenseTensor) -> None:
    f.write(DENSE_MAGIC)
    f.write(f"{t.ndim} {' '.join(map(str, t.mode_dims))}\n".encode("ascii"))
    f.write(t.values.astype(_F8).tobytes())


def read_dense(f: BinaryIO) -> DenseTensor:
    if f.read(len(DENSE_MAGIC)) != DENSE_MAGIC:
        raise DataError("not a TEC-DENSE-1 blob")
    vals = _ints(_read_line(f), "dims")
    d, dims = vals[0], vals[1:]
    if len(dims) != d:
        raise DataError(f"dims line declares {d} modes but lists {len(dims)}")
    try:
        return DenseTensor(dims, _read_f8(f, int(np.prod(dims))))
    except ShapeError as exc:
        raise DataError(f"invalid dense blob: {exc}") from None


def write_cp(f: BinaryIO, t: CpTensor) -> None:
    f.write(CP_MAGIC)
    f.write(f"{t.ndim} {t.rank} {' '.join(map(str, t.mode_dims))}\n".encode("ascii"))
    for factor in t.factors:
        f.write(factor.ravel(order="F").astype(_F8).tobytes())


def read_cp(f: BinaryIO) -> CpTensor:
    if f.read(len(CP_MAGIC)) != CP_MAGIC:
        raise DataError("not a TEC-CP-1 blob")
    vals = _ints(_read_line(f), "dims")
    if len(vals) < 2:
        raise DataError("CP dims line too short")
    d, r, dims = vals[0], vals[1], vals[2:]
    if len(dims) != d:
        raise DataError(f"dims line declares {d} modes but lists {len(dims)}")
    factors = [_read_f8(f, i * r).reshape((i, r), order="F") for i in dims]
    try:
        return CpTensor(factors)
    except ShapeError as exc:
        raise DataError(f"invalid CP blob: {exc}") from None


def dumps_tensor(t: CpTensor | DenseTensor) -> bytes:
    buf = io.BytesIO()
    (write_cp if isinstance(t, CpTensor) else write_dense)(buf, t)
    return buf.getvalue()


def loads_tensor(blob: bytes) -> CpTensor | DenseTensor:
    f = io.BytesIO(blob)
    t = read_cp(f) if blob.startswith(CP_MAGIC) else read_dense(f)
    if f.read(1):
        raise DataError("trailing bytes after tensor blob")
    return t


def _dump_json(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2) + "\n").encode("utf-8")


def _load_manifest(path: Path, expected: str) -> dict:
    try:
        manifest = json.loads((path / "manifest.json").read_text("utf-8"))
    except FileNotFoundError:
        raise DataError(f"{path} has no manifest.json") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"corrupt manifest in {path}: {exc}") from None
    if manifest.get("format") != expected:
        raise DataError(f"{path} is not a {expected} archive (format={manifest.get('format')!r})")
    return manifest


@dataclass
class Dataset:
    samples: list
    labels: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def kind(self) -> str:
        return "cp" if isinstance(self.samples[0], CpTensor) else "dense"


def write_dataset(path: str | os.PathLike, samples: Sequence, labels=None, meta: dict | None = None) -> Path:
    path = Path(path)
    if not samples:
        raise DataError("refusing to write an empty dataset")
    kind = "cp" if isinstance(samples[0], CpTensor) else "dense"
    if any(isinstance(s, CpTensor) != (kind == "cp") for s in samples):
        raise DataError("dataset mixes CP and dense samples")
    dims = samples[0].mode_dims
    (path / "samples").mkdir(parents=True, exist_ok=True)
    ext = ".cp" if kind == "cp" else ".dense"
    for i, s in enumerate(samples):
        if s.mode_dims != dims:
            raise DataError(f"sample {i} has dims {s.mode_dims}, expected {dims}")
        (path / "samples" / f"{i:06d}{ext}").write_bytes(dumps_tensor(s))
    manifest = {
        "format": DATA_FORMAT,
        "n": len(samples),
        "kind": kind,
        "mode_dims": list(dims),
        "rank": max(s.rank for s in samples) if kind == "cp" else None,
        "has_labels": labels is not None,
    }
    if labels is not None:
        y = np.asarray(labels)
        if y.size != len(samples) or not np.all(np.abs(y) == 1):
            raise DataError("labels must be one -1/+1 value per sample")
        (path / "labels.i8").write_bytes(y.astype(np.int8).tobytes())
        manifest["counts"] = {"-1": int(np.sum(y == -1)), "+1": int(np.sum(y == 1))}
    manifest.update(meta or {})
    (path / "manifest.json").write_bytes(_dump_json(manifest))
    return path


def read_dataset(path: str | os.PathLike) -> Dataset:
    path = Path(path)
    manifest = _load_manifest(path, DATA_FORMAT)
    n = manifest.get("n", 0)
    if n < 1:
        raise DataError(f"{path} holds no samples")
    ext = ".cp" if manifest["kind"] == "cp" else ".dense"
    samples = []
    for i in range(n):
        try:
            samples.append(loads_tensor((path / "samples" / f"{i:06d}{ext}").read_bytes()))
        except FileNotFoundError:
            raise DataError(f"{path} is missing sample {i}") from None
    labels = None
    lp = path / "labels.i8"
    if lp.exists():
        labels = np.frombuffer(lp.read_bytes(), dtype=np.int8).copy()
        if labels.size != n or not np.all(np.abs(labels) == 1):
            raise DataError(f"{lp} does not hold {n} labels in {{-1, +1}}")
    return Dataset(samples, labels, manifest)


def _member_dir(path: Path, m: int) -> Path:
    return path / f"member_{m:03d}"


def write_model(path: str | os.PathLike, model: TecModel, extra: dict | None = None) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    members = []
    for m, member in enumerate(model.members):
        mdir = _member_dir(path, m)
        mdir.mkdir(exist_ok=True)
        with open(mdir / "factors.cp", "wb") as f:
            for t in member.training_factors:
                write_cp(f, t)
        (mdir / "beta.f64").write_bytes(np.asarray(member.beta).astype(_F8).tobytes())
        (mdir / "labels.f64").write_bytes(np.asarray(member.labels).astype(_F8).tobytes())
        members.append({
            "projection": member.projection.descriptor(),
            "bandwidth": list(member.kernel_spec.bandwidths(len(member.mode_dims))),
            "n_train": len(member.beta),
            "iterations": member.iterations,
            "converged": member.converged,
            "objective": member.objective,
        })
    first = model.members[0]
    manifest = {
        "format": MODEL_FORMAT,
        "format_version": 1,
        "b": model.b,
        "gamma": model.gamma,
        "lambda": first.lam,
        "kernel": {"family": first.kernel_spec.family},
        "mode_dims": list(first.mode_dims),
        "target_dims": list(first.projection.target_dims),
        "master_seed": model.master_seed,
        "members": members,
    }
    manifest.update(extra or {})
    (path / "manifest.json").write_bytes(_dump_json(manifest))
    return path


def read_model(path: str | os.PathLike) -> tuple[TecModel, dict]:
    path = Path(path)
    manifest = _load_manifest(path, MODEL_FORMAT)
    members = []
    for m, info in enumerate(manifest["members"]):
        mdir = _member_dir(path, m)
        n = info["n_train"]
        try:
            with open(mdir / "factors.cp", "rb") as f:
                factors = [read_cp(f) for _ in range(n)]
                if f.read(1):
                    raise DataError(f"{mdir / 'factors.cp'} has trailing bytes")
            beta = _read_f8(io.BytesIO((mdir / "beta.f64").read_bytes()), n)
            labels = _read_f8(io.BytesIO((mdir / "labels.f64").read_bytes()), n)
        except FileNotFoundError as exc:
            raise DataError(f"model member {m} incomplete: {exc.filename}") from None
        spec = KernelSpec(manifest["kernel"]["family"], tuple(info["bandwidth"]))
        proj = ProjectionSet.from_descriptor(info["projection"])
        members.append(StmModel(beta, labels, factors, spec, proj, manifest["lambda"],
                                info["iterations"], info["converged"], info["objective"]))
    model = TecModel(members, manifest["gamma"], manifest["master_seed"])
    return model, manifest
