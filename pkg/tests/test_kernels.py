import math

import numpy as np
import pytest

from conftest import random_cp
from tec import kernels
from tec.errors import ShapeError
from tec.kernels import (BACKENDS, GramMatrix, KernelSpec, cross_kernel, gram_matrix, median_bandwidth,
                         mode_kernel_eval, tensor_kernel)
from tec.tensor import CpTensor


def loop_kernel(x, y, sigmas):
    total = 0.0
    for k in range(x.rank):
        for l in range(y.rank):
            p = 1.0
            for j in range(x.ndim):
                diff = x.factors[j][:, k] - y.factors[j][:, l]
                p *= math.exp(-sum(v * v for v in diff) / (2 * sigmas[j] ** 2))
            total += p
    return total


def test_mode_kernel_examples(rng):
    a = rng.normal(size=5)
    assert mode_kernel_eval(a, a) == 1.0
    s = 0.7
    assert mode_kernel_eval([0.0], [s * math.sqrt(2)], bandwidth=s) == pytest.approx(math.exp(-1), rel=1e-15)
    b = rng.normal(size=5)
    ref = math.exp(-sum((u - v) ** 2 for u, v in zip(a, b)) / (2 * 1.3 ** 2))
    assert abs(mode_kernel_eval(a, b, bandwidth=1.3) - ref) <= 1e-14


def test_mode_kernel_errors():
    with pytest.raises(ShapeError):
        mode_kernel_eval([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        mode_kernel_eval([1.0], [1.0], bandwidth=0.0)
    with pytest.raises(ValueError):
        mode_kernel_eval([1.0], [1.0], family="laplace")


def test_kernel_spec_validation():
    assert KernelSpec(bandwidth=2).bandwidths(3).tolist() == [2.0, 2.0, 2.0]
    with pytest.raises(ValueError):
        KernelSpec(bandwidth=(1.0, -1.0))
    with pytest.raises(ValueError):
        KernelSpec(bandwidth=float("inf"))
    with pytest.raises(ShapeError):
        KernelSpec(bandwidth=(1.0, 2.0)).bandwidths(3)


def test_tensor_kernel_trivial(make_cp):
    x = make_cp(rank=1)
    assert tensor_kernel(x, x, KernelSpec()) == 1.0
    f = [np.repeat(g, 2, axis=1) for g in x.factors]
    x2 = CpTensor(f)
    assert tensor_kernel(x2, x2, KernelSpec()) == 4.0


@pytest.mark.parametrize("backend", sorted(BACKENDS))
def test_tensor_kernel_double_loop_oracle(make_cp, backend):
    spec = KernelSpec(bandwidth=(1.5, 2.0, 2.5))
    for _ in range(5):
        x, y = make_cp((4, 5, 3), 2), make_cp((4, 5, 3), 3)
        ref = loop_kernel(x, y, spec.bandwidths(3))
        assert abs(tensor_kernel(x, y, spec, backend) - ref) <= 1e-12 * max(1.0, ref)


def test_tensor_kernel_symmetric_exactly(make_cp):
    spec = KernelSpec(bandwidth=2.0)
    for _ in range(10):
        x, y = make_cp(rank=3), make_cp(rank=2)
        assert tensor_kernel(x, y, spec) == tensor_kernel(y, x, spec)


def test_tensor_kernel_mode_mismatch(make_cp):
    with pytest.raises(ShapeError):
        tensor_kernel(make_cp((3, 3, 3)), make_cp((3, 3, 4)), KernelSpec())


def test_rank_one_concatenation_identity(make_cp):
    s = 1.7
    for _ in range(10):
        x, y = make_cp(rank=1), make_cp(rank=1)
        cx = np.concatenate([f[:, 0] for f in x.factors])
        cy = np.concatenate([f[:, 0] for f in y.factors])
        assert abs(tensor_kernel(x, y, KernelSpec(bandwidth=s)) - mode_kernel_eval(cx, cy, bandwidth=s)) <= 1e-12


def test_bounded(make_cp):
    spec = KernelSpec(bandwidth=3.0)
    for _ in range(10):
        x, y = make_cp(rank=2), make_cp(rank=3)
        v = tensor_kernel(x, y, spec)
        assert 0 < v <= 6


def test_gram_trivial(make_cp):
    x = make_cp(rank=1)
    assert gram_matrix([x], KernelSpec()).values.tolist() == [[1.0]]
    assert gram_matrix([x, x], KernelSpec()).values.tolist() == [[1.0, 1.0], [1.0, 1.0]]


@pytest.mark.parametrize("backend", sorted(BACKENDS))
def test_gram_matches_pairwise_calls(make_cp, backend):
    data = [make_cp(rank=2) for _ in range(10)]
    spec = KernelSpec(bandwidth=2.0)
    g = gram_matrix(data, spec, backend).values
    ref = np.array([[tensor_kernel(a, b, spec, backend) for b in data] for a in data])
    assert np.array_equal(g, ref)


def test_gram_symmetric_and_psd(rng):
    for _ in range(10):
        rank = int(rng.integers(1, 4))
        data = [random_cp(rng, (6, 5, 4), rank) for _ in range(25)]
        g = gram_matrix(data, KernelSpec(bandwidth=median_bandwidth(data)))
        assert np.array_equal(g.values, g.values.T)
        assert g.min_eigenvalue() >= -1e-8 * np.trace(g.values)


def test_gram_mixed_ranks(make_cp):
    data = [make_cp(rank=1), make_cp(rank=3), make_cp(rank=2)]
    spec = KernelSpec(bandwidth=2.0)
    g = gram_matrix(data, spec).values
    assert g[1, 0] == pytest.approx(loop_kernel(data[1], data[0], [2.0] * 3), rel=1e-12)


def test_gram_heterogeneous_shapes(make_cp):
    with pytest.raises(ShapeError):
        gram_matrix([make_cp((3, 3, 3)), make_cp((3, 3, 2))], KernelSpec())


def test_gram_matrix_type_checks():
    with pytest.raises(ValueError):
        GramMatrix(np.array([[1.0, 2.0], [2.0 + 1e-9, 1.0]]))
    with pytest.raises(ShapeError):
        GramMatrix(np.ones((2, 3)))


def test_backends_agree(make_cp):
    if "compiled" not in BACKENDS:
        pytest.skip("compiled extension not built")
    a = [make_cp(rank=3) for _ in range(8)]
    b = [make_cp(rank=2) for _ in range(5)]
    spec = KernelSpec(bandwidth=(1.0, 2.0, 3.0))
    kc = cross_kernel(a, b, spec, "compiled")
    kp = cross_kernel(a, b, spec, "python")
    assert np.allclose(kc, kp, rtol=1e-13, atol=0)
    assert np.allclose(gram_matrix(a, spec, "compiled").values, gram_matrix(a, spec, "python").values,
                       rtol=1e-13, atol=0)


def test_active_backend_reported():
    assert kernels.BACKEND in BACKENDS


def test_unknown_backend(make_cp):
    with pytest.raises(ValueError):
        gram_matrix([make_cp()], KernelSpec(), backend="fortran")


def test_median_bandwidth_single_pair():
    x = CpTensor([np.array([0.0, 0.0]), np.array([1.0])])
    y = CpTensor([np.array([3.0, 4.0]), np.array([1.0])])
    # mode 0 distance is 5; mode 1 collapses to zero and falls back to 1
    assert median_bandwidth([x, y]) == (5.0, 1.0)
