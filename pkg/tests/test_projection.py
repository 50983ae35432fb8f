import itertools
import math

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from conftest import random_cp
from tec.errors import ShapeError
from tec.kernels import KernelSpec, tensor_kernel
from tec.projection import (ProjectionSet, default_target_dims, identity_projection, jl_target_dim,
                            project_cp, project_many, sample_projection_set)
from tec.tensor import CpTensor


def test_same_seed_bit_identical():
    a = sample_projection_set((10, 8), (5, 4), 2, seed=11)
    b = sample_projection_set((10, 8), (5, 4), 2, seed=11)
    for ra, rb in zip(a.matrices, b.matrices):
        for x, y in zip(ra, rb):
            assert x.tobytes() == y.tobytes()
    c = sample_projection_set((10, 8), (5, 4), 2, seed=12)
    assert not np.array_equal(a.matrices[0][0], c.matrices[0][0])


def test_higher_rank_extends_lower_rank():
    lo = sample_projection_set((6,), (3,), 1, seed=4)
    hi = sample_projection_set((6,), (3,), 3, seed=4)
    assert np.array_equal(lo.matrices[0][0], hi.matrices[0][0])


def test_shapes():
    p = sample_projection_set((30, 30, 30), (21, 21, 21), 2, seed=0)
    assert all(m.shape == (21, 30) for row in p.matrices for m in row)
    t = random_cp(np.random.default_rng(0), (30, 30, 30), 2)
    assert project_cp(t, p).mode_dims == (21, 21, 21)


@pytest.mark.parametrize("scaling,var", [("unit_variance", 1.0), ("inv_sqrt_p", 1.0 / 25)])
def test_entry_moments(scaling, var):
    p = sample_projection_set((40,), (25,), 1, seed=3, scaling=scaling)
    x = p.matrices[0][0].ravel()
    n = x.size
    assert abs(x.mean()) <= 4 * math.sqrt(var / n)
    assert abs(x.var() / var - 1) <= 0.10


def test_expected_squared_norm_preserved(rng):
    x = rng.normal(size=20)
    sq = [np.sum((sample_projection_set((20,), (5,), 1, seed=s).matrices[0][0] @ x) ** 2)
          for s in range(2000)]
    assert abs(np.mean(sq) / np.dot(x, x) - 1) <= 0.05


def test_identity_projection_is_noop(make_cp):
    t = make_cp((4, 5, 3), 2)
    out = project_cp(t, identity_projection(t.mode_dims, 2))
    assert all(np.array_equal(a, b) for a, b in zip(out.factors, t.factors))


def test_columns_match_matvec_oracle(make_cp):
    t = make_cp((7, 6, 5), 3)
    p = sample_projection_set(t.mode_dims, (4, 3, 2), 3, seed=9)
    out = project_cp(t, p)
    for j, k in itertools.product(range(3), range(3)):
        a = p.matrices[j][k]
        ref = [sum(a[i, m] * t.factors[j][m, k] for m in range(a.shape[1])) for i in range(a.shape[0])]
        assert np.allclose(out.factors[j][:, k], ref, rtol=0, atol=1e-13)


def test_project_many_matches_single(make_cp):
    data = [make_cp((7, 6, 5), 2) for _ in range(4)]
    p = sample_projection_set((7, 6, 5), (4, 3, 2), 2, seed=1)
    for a, b in zip(project_many(data, p), data):
        ref = project_cp(b, p)
        assert all(np.allclose(u, v, rtol=1e-14, atol=1e-14) for u, v in zip(a.factors, ref.factors))


def test_column_scaling_is_linear(make_cp):
    t = make_cp((6, 5), 2)
    p = sample_projection_set((6, 5), (3, 3), 2, seed=2)
    f = [x.copy() for x in t.factors]
    f[1][:, 1] *= -2.5
    a, b = project_cp(t, p), project_cp(CpTensor(f), p)
    assert np.allclose(b.factors[1][:, 1], -2.5 * a.factors[1][:, 1], rtol=1e-14)
    assert np.array_equal(b.factors[1][:, 0], a.factors[1][:, 0])


def test_projection_errors(make_cp):
    with pytest.raises(ShapeError):
        sample_projection_set((5, 5), (6, 5), 1, seed=0)
    with pytest.raises(ShapeError):
        sample_projection_set((5, 5), (3,), 1, seed=0)
    p = sample_projection_set((5, 5), (3, 3), 1, seed=0)
    with pytest.raises(ShapeError):
        project_cp(make_cp((5, 5), 2), p)
    with pytest.raises(ShapeError):
        project_cp(make_cp((5, 4), 1), p)


def test_default_target_dims():
    assert default_target_dims((30, 30, 30)) == (21, 21, 21)
    assert default_target_dims((50, 1)) == (35, 1)
    assert default_target_dims((10,)) == (7,)


def test_descriptor_round_trip():
    p = sample_projection_set((8, 9), (4, 5), 2, seed=77, scaling="unit_variance")
    q = ProjectionSet.from_descriptor(p.descriptor())
    assert q.descriptor() == p.descriptor()
    for ra, rb in zip(p.matrices, q.matrices):
        assert all(np.array_equal(x, y) for x, y in zip(ra, rb))


def test_jl_examples():
    direct = math.ceil(3 * 1 ** (2 / 3) * 0.5 ** -2 * math.log(140 / 0.1) ** (1 / 3)) + 1
    assert jl_target_dim(140, 0.5, 0.1, 1, 3) == direct == 25
    # n / delta1 = e makes the log term exactly 1
    assert jl_target_dim(1, 1.0, 1 / math.e, 1, 1) == 4


def test_jl_monotone_in_eps():
    dims = [jl_target_dim(100, e, 0.05, 2, 3) for e in (0.9, 0.7, 0.5, 0.3, 0.1)]
    assert dims == sorted(dims) and len(set(dims)) == len(dims)


@pytest.mark.parametrize("args", [(0, 0.5, 0.1, 1, 3), (10, 0.0, 0.1, 1, 3), (10, 1.5, 0.1, 1, 3),
                                  (10, 0.5, 0.5, 1, 3), (10, 0.5, 0.1, 0, 3)])
def test_jl_domain(args):
    with pytest.raises(ValueError):
        jl_target_dim(*args)


def test_jl_distance_concentration():
    rng = np.random.default_rng(2024)
    x = rng.normal(size=(50, 100))
    eps, delta1 = 0.5, 0.05
    p = jl_target_dim(50, eps, delta1, 1, 1)
    orig = pdist(x, "sqeuclidean")
    fractions = []
    for s in range(20):
        a = sample_projection_set((100,), (p,), 1, seed=s).matrices[0][0]
        proj = pdist(x @ a.T, "sqeuclidean")
        fractions.append(np.mean(np.abs(proj / orig - 1) <= eps))
    assert np.mean(fractions) >= 1 - 2 * delta1


def test_kernel_concentration():
    # Rank-1, unit-norm factors: with sigma = 1 the deviation bound is
    # C eps^d, C = 2^d r^2 L^d B^(2d), L = 1 / (2 sigma^2), B = 1.
    rng = np.random.default_rng(99)
    d, dim, n, eps, delta1 = 3, 60, 12, 0.5, 0.05
    bound = 2 ** d * (0.5 ** d) * eps ** d

    def unit():
        v = rng.normal(size=dim)
        return v / np.linalg.norm(v)

    data = [CpTensor([unit() for _ in range(d)]) for _ in range(n)]
    target = min(dim, jl_target_dim(n, eps, delta1, 1, d))
    spec = KernelSpec(bandwidth=1.0)
    exceed = []
    for s in range(10):
        p = sample_projection_set((dim,) * d, (target,) * d, 1, seed=s)
        proj = project_many(data, p)
        for a, b in itertools.combinations(range(n), 2):
            dev = abs(tensor_kernel(proj[a], proj[b], spec) - tensor_kernel(data[a], data[b], spec))
            exceed.append(dev >= bound)
    assert np.mean(exceed) <= 2 * delta1
