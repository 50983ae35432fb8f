import numpy as np
import pytest

from tec.datagen import (MODELS, CovarianceSpec, SimModelSpec, build_covariance, generate, model_info,
                         mvn_sample)
from tec.io import dumps_tensor
from tec.tensor import CpTensor, DenseTensor


def test_covariance_examples():
    assert np.array_equal(build_covariance(CovarianceSpec("identity", 3)), np.eye(3))
    assert build_covariance(CovarianceSpec("ar", 2, 0.7)).tolist() == [[1.0, 0.7], [0.7, 1.0]]
    assert build_covariance(CovarianceSpec("minij", 3)).tolist() == [[1, 1, 1], [1, 2, 2], [1, 2, 3]]


@pytest.mark.parametrize("spec", [CovarianceSpec("ar", 50, 0.7), CovarianceSpec("minij", 50),
                                  CovarianceSpec("ar", 10, -0.9)])
def test_covariances_are_spd(spec):
    c = build_covariance(spec)
    assert np.array_equal(c, c.T)
    assert np.linalg.eigvalsh(c)[0] > 0


def test_covariance_validation():
    with pytest.raises(ValueError):
        CovarianceSpec("ar", 3, 1.0)
    with pytest.raises(ValueError):
        CovarianceSpec("toeplitz", 3)
    with pytest.raises(ValueError):
        CovarianceSpec("identity", 0)


def test_mvn_moments():
    n = 5000
    x = mvn_sample(np.array([1.0, -2.0, 0.5]), np.eye(3), n, seed=1)
    assert np.all(np.abs(x.mean(axis=0) - [1.0, -2.0, 0.5]) <= 4 / np.sqrt(n))
    y = mvn_sample(0.0, build_covariance(CovarianceSpec("ar", 2, 0.7)), n, seed=2)
    assert abs(np.corrcoef(y.T)[0, 1] - 0.7) <= 0.05


def test_mvn_reproducible_and_rejects_non_pd():
    a = mvn_sample(0.0, np.eye(4), 10, seed=3)
    assert a.tobytes() == mvn_sample(0.0, np.eye(4), 10, seed=3).tobytes()
    with pytest.raises(np.linalg.LinAlgError):
        mvn_sample(0.0, np.array([[1.0, 2.0], [2.0, 1.0]]), 5, seed=0)


def test_f1():
    samples, labels = generate(SimModelSpec("F1", 100, seed=0))
    assert len(samples) == 200
    assert all(isinstance(s, CpTensor) and s.rank == 1 and s.mode_dims == (30, 30, 30) for s in samples)
    class2 = np.concatenate([f.ravel() for s in samples[100:] for f in s.factors])
    assert abs(class2.mean() - 0.5) <= 0.02
    class1 = np.concatenate([f.ravel() for s in samples[:100] for f in s.factors])
    assert abs(class1.mean()) <= 0.02 and abs(class1.var() - 1) <= 0.05


@pytest.mark.parametrize("model", MODELS)
def test_balance_and_shapes(model):
    per = 3
    samples, labels = generate(SimModelSpec(model, per, seed=1))
    info = model_info(model)
    assert labels.dtype == np.int8
    assert labels.tolist() == [-1] * per + [1] * per
    for s in samples:
        assert s.mode_dims == info["mode_dims"]
        if info["kind"] == "cp":
            # factor models never hold a dense array
            assert isinstance(s, CpTensor) and s.rank == info["rank"]
        else:
            assert isinstance(s, DenseTensor)


def test_m1_entry_count():
    samples, _ = generate(SimModelSpec("M1", 10, seed=0))
    assert all(s.values.size == 27000 for s in samples)
    means = [s.values.mean() for s in samples]
    assert np.allclose(means[:10], 0.0, atol=0.05) and np.allclose(means[10:], 0.5, atol=0.05)


def test_t1_lag_one_autocorrelation():
    samples, _ = generate(SimModelSpec("T1", 20, seed=4))
    sigma = build_covariance(CovarianceSpec("ar", 30, 0.7))
    cov = sigma @ sigma.T  # covariance of each mode-3 fiber
    sd = np.sqrt(np.diag(cov))
    oracle = np.mean([cov[l, l + 1] / (sd[l] * sd[l + 1]) for l in range(29)])
    fibers = np.concatenate([s.array.reshape(-1, 30) for s in samples[:20]])
    fibers = fibers / sd
    lag1 = np.mean(fibers[:, :-1] * fibers[:, 1:])
    assert abs(lag1 - oracle) <= 0.1


def test_deterministic_per_seed():
    for model in ("F3", "F5", "T1"):
        a, _ = generate(SimModelSpec(model, 2, seed=11))
        b, _ = generate(SimModelSpec(model, 2, seed=11))
        assert [dumps_tensor(s) for s in a] == [dumps_tensor(s) for s in b]
    c, _ = generate(SimModelSpec("F3", 2, seed=12))
    assert dumps_tensor(c[0]) != dumps_tensor(generate(SimModelSpec("F3", 2, seed=11))[0][0])


def test_f2_mode_covariances():
    samples, _ = generate(SimModelSpec("F2", 1000, seed=5))
    mode3 = np.stack([s.factors[2][:, 0] for s in samples[:1000]])
    # minij: variance of coordinate i is i + 1
    assert np.allclose(mode3.var(axis=0)[[0, 9, 49]], [1, 10, 50], rtol=0.15)
    mode2 = np.stack([s.factors[1][:, 0] for s in samples[1000:]])
    assert abs(mode2.mean() - 1.0) <= 0.05
    assert abs(np.corrcoef(mode2[:, 0], mode2[:, 1])[0, 1] - 0.7) <= 0.05


def test_f4_f5_distributions():
    f4, _ = generate(SimModelSpec("F4", 1000, seed=6))
    g1 = np.concatenate([s.factors[0].ravel() for s in f4[:1000]])
    g2 = np.concatenate([s.factors[0].ravel() for s in f4[1000:]])
    assert abs(g1.mean() - 2.0) <= 0.02 and abs(g1.var() - 1.0) <= 0.05   # shape 4, rate 2
    assert abs(g2.mean() - 3.0) <= 0.02 and abs(g2.var() - 1.5) <= 0.05
    u = np.concatenate([s.factors[2].ravel() for s in f4])
    assert u.min() >= 0 and u.max() < 1 and abs(u.mean() - 0.5) <= 0.01
    f5, _ = generate(SimModelSpec("F5", 500, seed=7))
    u1 = np.concatenate([s.factors[3].ravel() for s in f5[:500]])
    u2 = np.concatenate([s.factors[3].ravel() for s in f5[500:]])
    assert 3.5 <= u1.min() and u1.max() < 4.5 and 4.5 <= u2.min() and u2.max() < 5.5


def test_spec_validation():
    with pytest.raises(ValueError):
        SimModelSpec("F9", 10)
    with pytest.raises(ValueError):
        SimModelSpec("F1", 0)
