import numpy as np
import pytest

from mhsic.dgp import (
    NOISE_FAMILIES,
    LinearGaussianDgpConfig,
    MixtureDgpConfig,
    RandomMixtureMap,
    generate,
    linear_gaussian_dgp,
    random_mixture_dgp,
    unit_noise,
)


def test_mixture_shapes_and_support():
    x, y = random_mixture_dgp(MixtureDgpConfig(d_ambient=3, n=100, a=0.5, seed=1))
    assert x.shape == y.shape == (100, 3)
    assert x.min() >= -1 and x.max() <= 1


def test_mixture_null_is_pure_noise():
    x, y = random_mixture_dgp(MixtureDgpConfig(d_ambient=2, n=4000, seed=2))
    assert np.std(y) == pytest.approx(0.25, rel=0.05)
    assert abs(np.corrcoef(x[:, 0], y[:, 0])[0, 1]) < 0.05


def test_mixture_shares_x_across_strengths():
    a0 = random_mixture_dgp(MixtureDgpConfig(n=50, a=0.0, seed=3))
    a1 = random_mixture_dgp(MixtureDgpConfig(n=50, a=1.0, seed=3))
    assert np.array_equal(a0[0], a1[0])
    assert not np.array_equal(a0[1], a1[1])


def test_determinism():
    cfg = LinearGaussianDgpConfig(d=3, p=2, n=20, a=0.4, seed=5)
    for u, v in zip(generate(cfg), generate(cfg)):
        assert np.array_equal(u, v)


def test_linear_gaussian_shapes_and_null():
    xs = linear_gaussian_dgp(LinearGaussianDgpConfig(d=4, p=5, n=3000, seed=1))
    assert len(xs) == 4 and all(x.shape == (3000, 5) for x in xs)
    c = np.corrcoef(np.hstack(xs).T)
    assert np.abs(c - np.eye(20)).max() < 0.08


def test_linear_gaussian_dependence():
    xs = linear_gaussian_dgp(LinearGaussianDgpConfig(d=2, p=1, n=5000, a=1.0, seed=2))
    assert abs(np.corrcoef(xs[0][:, 0], xs[1][:, 0])[0, 1]) > 0.1


@pytest.mark.parametrize("family", NOISE_FAMILIES)
def test_unit_noise_moments(family):
    e = unit_noise(family, 200_000, np.random.default_rng(0))
    assert abs(e.mean()) < 0.01 and e.var() == pytest.approx(1.0, rel=0.02)


def test_unknown_noise():
    with pytest.raises(ValueError):
        unit_noise("cauchy", 3, np.random.default_rng(0))


def test_mixture_map():
    rng = np.random.default_rng(0)
    f = RandomMixtureMap.draw(3, rng)
    assert f.w.sum() == pytest.approx(1.0) and np.all(f.w >= 0)
    z = rng.normal(size=(4, 3))
    lin = z @ f.A.T
    np.testing.assert_allclose(f(z), f.w[0] * lin + f.w[1] * lin**3 + f.w[2] * np.tanh(lin))


def test_config_validation():
    with pytest.raises(ValueError):
        MixtureDgpConfig(d_ambient=0)
    with pytest.raises(ValueError):
        MixtureDgpConfig(a=-1.0)
    with pytest.raises(ValueError):
        LinearGaussianDgpConfig(d=1)
    with pytest.raises(TypeError):
        generate(object())
