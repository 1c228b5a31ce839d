import numpy as np
import pytest

import oracles
from mhsic.baselines import PermutationConfig, dhsic_v, hsic_v, hsic_v_elementwise, permutation_test
from mhsic.errors import DimensionMismatch
from mhsic.kernels import Family, KernelSpec, gram


def _grams(rng, n, d, q=2):
    return [gram(KernelSpec.fixed(1.0 + 0.3 * k), rng.normal(size=(n, q))) for k in range(d)]


class TestStatistics:
    def test_constant_ky(self):
        KX = _grams(np.random.default_rng(0), 10, 1)[0]
        assert abs(hsic_v(KX, np.full((10, 10), 0.4))) <= 1e-15

    @pytest.mark.parametrize("seed", range(5))
    def test_trace_and_elementwise_forms_agree(self, seed):
        KX, KY = _grams(np.random.default_rng(seed), 10, 2)
        a, b = hsic_v(KX, KY), hsic_v_elementwise(KX, KY)
        assert a == pytest.approx(b, rel=1e-12)
        assert a == pytest.approx(oracles.hsic_trace(KX.tolist(), KY.tolist()), rel=1e-12)
        assert a >= -1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_dhsic_two_variables_is_hsic(self, seed):
        KX, KY = _grams(np.random.default_rng(seed), 10, 2)
        assert dhsic_v([KX, KY]) == pytest.approx(hsic_v(KX, KY), rel=1e-12)

    @pytest.mark.parametrize("n,d", [(4, 2), (6, 3), (8, 2), (5, 3)])
    def test_dhsic_brute_force(self, n, d):
        Ks = _grams(np.random.default_rng(n * d), n, d)
        assert dhsic_v(Ks) == pytest.approx(oracles.dhsic_brute([K.tolist() for K in Ks]), rel=1e-10)

    def test_dhsic_constant_kernels(self):
        assert abs(dhsic_v([np.ones((6, 6))] * 3)) <= 1e-15

    def test_shape_checks(self):
        with pytest.raises(DimensionMismatch):
            hsic_v(np.eye(3), np.eye(4))
        with pytest.raises(DimensionMismatch):
            dhsic_v([np.eye(3)])
        with pytest.raises(DimensionMismatch):
            dhsic_v([np.eye(3), np.eye(4)])


class TestPermutation:
    def test_config(self):
        with pytest.raises(ValueError):
            PermutationConfig(B=0)
        cfg = PermutationConfig(5, 3)
        assert np.array_equal(cfg.replicate_rng(2).permutation(10), cfg.replicate_rng(2).permutation(10))

    def test_null_matches_recomputed_statistics(self):
        rng = np.random.default_rng(1)
        x, y = rng.normal(size=(30, 1)), rng.normal(size=(30, 2))
        k = KernelSpec.fixed(1.0)
        cfg = PermutationConfig(B=20, rng_seed=7)
        res, null = permutation_test([x, y], "hsic", cfg, ks=k, return_null=True)
        KX, KY = gram(k, x), gram(k, y)
        for b in range(cfg.B):
            perm = cfg.replicate_rng(b).permutation(30)
            assert null[b] == pytest.approx(hsic_v(KX, gram(k, y[perm])), rel=1e-12)
        assert res.statistic == pytest.approx(hsic_v(KX, KY), rel=1e-12)
        assert res.p_value == (1 + np.sum(null >= res.statistic)) / (cfg.B + 1)
        assert res.reject == (res.p_value <= 0.05)
        assert res.method == "hsic-perm"

    def test_dhsic_null_matches_recomputed_statistics(self):
        rng = np.random.default_rng(2)
        xs = [rng.normal(size=(12, 1)) for _ in range(3)]
        k = KernelSpec.fixed(0.8, Family.LAPLACE)
        cfg = PermutationConfig(B=10, rng_seed=1)
        res, null = permutation_test(xs, "dhsic", cfg, ks=k, return_null=True)
        for b in range(cfg.B):
            r = cfg.replicate_rng(b)
            permuted = [xs[0]] + [x[r.permutation(12)] for x in xs[1:]]
            assert null[b] == pytest.approx(dhsic_v([gram(k, x) for x in permuted]), rel=1e-12)
        assert res.method == "dhsic-perm"

    def test_constant_variables_give_p_one(self):
        res = permutation_test([np.ones(20), np.ones(20)], "hsic", PermutationConfig(B=30))
        assert res.p_value == 1.0 and not res.reject

    def test_dependence_is_detected(self):
        x = np.random.default_rng(3).normal(size=(100, 1))
        assert permutation_test([x, x**2], "hsic", PermutationConfig(B=100)).reject

    def test_argument_checks(self):
        z = np.zeros((10, 1))
        with pytest.raises(DimensionMismatch):
            permutation_test([z, z, z], "hsic")
        with pytest.raises(ValueError):
            permutation_test([z, z], "bogus")
        with pytest.raises(DimensionMismatch):
            permutation_test([z, np.zeros((9, 1))])
