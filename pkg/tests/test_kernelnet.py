"""Two-layer Gaussian kernel: features, kernel values, analytic gradients."""

import math

import numpy as np
import pytest

from cbflearn.environment import Workspace
from cbflearn.kernelnet import (FeatureMap, KernelConfig, build_feature_map,
                                decision_gradient_at, decision_value_batch,
                                featurize, kernel, kernel_between_features,
                                kernel_gradient)


@pytest.fixture(scope="module")
def fmap():
    return build_feature_map(Workspace(-1.6, 1.6, -1.0, 1.0), 0.16, 0.32)


@pytest.fixture(scope="module")
def kcfg():
    return KernelConfig(sigma1=0.32, sigma2=1.0, grid_spacing=0.16)


def fd_gradient(f, x, step=1e-5):
    g = np.zeros(2)
    for k in range(2):
        e = np.zeros(2)
        e[k] = step
        g[k] = (f(x + e) - f(x - e)) / (2 * step)
    return g


class TestFeaturize:
    def test_unit_at_center(self, fmap):
        j = 7
        f = featurize(fmap, fmap.centers[j])
        assert f[j] == pytest.approx(1.0)

    def test_bandwidth_decay(self, fmap):
        j = 0
        x = fmap.centers[j] + np.array([fmap.sigma1, 0.0])
        f = featurize(fmap, x)
        assert f[j] == pytest.approx(math.exp(-1.0), rel=1e-12)

    def test_entries_in_unit_interval(self, fmap, rng):
        pts = rng.uniform(-1.6, 1.6, size=(50, 2))
        f = featurize(fmap, pts)
        assert np.all(f > 0.0)
        assert np.all(f <= 1.0)

    def test_grid_covers_workspace(self, fmap):
        c = fmap.centers
        assert c[:, 0].min() <= -1.6 and c[:, 0].max() >= 1.6 - 1e-9
        assert c[:, 1].min() <= -1.0 and c[:, 1].max() >= 1.0 - 1e-9

    def test_batch_matches_single(self, fmap, rng):
        pts = rng.uniform(-1, 1, size=(5, 2))
        batch = featurize(fmap, pts)
        for i, p in enumerate(pts):
            assert np.allclose(batch[i], featurize(fmap, p))


class TestKernel:
    def test_self_kernel_one(self, fmap, kcfg, rng):
        for _ in range(10):
            x = rng.uniform(-1.5, 1.5, size=2)
            assert kernel(kcfg, fmap, x, x) == pytest.approx(1.0)

    def test_symmetry(self, fmap, kcfg, rng):
        for _ in range(100):
            a = rng.uniform(-1.5, 1.5, size=2)
            b = rng.uniform(-1.5, 1.5, size=2)
            assert kernel(kcfg, fmap, a, b) == pytest.approx(
                kernel(kcfg, fmap, b, a), rel=1e-12)

    def test_three_point_gram_psd(self, fmap, kcfg, rng):
        pts = rng.uniform(-1.5, 1.5, size=(3, 2))
        feats = featurize(fmap, pts)
        gram = kernel_between_features(kcfg, feats, feats)
        gram = 0.5 * (gram + gram.T)
        assert np.min(np.linalg.eigvalsh(gram)) >= -1e-10

    def test_gram_psd_random_sets(self, fmap, kcfg, rng):
        for _ in range(10):
            pts = rng.uniform(-1.6, 1.6, size=(rng.integers(2, 25), 2))
            feats = featurize(fmap, pts)
            gram = kernel_between_features(kcfg, feats, feats)
            gram = 0.5 * (gram + gram.T)
            assert np.min(np.linalg.eigvalsh(gram)) >= -1e-8

    def test_values_in_unit_interval(self, fmap, kcfg, rng):
        a = rng.uniform(-1.6, 1.6, size=(20, 2))
        g = kernel_between_features(kcfg, featurize(fmap, a), featurize(fmap, a))
        assert np.all(g > 0.0) and np.all(g <= 1.0 + 1e-12)


class TestKernelGradient:
    def test_zero_at_coincidence(self, fmap, kcfg):
        x = np.array([0.3, -0.2])
        g = kernel_gradient(kcfg, fmap, x, x)
        assert np.linalg.norm(g) <= 1e-12

    def test_matches_finite_differences(self, fmap, kcfg, rng):
        worst = 0.0
        for _ in range(100):
            q = rng.uniform(-1.4, 1.4, size=2)
            s = q + rng.uniform(-0.5, 0.5, size=2)
            analytic = kernel_gradient(kcfg, fmap, q, s)
            numeric = fd_gradient(lambda x: kernel(kcfg, fmap, x, s), q)
            scale = max(np.linalg.norm(numeric), 1e-8)
            worst = max(worst, np.linalg.norm(analytic - numeric) / scale)
        assert worst < 1e-5

    def test_single_center_antisymmetry(self, rng):
        # With one feature center the composed kernel depends on the two
        # scalar features, and swapping query/support flips the sign of the
        # gradient evaluated at mirrored positions about the center.
        fmap1 = FeatureMap(centers=np.array([[0.0, 0.0]]), sigma1=0.5, spacing=1.0)
        cfg = KernelConfig(sigma1=0.5, sigma2=1.0, grid_spacing=1.0)
        for _ in range(20):
            a = rng.uniform(-0.8, 0.8, size=2)
            b = rng.uniform(-0.8, 0.8, size=2)
            g_ab = kernel_gradient(cfg, fmap1, a, b)
            # gradient w.r.t. the support point, via symmetry of the kernel
            g_ba = kernel_gradient(cfg, fmap1, b, a)
            numeric_ab = fd_gradient(lambda x: kernel(cfg, fmap1, x, b), a)
            numeric_ba = fd_gradient(lambda x: kernel(cfg, fmap1, a, x), b)
            assert np.allclose(g_ab, numeric_ab, atol=1e-7)
            assert np.allclose(g_ba, numeric_ba, atol=1e-7)


class TestDecisionHelpers:
    def test_expansion_matches_loop(self, fmap, kcfg, rng):
        supports = rng.uniform(-1.2, 1.2, size=(12, 2))
        coeffs = rng.normal(size=12)
        bias = 0.7
        feats = featurize(fmap, supports)
        pts = rng.uniform(-1.5, 1.5, size=(6, 2))
        batch = decision_value_batch(kcfg, fmap, feats, coeffs, bias, pts)
        for i, p in enumerate(pts):
            direct = sum(c * kernel(kcfg, fmap, p, s)
                         for c, s in zip(coeffs, supports)) + bias
            assert batch[i] == pytest.approx(direct, rel=1e-10, abs=1e-12)

    def test_gradient_matches_finite_differences(self, fmap, kcfg, rng):
        supports = rng.uniform(-1.2, 1.2, size=(15, 2))
        coeffs = rng.normal(size=15)
        feats = featurize(fmap, supports)

        def value(x):
            return float(decision_value_batch(kcfg, fmap, feats, coeffs, 0.0,
                                              x[None, :])[0])

        worst = 0.0
        for _ in range(100):
            x = rng.uniform(-1.4, 1.4, size=2)
            analytic = decision_gradient_at(kcfg, fmap, feats, coeffs, x)
            numeric = fd_gradient(value, x)
            scale = max(np.linalg.norm(numeric), 1e-8)
            worst = max(worst, np.linalg.norm(analytic - numeric) / scale)
        assert worst < 1e-5

    def test_zero_coefficients_zero_gradient(self, fmap, kcfg, rng):
        supports = rng.uniform(-1, 1, size=(4, 2))
        feats = featurize(fmap, supports)
        g = decision_gradient_at(kcfg, fmap, feats, np.zeros(4),
                                 np.array([0.2, 0.1]))
        assert np.linalg.norm(g) == 0.0


class TestConfigValidation:
    def test_positive_bandwidths_required(self):
        with pytest.raises(ValueError):
            KernelConfig(sigma1=0.0)
        with pytest.raises(ValueError):
            KernelConfig(sigma1=0.3, sigma2=-1.0)
        with pytest.raises(ValueError):
            KernelConfig(sigma1=0.3, grid_spacing=0.0)
