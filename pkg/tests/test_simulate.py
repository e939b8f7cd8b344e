import numpy as np
import pytest
from scipy import stats

from momclust import simulate

from test_mom import flat_scenario, small_config


class TestBenchmarkScenario:
    def test_structure(self):
        s = simulate.benchmark_scenario(300, 0.1, 42)
        assert (s.n, s.k, s.j, s.t) == (300, 3, 5, 5)
        assert np.array_equal(s.levels, np.full(5, 5))
        assert np.allclose(s.weights, [0.3, 0.4, 0.3])
        assert np.allclose(s.means[:, 0, 0], [1.75, 2.5, 3.25])
        for k in range(3):
            assert np.array_equal(s.time_covs[k], np.eye(5))
            assert np.array_equal(s.var_covs[k], np.eye(5))

    def test_rejects_bad_noise(self):
        with pytest.raises(ValueError):
            simulate.benchmark_scenario(100, 1.0, 0)

    def test_true_model(self):
        m = simulate.benchmark_scenario(100, 0.0, 0).true_model()
        assert m.k == 3
        assert m.thresholds is not None


class TestGenerate:
    def test_shapes_and_ranges(self):
        sd = simulate.generate(simulate.benchmark_scenario(120, 0.1, 7))
        assert sd.dataset.data.shape == (120, 5, 5)
        assert sd.true_labels.shape == (120,)
        assert set(np.unique(sd.true_labels)).issubset({1, 2, 3})
        assert np.all(sd.dataset.data >= 1) and np.all(sd.dataset.data <= 5)
        assert sd.latent.shape == (120, 5, 5)

    def test_noise_count_exact(self):
        sd = simulate.generate(simulate.benchmark_scenario(300, 0.2, 1))
        assert sd.noise_mask.sum() == 60
        sd0 = simulate.generate(simulate.benchmark_scenario(300, 0.0, 1))
        assert sd0.noise_mask.sum() == 0

    def test_seed_determinism(self):
        s = simulate.benchmark_scenario(80, 0.1, 99)
        d1 = simulate.generate(s)
        d2 = simulate.generate(s)
        assert np.array_equal(d1.dataset.data, d2.dataset.data)
        assert np.array_equal(d1.true_labels, d2.true_labels)
        assert np.array_equal(d1.noise_mask, d2.noise_mask)

    def test_different_seeds_differ(self):
        d1 = simulate.generate(simulate.benchmark_scenario(80, 0.0, 1))
        d2 = simulate.generate(simulate.benchmark_scenario(80, 0.0, 2))
        assert not np.array_equal(d1.dataset.data, d2.dataset.data)

    def test_marginal_level_distribution(self):
        # one cluster at mean 2.5, unit variance: P(level 2) = Phi(0) - Phi(-1)
        s = flat_scenario(4000, [2.5], seed=17, j=2, t=2)
        sd = simulate.generate(s)
        frac = np.mean(sd.dataset.data == 2)
        expected = stats.norm.cdf(0.0) - stats.norm.cdf(-1.0)
        se = np.sqrt(expected * (1 - expected) / sd.dataset.data.size)
        assert abs(frac - expected) < 5 * se

    def test_cluster_frequencies_match_weights(self):
        s = simulate.benchmark_scenario(3000, 0.0, 23)
        sd = simulate.generate(s)
        counts = np.bincount(sd.true_labels, minlength=4)[1:]
        chi2 = np.sum((counts - 3000 * s.weights) ** 2 / (3000 * s.weights))
        assert chi2 < stats.chi2(df=2).ppf(0.999)

    def test_noise_entries_roughly_uniform(self):
        s = simulate.benchmark_scenario(2000, 0.5, 31)
        sd = simulate.generate(s)
        noisy = sd.dataset.data[sd.noise_mask]
        counts = np.bincount(noisy.ravel(), minlength=6)[1:]
        expected = noisy.size / 5.0
        chi2 = np.sum((counts - expected) ** 2 / expected)
        assert chi2 < stats.chi2(df=4).ppf(0.999)

    def test_clean_units_match_latent(self):
        from momclust import ordinal
        s = simulate.benchmark_scenario(50, 0.2, 3)
        sd = simulate.generate(s)
        g = ordinal.default_thresholds(s.levels)
        for i in np.nonzero(~sd.noise_mask)[0][:10]:
            assert np.array_equal(sd.dataset.data[i],
                                  ordinal.discretize(sd.latent[i], g))


class TestOracleAri:
    def test_separated_clusters_perfect(self):
        s = flat_scenario(60, [0.5, 6.5], seed=41)
        sd = simulate.generate(s)
        assert simulate.oracle_ari(sd, s, small_config(2)) == 1.0

    def test_single_cluster_zero(self):
        s = flat_scenario(30, [2.5], seed=41)
        sd = simulate.generate(s)
        assert simulate.oracle_ari(sd, s, small_config(1)) == 0.0

    def test_overlapping_clusters_below_one(self):
        s = flat_scenario(200, [2.4, 2.6], seed=43)
        sd = simulate.generate(s)
        val = simulate.oracle_ari(sd, s, small_config(2))
        assert -0.5 < val < 0.5
