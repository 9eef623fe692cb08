import math

import numpy as np
import pytest

from eigenlocus.experiments import load_config
from eigenlocus.gaussian import (Dataset, GaussianClassSpec, bayes_classifier, bayes_discriminant,
                                 bayes_terms, estimate_error_rate, extreme_fraction, load_csv,
                                 sample_dataset, save_csv, trace_bayes_boundary)
from eigenlocus.kernels import KernelSpec
from eigenlocus.model import fit, train

from _oracles import equal_cov_bayes_error, scipy_bayes

I2 = np.eye(2)
SIM1 = (GaussianClassSpec([3, 1], [[25, 0], [0, 2]]), GaussianClassSpec([3, -1], [[2, 0], [0, 25]]))
REG2_S = [[0.65, 0.25], [0.25, 0.45]]
REG2 = (GaussianClassSpec([1, 13], REG2_S), GaussianClassSpec([6, 22], REG2_S))


def random_spec(rng, d):
    A = rng.normal(size=(d, d))
    return GaussianClassSpec(rng.normal(size=d) * 2, A @ A.T + 0.5 * np.eye(d))


class TestClassSpec:
    def test_not_pd(self):
        with pytest.raises(ValueError):
            GaussianClassSpec([0, 0], [[1, 2], [2, 1]])

    def test_not_symmetric(self):
        with pytest.raises(ValueError):
            GaussianClassSpec([0, 0], [[1, 0.5], [0.2, 1]])

    def test_shape(self):
        with pytest.raises(ValueError):
            GaussianClassSpec([0, 0, 0], I2)

    def test_cholesky(self):
        s = GaussianClassSpec([0, 0], REG2_S)
        np.testing.assert_allclose(s.cholesky @ s.cholesky.T, REG2_S, rtol=1e-14)


class TestSampleDataset:
    def test_standard_normal_mean(self):
        s = GaussianClassSpec([0, 0], I2)
        ds = sample_dataset(s, s, 100_000, 0, 3)
        # three standard errors of a 1e5 mean is about 0.0095
        assert np.abs(ds.X.mean(0)).max() <= 0.02

    def test_covariance_recovered(self):
        s1, s2 = SIM1
        ds = sample_dataset(s1, s2, 50_000, 50_000, 4)
        np.testing.assert_allclose(np.cov(ds.X[ds.y > 0].T), s1.covariance, rtol=0.05, atol=0.1)
        np.testing.assert_allclose(np.cov(ds.X[ds.y < 0].T), s2.covariance, rtol=0.05, atol=0.1)

    def test_seed_reuse_bitwise(self):
        a = sample_dataset(*SIM1, 200, 200, 7)
        b = sample_dataset(*SIM1, 200, 200, 7)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)

    def test_seeds_differ(self):
        a = sample_dataset(*SIM1, 50, 50, 7)
        b = sample_dataset(*SIM1, 50, 50, 8)
        assert not np.array_equal(a.X, b.X)

    def test_class_streams_independent(self):
        # the first class draw does not depend on the size of the second class
        a = sample_dataset(*SIM1, 30, 10, 5)
        b = sample_dataset(*SIM1, 30, 99, 5)
        np.testing.assert_array_equal(a.X[:30], b.X[:30])

    def test_labels_and_counts(self):
        ds = sample_dataset(*SIM1, 5, 3, 0)
        np.testing.assert_array_equal(ds.y, [1, 1, 1, 1, 1, -1, -1, -1])
        assert ds.n_per_class == (5, 3) and len(ds) == 8

    def test_reg1_config(self):
        cfg = load_config("reg1-fullrank-linear")
        S = [[0.95, 0.45], [0.45, 0.35]]
        np.testing.assert_array_equal(cfg["classes"]["class1"]["covariance"], S)
        np.testing.assert_array_equal(cfg["classes"]["class2"]["covariance"], S)
        np.testing.assert_array_equal(cfg["classes"]["class1"]["mean"], [3, 0.25])
        np.testing.assert_array_equal(cfg["classes"]["class2"]["mean"], [3, -0.25])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            sample_dataset(GaussianClassSpec([0], [[1]]), GaussianClassSpec([0, 0], I2), 2, 2, 0)


class TestBayesDiscriminant:
    def test_equidistant_zero(self):
        s1, s2 = GaussianClassSpec([1, 0], I2), GaussianClassSpec([-1, 0], I2)
        assert bayes_discriminant(s1, s2, [0.0, 0.0]) == 0.0

    def test_linear_expansion(self):
        s1, s2 = GaussianClassSpec([1, 0], I2), GaussianClassSpec([-1, 0], I2)
        rng = np.random.default_rng(0)
        X = rng.normal(size=(50, 2)) * 3
        np.testing.assert_allclose(bayes_discriminant(s1, s2, X), -4 * X[:, 0], atol=1e-12)
        assert bayes_discriminant(s1, s2, [1.0, 0.0]) == pytest.approx(-4.0)
        assert bayes_classifier(s1, s2)(np.array([[1.0, 0.0]]))[0] == 1.0

    def test_identical_specs_zero(self):
        s = GaussianClassSpec([1, 2], REG2_S)
        X = np.random.default_rng(1).normal(size=(100, 2)) * 5
        assert np.abs(bayes_discriminant(s, s, X)).max() <= 1e-12

    def test_matches_library_densities(self):
        rng = np.random.default_rng(2)
        for d in (1, 2, 4):
            s1, s2 = random_spec(rng, d), random_spec(rng, d)
            X = rng.normal(size=(40, d)) * 3
            ref = scipy_bayes(s1.mean, s1.covariance, s2.mean, s2.covariance, X)
            np.testing.assert_allclose(bayes_discriminant(s1, s2, X), ref, rtol=1e-9, atol=1e-9)

    def test_antisymmetry(self):
        rng = np.random.default_rng(3)
        s1, s2 = random_spec(rng, 3), random_spec(rng, 3)
        X = rng.normal(size=(100, 3)) * 4
        np.testing.assert_allclose(bayes_discriminant(s1, s2, X), -bayes_discriminant(s2, s1, X),
                                   atol=1e-10)

    def test_projection_decomposition(self):
        s1, s2 = SIM1
        X = np.random.default_rng(4).normal(size=(20, 2)) * 4
        t = bayes_terms(s1, s2, X)
        rebuilt = np.sum(t.quadratic_projection * X, 1) - X @ t.linear_projection + t.constant
        np.testing.assert_allclose(t.value, rebuilt, rtol=1e-12)

    def test_scalar_for_single_point(self):
        assert isinstance(bayes_discriminant(*SIM1, [0.0, 0.0]), float)

    def test_equal_covariance_boundary_affine(self):
        tr = trace_bayes_boundary(*REG2, bounds=(-3, 10, 8, 27), resolution=200)
        V = tr.vertices
        pts = V[np.linspace(0, len(V) - 1, 100).astype(int)]
        c = pts - pts.mean(0)
        # smallest singular value over the spread: zero for collinear points
        sv = np.linalg.svd(c, compute_uv=False)
        assert sv[-1] / sv[0] <= 1e-6

    def test_boundary_on_zero_level(self):
        tr = trace_bayes_boundary(*SIM1, bounds=(-12, 18, -14, 14), resolution=128)
        assert not tr.empty
        vals = bayes_discriminant(*SIM1, tr.vertices)
        assert np.abs(vals).max() <= tr.tolerance


class TestErrorRate:
    def test_identical_half(self):
        s = GaussianClassSpec([0, 0], I2)
        rate, sd = estimate_error_rate(bayes_classifier(s, s), s, s, 10_000, 1)
        assert sd == pytest.approx(math.sqrt(rate * (1 - rate) / 10_000))
        # the oracle labels every point +1, so exactly half are wrong
        assert abs(rate - 0.5) <= 3 * sd

    def test_reg2_near_zero(self):
        rate, _ = estimate_error_rate(bayes_classifier(*REG2), *REG2, 100_000, 2)
        assert rate <= 1e-4
        assert equal_cov_bayes_error(REG2[0].mean, REG2[1].mean, REG2_S) < 1e-10

    def test_sim1(self):
        rate, sd = estimate_error_rate(bayes_classifier(*SIM1), *SIM1, 1_000_000, 12345)
        assert rate == pytest.approx(0.169, abs=0.005)
        assert sd < 5e-4

    def test_equal_covariance_analytic(self):
        S = [[0.95, 0.45], [0.45, 0.35]]
        s1, s2 = GaussianClassSpec([3, 0.25], S), GaussianClassSpec([3, -0.25], S)
        rate, sd = estimate_error_rate(bayes_classifier(s1, s2), s1, s2, 400_000, 6)
        assert abs(rate - equal_cov_bayes_error(s1.mean, s2.mean, S)) <= 4 * sd

    def test_oracle_agrees_with_library_labels(self):
        ds = sample_dataset(*SIM1, 5000, 5000, 9)
        ours = bayes_classifier(*SIM1)(ds.X)
        s1, s2 = SIM1
        ref = np.where(scipy_bayes(s1.mean, s1.covariance, s2.mean, s2.covariance, ds.X) <= 0, 1.0, -1.0)
        np.testing.assert_array_equal(ours, ref)

    def test_small_n_rejected(self):
        with pytest.raises(ValueError):
            estimate_error_rate(bayes_classifier(*SIM1), *SIM1, 999, 0)


class TestExtremeFraction:
    def test_two_point(self):
        m = train([[1.0, 0.0], [-1.0, 0.0]], [1, -1], KernelSpec("linear"))
        assert extreme_fraction(m, 2) == 1.0

    def test_equal_cov_far_apart_sparse(self):
        ds = sample_dataset(*REG2, 200, 200, 0)
        run = fit(ds.X, ds.y, KernelSpec("linear"), 50)
        assert run.converged
        assert 0.003 <= extreme_fraction(run.model, 400) <= 0.05

    def test_bad_n(self):
        m = train([[1.0, 0.0], [-1.0, 0.0]], [1, -1], KernelSpec("linear"))
        with pytest.raises(ValueError):
            extreme_fraction(m, 0)


class TestCSV:
    def test_roundtrip(self, tmp_path):
        ds = sample_dataset(*SIM1, 20, 15, 3)
        save_csv(ds, tmp_path / "d.csv")
        back = load_csv(tmp_path / "d.csv")
        np.testing.assert_array_equal(back.X, ds.X)
        np.testing.assert_array_equal(back.y, ds.y)
        assert back.n_per_class == (20, 15)

    def test_headerless(self, tmp_path):
        (tmp_path / "d.csv").write_text("1,0,1\n-1,0,-1\n")
        back = load_csv(tmp_path / "d.csv")
        np.testing.assert_array_equal(back.X, [[1, 0], [-1, 0]])

    def test_ragged(self, tmp_path):
        (tmp_path / "d.csv").write_text("1,0,1\n-1,-1\n")
        with pytest.raises(ValueError, match="ragged"):
            load_csv(tmp_path / "d.csv")

    def test_empty(self, tmp_path):
        (tmp_path / "d.csv").write_text("")
        with pytest.raises(ValueError):
            load_csv(tmp_path / "d.csv")

    def test_dataset_type(self, tmp_path):
        ds = sample_dataset(*SIM1, 2, 2, 0)
        assert isinstance(ds, Dataset)
