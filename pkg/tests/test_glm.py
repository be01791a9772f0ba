import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import stats as sps

from hazardnet.baselines import (
    ParametricGlmModel,
    _negative_ll,
    fit_parametric,
    predict_median,
    quantile,
    ranged_probability,
    sample_time,
)
from hazardnet.datasets import Dataset, Standardization
from hazardnet.synthetic import SynthConfig, generate

X0 = np.zeros((1, 0))


def exponential_dataset(n, d, seed):
    """Unit-shape ground truth: t = -log(u) / exp(w.x + b), all observed."""
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(d)
    b = rng.standard_normal()
    x = rng.standard_normal((n, d))
    u = rng.uniform(size=n)
    t = -np.log(u) / np.exp(x @ w + b)
    order = np.argsort(t, kind="stable")
    ds = Dataset(x=x[order], y=np.ones(n, dtype=np.int64), t=t[order],
                 pairs=[(i, i) for i in range(n)])
    return ds, w, b


def toy(family="weibull", bias=0.0, shape=1.0):
    return ParametricGlmModel(family=family, w=np.array([bias]), shape=shape,
                              standardization=Standardization.identity(0))


class TestGradients:
    @pytest.mark.parametrize("learn_shape", [False, True])
    def test_matches_finite_differences(self, learn_shape):
        rng = np.random.default_rng(19)
        for _ in range(8):
            n, d = 30, 3
            xa = np.hstack([rng.normal(size=(n, d)), np.ones((n, 1))])
            y = (rng.uniform(size=n) > 0.3).astype(float)
            t = rng.uniform(0.1, 4.0, size=n)
            theta = rng.normal(size=d + 1 + (1 if learn_shape else 0)) * 0.5
            args = (xa, y, t, np.log(t), learn_shape)
            _, grad = _negative_ll(theta, *args)
            eps = 1e-6
            for j in range(len(theta)):
                step = np.zeros(len(theta))
                step[j] = eps
                fp, _ = _negative_ll(theta + step, *args)
                fm, _ = _negative_ll(theta - step, *args)
                assert_allclose(grad[j], (fp - fm) / (2 * eps),
                                rtol=1e-5, atol=1e-7)


class TestRecovery:
    def test_exponential_on_own_process(self):
        ds, w, b = exponential_dataset(2000, 3, seed=0)
        model = fit_parametric(ds, family="exponential")
        assert model.shape == 1.0
        w_raw, b_raw = model.raw_coefficients()
        assert np.mean(np.abs(w_raw - w)) < 0.1
        assert abs(b_raw - b) < 0.1

    def test_weibull_learns_quadratic_shape(self):
        # S = exp(-alpha t^2 / 2) is a shape-2 law with rate alpha / 2
        out = generate(SynthConfig(n_observed=2000, n_censored=0, d=3,
                                   dist="rayleigh", seed=1))
        model = fit_parametric(out.dataset, family="weibull")
        assert abs(model.shape - 2.0) < 0.1
        w_raw, b_raw = model.raw_coefficients()
        assert np.mean(np.abs(w_raw - out.true_w)) < 0.1
        assert abs(b_raw - (out.true_b - np.log(2.0))) < 0.1

    def test_censoring_tolerated(self):
        # censored records keep their drawn times, which damps the apparent
        # hazard growth; the fit must still complete with increasing hazard
        out = generate(SynthConfig(n_observed=800, n_censored=800, d=2,
                                   dist="rayleigh", seed=2))
        model = fit_parametric(out.dataset, family="weibull")
        assert np.all(np.isfinite(model.w))
        assert model.shape > 1.0

    def test_deterministic(self):
        ds, _, _ = exponential_dataset(300, 2, seed=3)
        m1 = fit_parametric(ds, family="weibull")
        m2 = fit_parametric(ds, family="weibull")
        assert_array_equal(m1.w, m2.w)
        assert m1.shape == m2.shape


class TestQueries:
    def test_median_formula(self):
        m = toy(bias=np.log(2.0), shape=2.0)  # g = 2
        assert_allclose(predict_median(m, X0), np.sqrt(np.log(2.0) / 2.0),
                        rtol=1e-14)

    def test_median_is_alpha_half(self):
        m = toy(bias=0.4, shape=1.7)
        assert_allclose(predict_median(m, X0), quantile(m, X0, 0.5), rtol=1e-14)

    def test_quantile_round_trip(self):
        m = toy(bias=-0.3, shape=2.5)
        for alpha in (0.05, 0.5, 0.95):
            t = quantile(m, X0, alpha)
            assert_allclose(ranged_probability(m, X0, 0.0, t), alpha, rtol=1e-12)

    def test_ranged_probability_bounds(self):
        m = toy(shape=1.0)
        assert ranged_probability(m, X0, 1.0, 1.0) == 0.0
        assert_allclose(ranged_probability(m, X0, 0.0, np.log(2.0)), 0.5,
                        rtol=1e-14)

    def test_invalid_arguments(self):
        m = toy()
        with pytest.raises(ValueError):
            quantile(m, X0, 1.0)
        with pytest.raises(ValueError):
            ranged_probability(m, X0, 2.0, 1.0)

    def test_sampling_matches_analytic_law(self):
        m = toy(bias=0.5, shape=2.0)
        g = np.exp(0.5)
        rng = np.random.default_rng(4)
        draws = np.array([sample_time(m, X0, rng) for _ in range(10000)])
        stat = sps.kstest(draws, lambda t: 1 - np.exp(-g * t ** 2)).statistic
        assert stat < 0.02

    def test_sampling_deterministic(self):
        m = toy()
        assert sample_time(m, X0, np.random.default_rng(5)) == \
            sample_time(m, X0, np.random.default_rng(5))


class TestValidationAndSerialization:
    def test_unknown_family_rejected(self):
        with pytest.raises(ValueError):
            toy(family="gamma")
        ds, _, _ = exponential_dataset(20, 1, seed=6)
        with pytest.raises(ValueError):
            fit_parametric(ds, family="gamma")

    def test_nonpositive_shape_rejected(self):
        with pytest.raises(ValueError):
            toy(shape=0.0)

    def test_all_censored_rejected(self):
        ds = Dataset(x=np.zeros((2, 1)), y=np.zeros(2, dtype=np.int64),
                     t=np.array([1.0, 2.0]), pairs=[(0, 0), (1, 1)])
        with pytest.raises(ValueError):
            fit_parametric(ds)

    def test_json_round_trip(self):
        ds, _, _ = exponential_dataset(100, 2, seed=7)
        model = fit_parametric(ds, family="weibull", unit="weeks")
        back = ParametricGlmModel.from_json(model.to_json())
        assert back.family == "weibull" and back.unit == "weeks"
        assert_array_equal(back.w, model.w)
        assert back.shape == model.shape

    def test_file_round_trip(self, tmp_path):
        ds, _, _ = exponential_dataset(80, 1, seed=8)
        model = fit_parametric(ds, family="exponential")
        path = tmp_path / "baseline.json"
        model.save(path)
        back = ParametricGlmModel.load(path)
        x = ds.x[:5]
        assert_array_equal(back.score(x), model.score(x))

    def test_raw_coefficients_preserve_scores(self):
        ds, _, _ = exponential_dataset(150, 3, seed=9)
        model = fit_parametric(ds, family="weibull")
        w_raw, b_raw = model.raw_coefficients()
        x = ds.x[:10]
        assert_allclose(x @ w_raw + b_raw, model.score(x), rtol=1e-10)
