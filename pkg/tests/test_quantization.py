import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate, stats
from sklearn.base import clone

from ncc.errors import ParameterError
from ncc.prob_models import DiscretizedDensity
from ncc.quantization import (
    ECVQ,
    LloydMaxQuantizer,
    NoisyDensity,
    ScalarQuantizer,
    anneal_schedule,
    conditional_entropy_estimate,
    dithered_quantize,
    dithered_reconstruct,
    ecvq_fit,
    lloyd_max,
    noisy_relax,
    shared_dither,
    soft_assignment,
    soft_quantize,
    ste_derivative,
    stochastic_binarize,
    uniform_quantize,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


class TestUniform:
    def test_examples(self):
        np.testing.assert_array_equal(uniform_quantize([0.2, -1.7]), [0, -2])
        np.testing.assert_array_equal(uniform_quantize([0.5, -0.5, 2.5]), [1, -1, 3])
        np.testing.assert_array_equal(uniform_quantize(np.arange(-5, 6)), np.arange(-5, 6))

    @given(arrays(np.float64, 20, elements=finite))
    def test_error_bound_and_symmetry(self, z):
        k = uniform_quantize(z)
        assert np.all(np.abs(z - k) <= 0.5)
        np.testing.assert_array_equal(uniform_quantize(-z), -k)


def dither_pair(sampler, n=100_000, seed=0):
    rng = np.random.default_rng(seed)
    y = sampler(rng, n)
    u_prime = shared_dither(seed + 1, n)
    k = dithered_quantize(y, u_prime)
    return y, u_prime, k, dithered_reconstruct(k, u_prime), y + rng.uniform(-0.5, 0.5, n)


class TestDithered:
    def test_example(self):
        k = dithered_quantize([1.3], [0.0])
        assert k[0] == 1 and dithered_reconstruct(k, [0.0])[0] == 1.0

    def test_dither_range(self):
        with pytest.raises(ParameterError):
            dithered_quantize([0.0], [0.5])
        u = shared_dither(3, 1000)
        assert u.min() >= -0.5 and u.max() < 0.5
        np.testing.assert_array_equal(u, shared_dither(3, 1000))

    @pytest.mark.parametrize(
        "sampler",
        [
            lambda rng, n: rng.normal(0, 3, n),
            lambda rng, n: rng.logistic(0.3, 0.7, n),
            lambda rng, n: np.where(rng.random(n) < 0.3, rng.normal(-2, 0.4, n), rng.normal(1.5, 1.0, n)),
        ],
        ids=["gaussian", "logistic", "mixture"],
    )
    def test_distributional_identity(self, sampler):
        *_, rec, noisy = dither_pair(sampler)
        assert stats.ks_2samp(rec, noisy).pvalue > 0.001

    def test_entropy_identity(self):
        _, u_prime, k, *_ = dither_pair(lambda rng, n: rng.normal(0, 3, n))

        def integrand(v):
            p = stats.norm.cdf(v + 0.5, 0, 3) - stats.norm.cdf(v - 0.5, 0, 3)
            return -p * np.log2(p) if p > 0 else 0.0

        # I[y; y+u] = h(y+u) - h(u) and h(u) = 0
        info = integrate.quad(integrand, -40, 40, limit=400, points=[0])[0]
        assert conditional_entropy_estimate(k, u_prime) == pytest.approx(info, rel=0.02)


class TestScalarQuantizer:
    def test_invariants(self):
        with pytest.raises(ParameterError):
            ScalarQuantizer([1.0, 0.5], [0, 1, 2])
        with pytest.raises(ParameterError):
            ScalarQuantizer([0.5], [0, 1, 2])
        q = ScalarQuantizer.from_points([2.0, 0.0])
        np.testing.assert_array_equal(q([-1, 0.9, 1.1, 5]), [0, 0, 2, 2])


class TestLloydMax:
    def test_uniform_two_levels(self):
        x = np.random.default_rng(0).uniform(0, 1, 20000)
        q = LloydMaxQuantizer(2).fit(x)
        np.testing.assert_allclose(q.points_, [0.25, 0.75], atol=0.01)
        np.testing.assert_allclose(q.boundaries_, [0.5], atol=0.01)
        # dense search over the single boundary with centroid reconstructions
        ts = np.linspace(0.3, 0.7, 401)
        mse = [np.mean((x - np.where(x < t, x[x < t].mean(), x[x >= t].mean())) ** 2) for t in ts]
        assert q.boundaries_[0] == pytest.approx(ts[int(np.argmin(mse))], abs=2e-3)

    def test_single_level_is_mean(self):
        x = np.random.default_rng(1).normal(3, 2, 500)
        assert lloyd_max(x, 1).points[0] == pytest.approx(x.mean())

    def test_enough_levels_is_lossless(self):
        x = np.array([1.0, 2.0, 2.0, 6.0, 1.0])
        q = LloydMaxQuantizer(5).fit(x)
        np.testing.assert_array_equal(q.predict(x), x)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 9))
    def test_mse_monotone(self, seed, m):
        rng = np.random.default_rng(seed)
        x = np.concatenate([rng.normal(0, 1, 300), rng.exponential(3, 100)])
        q = LloydMaxQuantizer(m).fit(x)
        assert np.all(np.diff(q.mse_history_) <= 1e-12)
        assert np.all(np.diff(q.boundaries_) > 0)

    def test_estimator_protocol(self):
        q = LloydMaxQuantizer(4, tol=1e-6)
        assert clone(q).get_params() == {"n_levels": 4, "tol": 1e-6, "max_iter": 1000}
        x = np.linspace(0, 1, 100)
        idx = q.fit(x).transform(x)
        np.testing.assert_array_equal(q.inverse_transform(idx), q.predict(x))


@pytest.fixture(scope="module")
def mixture_2d():
    rng = np.random.default_rng(5)
    return np.vstack([rng.normal([-2, 0], 1.0, (600, 2)), rng.normal([3, 1], 0.7, (400, 2))])


class TestECVQ:
    def test_large_lambda_is_nearest_codeword(self, mixture_2d):
        q = ECVQ(6, lam=1e6).fit(mixture_2d)
        d2 = ((mixture_2d[:, None] - q.codebook_[None]) ** 2).sum(-1)
        np.testing.assert_array_equal(q.transform(mixture_2d), d2.argmin(1))

    def test_tiny_lambda_collapses(self, mixture_2d):
        q = ECVQ(6, lam=1e-4).fit(mixture_2d)
        assert np.unique(q.transform(mixture_2d)).size == 1
        rate, _ = q.rate_distortion(mixture_2d)
        assert rate < 0.05

    def test_assignment_rule(self, mixture_2d):
        q = ECVQ(4, lam=0.7).fit(mixture_2d)
        cost = -np.log2(q.cell_probs_)[None] + 0.7 * ((mixture_2d[:, None] - q.codebook_[None]) ** 2).sum(-1)
        np.testing.assert_array_equal(q.transform(mixture_2d), cost.argmin(1))

    @pytest.mark.parametrize("lam", [0.3, 2.0])
    def test_lagrangian_monotone(self, mixture_2d, lam):
        for seed in range(5):
            hist = ECVQ(4, lam=lam, n_init=1, random_state=seed).fit(mixture_2d).lagrangian_history_
            assert np.all(np.diff(hist) <= 1e-12)

    def test_close_to_best_of_restarts(self, mixture_2d):
        fitted = ECVQ(4, lam=2.0).fit(mixture_2d).lagrangian_
        best = min(ECVQ(4, lam=2.0, n_init=1, random_state=s).fit(mixture_2d).lagrangian_ for s in range(50))
        assert fitted <= 1.02 * best

    def test_functional_form(self, mixture_2d):
        codebook, pmf = ecvq_fit(mixture_2d, 4, 2.0)
        assert codebook.shape == (4, 2)
        assert pmf.sum() == pytest.approx(1.0)


class TestSoft:
    codebook = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])

    def test_zero_sigma_is_mean(self):
        np.testing.assert_allclose(soft_quantize([[0.3, 0.4]], self.codebook, 0.0), [self.codebook.mean(0)])

    def test_saturation(self):
        out = soft_quantize([[0.9, 0.1]], self.codebook, 1e6)
        np.testing.assert_allclose(out, [self.codebook[1]], atol=1e-6)

    def test_equidistant_split(self):
        phi = soft_assignment([[0.5, 0.0]], self.codebook, 3.0)
        assert phi[0, 0] == pytest.approx(phi[0, 1])

    @given(arrays(np.float64, 2, elements=st.floats(-3, 3)), st.floats(0, 50))
    def test_probability_vector(self, z, sigma):
        phi = soft_assignment(z[None], self.codebook, sigma)
        assert phi.min() >= 0
        assert phi.sum() == pytest.approx(1.0)

    def test_hard_limit_off_boundaries(self):
        rng = np.random.default_rng(0)
        z = rng.uniform(-1, 3, (200, 2))
        d2 = ((z[:, None] - self.codebook[None]) ** 2).sum(-1)
        s = np.sort(d2, 1)
        keep = s[:, 1] - s[:, 0] > 1e-2
        hard = self.codebook[d2.argmin(1)]
        np.testing.assert_allclose(soft_quantize(z[keep], self.codebook, 1e5), hard[keep], atol=1e-8)

    def test_continuity_in_sigma(self):
        z = [[0.4, 0.7]]
        a = soft_quantize(z, self.codebook, 2.0)
        b = soft_quantize(z, self.codebook, 2.0 + 1e-7)
        assert np.abs(a - b).max() < 1e-5

    def test_scalar_codebook(self):
        out = soft_quantize(np.array([0.1, 0.9]), np.array([0.0, 1.0]), 1e4)
        np.testing.assert_allclose(out.ravel(), [0.0, 1.0], atol=1e-9)

    def test_anneal(self):
        sched = anneal_schedule(0.5, 4)
        np.testing.assert_allclose(sched, 0.5 * 1.05 ** np.arange(4))


class TestBinarize:
    def test_extremes(self):
        np.testing.assert_array_equal(stochastic_binarize(np.ones(100), 0), 1.0)
        np.testing.assert_array_equal(stochastic_binarize(-np.ones(100), 0), -1.0)

    @pytest.mark.parametrize("z", [0.0, 0.5, -0.3])
    def test_unbiased(self, z):
        b = stochastic_binarize(np.full(100_000, z), 1)
        assert set(np.unique(b)) <= {-1.0, 1.0}
        assert abs(b.mean() - z) < 0.01

    def test_clamp_warns(self):
        with pytest.warns(RuntimeWarning):
            b = stochastic_binarize(np.full(10, 1.5), 0)
        np.testing.assert_array_equal(b, 1.0)

    def test_ste(self):
        assert ste_derivative() == 1.0
        np.testing.assert_array_equal(ste_derivative(np.array([-0.3, 0.9])), [1.0, 1.0])


class TestNoisyDensity:
    def test_integer_points(self):
        nd = NoisyDensity("logistic", 0.3, 1.2)
        d = DiscretizedDensity("logistic", 0.3, 1.2, -10, 10)
        ks = np.arange(-3, 4)
        np.testing.assert_allclose(nd.pdf(ks), d.pmf()[ks + 10], rtol=0, atol=1e-12)

    def test_integrates_to_one(self):
        nd = noisy_relax(DiscretizedDensity("logistic-mixture", [-1.0, 2.0], [0.5, 1.5], -5, 5, [0.3, 0.7]))
        assert integrate.quad(lambda v: float(nd.pdf(v)), -30, 30, limit=200)[0] == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("family", ["gaussian", "logistic"])
    def test_gradients(self, family):
        nd = NoisyDensity(family, 0.4, 0.9)
        v = np.array([-1.3, 0.2, 0.95, 2.7])
        h = 1e-6
        dloc, dlogs = nd.grad_params(v)
        up, dn = NoisyDensity(family, 0.4 + h, 0.9), NoisyDensity(family, 0.4 - h, 0.9)
        np.testing.assert_allclose(dloc[:, 0], (up.pdf(v) - dn.pdf(v)) / (2 * h), rtol=1e-5)
        up, dn = NoisyDensity(family, 0.4, 0.9 * np.exp(h)), NoisyDensity(family, 0.4, 0.9 * np.exp(-h))
        np.testing.assert_allclose(dlogs[:, 0], (up.pdf(v) - dn.pdf(v)) / (2 * h), rtol=1e-5)
        np.testing.assert_allclose(nd.grad_v(v), (nd.pdf(v + h) - nd.pdf(v - h)) / (2 * h), rtol=1e-5)

    def test_noisy_nll_envelope(self):
        rng = np.random.default_rng(3)
        d = DiscretizedDensity("logistic", 0.2, 1.5, -30, 30)
        nd = noisy_relax(d)
        for z in rng.normal(0, 3, 20):
            noisy = nd.nll_bits(z + rng.uniform(-0.5, 0.5, 20000)).mean()
            discrete = -np.log2(d.prob(int(uniform_quantize(z))))
            assert noisy >= discrete - 1
