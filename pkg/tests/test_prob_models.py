import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from ncc.entropy_coding import RansState, ac_decode, ac_encode, message_information, rans_encode
from ncc.errors import FormatError, InvalidDistributionError, ParameterError
from ncc.prob_models import (
    Categorical,
    ContextModel,
    DiscretizedDensity,
    GatedMixturePredictor,
    cross_entropy,
    dequantization_gap,
    discretize,
    empirical_entropy,
    entropy,
    fit_categorical,
    fit_discretized,
    fit_ml,
    kl,
    uniform_box,
)
from ncc.prob_models.fitting import discretized_nll_and_grad


def central_diff(f, x, eps=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = eps
        g[i] = (f(x + e) - f(x - e)) / (2 * eps)
    return g


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-12)


class TestInformationMeasures:
    def test_fair_coin_entropy(self):
        assert entropy(Categorical([0.5, 0.5])) == 1.0

    def test_cross_entropy_example(self):
        assert cross_entropy([0.75, 0.25], [0.5, 0.5]) == pytest.approx(1.0)

    def test_support_violation(self):
        assert kl([0.5, 0.5], [1.0, 0.0]) == math.inf
        assert cross_entropy([0.5, 0.5], [1.0, 0.0]) == math.inf

    def test_invalid_categorical(self):
        with pytest.raises(InvalidDistributionError):
            Categorical([0.5, 0.6])

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(1, 20))
    def test_gibbs(self, seed, m):
        rng = np.random.default_rng(seed)
        p, q = rng.dirichlet(np.ones(m)), rng.dirichlet(np.ones(m))
        assert kl(p, p) == 0.0
        assert kl(p, q) >= 0.0
        assert kl(p, q) == pytest.approx(cross_entropy(p, q) - entropy(p), abs=1e-12)


class TestDiscretize:
    def test_logistic_center_bin(self):
        d = discretize("logistic", 0.0, 1.0, (-10, 10))
        sig = lambda t: 1.0 / (1.0 + math.exp(-t))
        assert d.prob(0) == pytest.approx(sig(0.5) - sig(-0.5), abs=1e-12)
        assert d.prob(0) == pytest.approx(0.244918, abs=1e-6)

    @pytest.mark.parametrize("family", ["logistic", "gaussian"])
    def test_symmetry(self, family):
        d = discretize(family, 0.0, 1.7, (-6, 6))
        np.testing.assert_allclose(d.prob(np.arange(1, 6)), d.prob(-np.arange(1, 6)), rtol=1e-12)

    @pytest.mark.parametrize("family", ["logistic", "gaussian", "logistic-mixture"])
    def test_normalized_with_tails(self, family):
        if family == "logistic-mixture":
            d = discretize(family, [-1.0, 2.0], [0.5, 3.0], (-2, 2), [0.3, 0.7])
        else:
            d = discretize(family, 0.4, 2.0, (-2, 2))
        assert d.pmf().sum() == pytest.approx(1.0, abs=1e-15)
        assert d.prob(-2) == pytest.approx(float(d.cdf(-1.5)), abs=1e-15)

    def test_interior_bins_are_cdf_differences(self):
        d = discretize("gaussian", 0.3, 1.2, (-5, 5))
        x = np.arange(-4, 5)
        np.testing.assert_allclose(d.prob(x), d.cdf(x + 0.5) - d.cdf(x - 0.5), atol=1e-15)

    def test_far_tail_does_not_cancel(self):
        # naive F(b) - F(a) rounds to 0 here; the mirrored evaluation does not
        d = discretize("gaussian", 0.0, 0.5, (-40, 40))
        assert d.prob(10) > 0 and d.prob(-10) == d.prob(10)

    def test_bad_scale(self):
        with pytest.raises(ParameterError):
            discretize("logistic", 0.0, 0.0, (-2, 2))
        with pytest.raises(ParameterError):
            discretize("logistic", 0.0, 1.0, (2, 2))

    def test_blob_roundtrip_and_rejection(self):
        d = discretize("logistic-mixture", [-1.0, 2.0], [0.5, 3.0], (-9, 9), [0.3, 0.7])
        blob = d.to_bytes()
        assert DiscretizedDensity.from_bytes(blob) == d
        with pytest.raises(FormatError):
            DiscretizedDensity.from_bytes(b"XX" + blob[2:])
        with pytest.raises(FormatError):
            DiscretizedDensity.from_bytes(blob[:-1])
        future = blob[:2] + bytes([9]) + blob[3:]
        with pytest.raises(FormatError):
            DiscretizedDensity.from_bytes(future)


class TestFitting:
    def test_categorical_smoothing(self):
        c = fit_ml("categorical", np.zeros(1000, dtype=int), num_symbols=3)
        assert c.probs[0] > 0.999 and np.all(c.probs[1:] > 0)

    def test_logistic_consistency(self):
        rng = np.random.default_rng(0)
        data = np.round(rng.logistic(3.0, 2.0, 100_000))
        fit = fit_discretized("logistic", data, support=(-60, 60))
        assert abs(fit.density.loc[0] - 3.0) < 0.05
        assert abs(fit.density.scale[0] - 2.0) < 0.05
        assert fit.final_nll <= fit.initial_nll
        assert fit.final_nll >= empirical_entropy(data.astype(int) + 60) - 1e-9

    def test_constant_data_hits_floor(self):
        fit = fit_discretized("gaussian", np.full(50, 4), support=(0, 8))
        assert fit.density.scale[0] < 0.2
        assert fit.final_nll < 1e-6

    @pytest.mark.parametrize("family", ["logistic", "gaussian", "logistic-mixture"])
    def test_gradients_match_finite_differences(self, family):
        rng = np.random.default_rng(1)
        values = np.arange(-6, 7)
        counts = rng.integers(1, 30, values.size).astype(float)
        k = 3 if family == "logistic-mixture" else 1
        for _ in range(5):
            theta = np.concatenate([rng.normal(0, 2, k), rng.normal(0.5, 0.5, k)])
            if k > 1:
                theta = np.concatenate([theta, rng.normal(0, 1, k)])
            f = lambda t: discretized_nll_and_grad(family, t, values, counts, -6, 6, k)[0]
            _, g = discretized_nll_and_grad(family, theta, values, counts, -6, 6, k)
            assert rel_err(g, central_diff(f, theta)) < 1e-5

    def test_mixture_fit_improves(self):
        rng = np.random.default_rng(2)
        data = np.round(np.concatenate([rng.normal(-5, 1, 3000), rng.normal(6, 2, 3000)]))
        fit = fit_discretized("logistic-mixture", data, n_components=2)
        single = fit_discretized("logistic", data, support=fit.density.support[[0, -1]])
        assert fit.final_nll < single.final_nll - 0.5

    def test_iid_compression_close_to_cross_entropy(self):
        rng = np.random.default_rng(3)
        true = Categorical(rng.dirichlet(np.ones(16)))
        data = true.sample(20_000, rng)
        model = fit_categorical(data[:10_000], 16)
        msg = data[10_000:].tolist()
        pmf = model.quantized(16)
        bits = len(ac_encode(pmf, msg)) / len(msg)
        target = cross_entropy(true, model)
        assert abs(bits - target) / target < 0.02

    def test_empty_data(self):
        with pytest.raises(ParameterError):
            fit_ml("logistic", np.array([]))


class TestDequantization:
    def test_uniform_density(self):
        d = DiscretizedDensity("uniform", 0.0, 5.5, -5, 5)
        gap = dequantization_gap(d, np.arange(-5, 6), rng=0)
        assert gap.discrete_nll == pytest.approx(np.log2(11))
        assert gap.noisy_nll == pytest.approx(np.log2(11))

    def test_logistic_gap_nonnegative(self):
        rng = np.random.default_rng(4)
        data = np.round(rng.logistic(0.5, 3.0, 20_000)).astype(int)
        d = discretize("logistic", 0.5, 3.0, (-200, 200))
        gap = dequantization_gap(d, data, rng=5)
        assert gap.noisy_nll - gap.discrete_nll >= -3 * gap.noisy_stderr

    def test_unit_box_gap_vanishes(self):
        d = uniform_box(3, -5, 5)
        gap = dequantization_gap(d, np.full(100, 3), rng=0)
        assert gap.discrete_nll == pytest.approx(0.0, abs=1e-12)
        assert gap.noisy_nll == pytest.approx(0.0, abs=1e-12)

    def test_narrow_logistic_gap_is_large(self):
        # a sharp continuous density is a poor dequantized model: gap grows as scale shrinks
        data = np.full(200, 3)
        gaps = []
        for s in (0.3, 0.1, 0.03):
            g = dequantization_gap(discretize("logistic", 3.0, s, (-5, 10)), data, rng=0)
            gaps.append(g.noisy_nll - g.discrete_nll)
        assert gaps[0] < gaps[1] < gaps[2]


class TestContextModel:
    def test_unseen_context_is_uniform(self):
        m = ContextModel(4, order=2)
        np.testing.assert_allclose(m.predict((0, 1)).probs(), 0.25)

    def test_update_counts(self):
        m = ContextModel(2, order=1, alpha=0.1)
        for _ in range(100):
            m.update((0,), 1)
        p = m.probs((0,))
        assert p[1] == pytest.approx(100.1 / 100.2)
        assert m.predict((0,)).prob(1) > 0.97

    def test_start_padding(self):
        m = ContextModel(3, order=2)
        assert m.context_of([]) == (3, 3)
        assert m.context_of([1]) == (3, 1)
        assert m.context_of([0, 1, 2]) == (1, 2)

    def test_chain_rule(self):
        rng = np.random.default_rng(0)
        msg = rng.integers(0, 3, 200).tolist()
        a, b = ContextModel(3, 2), ContextModel(3, 2)
        total = a.sequence_information(msg)
        steps = 0.0
        for i, x in enumerate(msg):
            ctx = b.context_of(msg[:i])
            steps += b.predict(ctx).information(x)
            b.update(ctx, x)
        assert total == pytest.approx(steps, rel=1e-12)

    def test_markov_chain_rate(self):
        rng = np.random.default_rng(1)
        P = np.array([[0.9, 0.05, 0.05], [0.1, 0.8, 0.1], [0.3, 0.3, 0.4]])
        evals, evecs = np.linalg.eig(P.T)
        pi = np.real(evecs[:, np.argmin(np.abs(evals - 1))])
        pi /= pi.sum()
        h_cond = -(pi[:, None] * P * np.log2(P)).sum()
        x = [0]
        for _ in range(10_000 - 1):
            x.append(int(rng.choice(3, p=P[x[-1]])))
        enc = ContextModel(3, order=1)
        pmfs = []
        for i, s in enumerate(x):
            ctx = enc.context_of(x[:i])
            pmfs.append(enc.predict(ctx))
            enc.update(ctx, s)
        state = rans_encode(pmfs, x)
        rate = state.serialized_bits() / len(x)
        dec = ContextModel(3, order=1)
        out = []
        for i in range(len(x)):
            ctx = dec.context_of(out)
            s = state.pop(dec.predict(ctx))
            dec.update(ctx, s)
            out.append(s)
        assert out == x
        assert abs(rate - h_cond) / h_cond < 0.05

    def test_arithmetic_path_stays_synchronized(self):
        rng = np.random.default_rng(2)
        msg = rng.integers(0, 5, 500).tolist()
        enc = ContextModel(5, order=2)
        pmfs = []
        for i, s in enumerate(msg):
            ctx = enc.context_of(msg[:i])
            pmfs.append(enc.predict(ctx))
            enc.update(ctx, s)
        bits = ac_encode(pmfs, msg)
        assert len(bits) <= message_information(pmfs, msg) + 3
        assert ac_decode(pmfs, bits) == msg

    def test_config_roundtrip(self):
        m = ContextModel(256, order=2, alpha=0.25)
        n = ContextModel.from_config_bytes(m.config_bytes())
        assert (n.num_symbols, n.order, n.alpha) == (256, 2, 0.25)

    def test_validation(self):
        with pytest.raises(ParameterError):
            ContextModel(2, alpha=0)


@pytest.fixture(scope="module")
def ar_sequence():
    rng = np.random.default_rng(0)
    x = np.zeros(2000)
    for i in range(1, x.size):
        x[i] = 0.8 * x[i - 1] + rng.logistic(0, 1.5)
    return np.round(x).astype(int)


@pytest.fixture(scope="module")
def fitted(ar_sequence):
    return GatedMixturePredictor(n_components=3, window=2).fit_sequence(ar_sequence)


class TestGatedMixture:
    def test_fit_reduces_nll(self, fitted):
        assert fitted.nll_ < fitted.initial_nll_

    def test_valid_pmfs(self, fitted, ar_sequence):
        X = fitted.windows(ar_sequence)
        np.testing.assert_allclose(fitted.gates(X).sum(1), 1.0, atol=1e-12)
        p = fitted.predict_proba(X)
        assert np.all(p >= 0)
        np.testing.assert_allclose(p.sum(1), 1.0, atol=1e-12)

    def test_beats_iid_model(self, fitted, ar_sequence):
        iid = fit_discretized("logistic", ar_sequence, support=(fitted.z_min_, fitted.z_max_))
        assert -fitted.score(fitted.windows(ar_sequence), ar_sequence) < iid.final_nll

    def test_gradient(self, fitted, ar_sequence):
        rng = np.random.default_rng(1)
        X = fitted._scaled(fitted.windows(ar_sequence)[:300])
        y = ar_sequence[:300]
        theta = fitted.theta_ + rng.normal(0, 0.2, fitted.theta_.size)
        _, g = fitted._nll_and_grad(theta, X, y)
        fd = central_diff(lambda t: fitted._nll_and_grad(t, X, y)[0], theta)
        assert rel_err(g, fd) < 1e-5

    def test_estimator_api(self, fitted):
        params = fitted.get_params()
        assert params["n_components"] == 3
        fresh = clone(fitted)
        assert not hasattr(fresh, "theta_")
        assert fresh.set_params(window=4).window == 4

    def test_predict_pmf_codes(self, fitted, ar_sequence):
        X = fitted.windows(ar_sequence[:100])
        pmfs = [fitted.predict_pmf(row) for row in X]
        sym = (ar_sequence[:100] - fitted.z_min_).tolist()
        bits = ac_encode(pmfs, sym)
        assert ac_decode(pmfs, bits) == sym

    def test_fit_ml_dispatch(self, ar_sequence):
        m = fit_ml("gated-mixture", ar_sequence[:300], n_components=2, window=1)
        assert isinstance(m, GatedMixturePredictor)
        assert m.n_components == 2
