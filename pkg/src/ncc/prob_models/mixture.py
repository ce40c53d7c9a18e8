"""Gated mixture of discretized-logistic experts over a window of past symbols."""
from __future__ import annotations

import numpy as np
from scipy.special import softmax
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .._validation import check_samples
from ..entropy_coding.pmf import QuantizedPmf, quantize_pmf
from ..errors import ParameterError
from ..optim import gradient_descent
from .densities import bin_mass_grads
from .fitting import SCALE_FLOOR

_LN2 = np.log(2.0)


class GatedMixturePredictor(BaseEstimator):
    """p(y | x) = sum_j gate_j(x) * Q_j(y | x) with linear gates and expert locations.

    ``x`` is a window of previous values; each expert is a discretized logistic
    whose location is affine in ``x`` and whose scale is a free parameter.
    Targets are integers on ``[z_min, z_max]`` with tails folded into the edges.
    """

    def __init__(
        self,
        n_components: int = 3,
        window: int = 2,
        z_min: int | None = None,
        z_max: int | None = None,
        tol: float = 1e-8,
        max_iter: int = 3000,
        random_state: int = 0,
    ):
        self.n_components = n_components
        self.window = window
        self.z_min = z_min
        self.z_max = z_max
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    # parameter vector layout
    def _split(self, theta):
        k, d = self.n_components, self.n_features_in_
        i = 0
        wg = theta[i : i + d * k].reshape(d, k); i += d * k
        bg = theta[i : i + k]; i += k
        wl = theta[i : i + d * k].reshape(d, k); i += d * k
        bl = theta[i : i + k]; i += k
        log_s = theta[i : i + k]
        return wg, bg, wl, bl, log_s

    def _scaled(self, X):
        return (X - self.x_mean_) / self.x_std_

    def _nll_and_grad(self, theta, Xs, y):
        wg, bg, wl, bl, log_s = self._split(theta)
        n = y.size
        logits = Xs @ wg + bg
        g = softmax(logits, axis=1)
        loc = Xs @ wl + bl
        es = np.exp(log_s)
        scale = SCALE_FLOOR + es
        yy = y[:, None].astype(np.float64)
        q, dloc, dlogs = bin_mass_grads(
            "logistic", yy, loc, scale, lower_open=yy <= self.z_min_, upper_open=yy >= self.z_max_
        )
        mix = (g * q).sum(1)
        if np.any(mix <= 0):
            return np.inf, np.zeros_like(theta)
        nll = float(-np.log(mix).sum() / (n * _LN2))
        c = 1.0 / (mix * n * _LN2)
        r = g * q / mix[:, None]
        d_logit = -(r - g) / (n * _LN2)
        d_loc = -(g * dloc) * c[:, None]
        d_logs = -((g * dlogs) * c[:, None]).sum(0) * (es / scale)
        grad = np.concatenate(
            [(Xs.T @ d_logit).ravel(), d_logit.sum(0), (Xs.T @ d_loc).ravel(), d_loc.sum(0), d_logs]
        )
        return nll, grad

    def _init_theta(self, y):
        k, d = self.n_components, self.n_features_in_
        rng = np.random.default_rng(self.random_state)
        qs = np.quantile(y, (np.arange(k) + 0.5) / k) + rng.normal(0, 1e-3, k)
        s = max(float(y.std()), 0.5) / k * np.sqrt(3) / np.pi
        return np.concatenate(
            [
                rng.normal(0, 1e-2, d * k),
                np.zeros(k),
                rng.normal(0, 1e-2, d * k),
                qs,
                np.full(k, np.log(s)),
            ]
        )

    def fit(self, X, y):
        if self.n_components < 1:
            raise ParameterError("n_components must be >= 1")
        X = check_samples(X)
        y = np.asarray(y)
        if y.shape[0] != X.shape[0]:
            raise ParameterError("X and y have different lengths")
        if not np.all(y == np.round(y)):
            raise ParameterError("targets must be integers")
        y = y.astype(np.int64)
        self.n_features_in_ = X.shape[1]
        self.z_min_ = int(y.min()) - 1 if self.z_min is None else int(self.z_min)
        self.z_max_ = int(y.max()) + 1 if self.z_max is None else int(self.z_max)
        if self.z_min_ >= self.z_max_:
            raise ParameterError("support needs z_min < z_max")
        y = np.clip(y, self.z_min_, self.z_max_)
        self.x_mean_ = X.mean(0)
        self.x_std_ = np.where(X.std(0) > 0, X.std(0), 1.0)
        Xs = self._scaled(X)
        theta0 = self._init_theta(y)
        self.initial_nll_ = self._nll_and_grad(theta0, Xs, y)[0]
        res = gradient_descent(lambda t: self._nll_and_grad(t, Xs, y), theta0, tol=self.tol, max_iter=self.max_iter)
        self.theta_ = res.x
        self.nll_ = res.fun
        self.n_iter_ = res.n_iter
        return self

    # sequences: predict x_i from the previous ``window`` values
    def windows(self, seq) -> np.ndarray:
        seq = np.asarray(seq, dtype=np.float64)
        pad = np.concatenate([np.zeros(self.window), seq])
        idx = np.arange(seq.size)[:, None] + np.arange(self.window)[None, :]
        return pad[idx]

    def fit_sequence(self, seq):
        seq = np.asarray(seq)
        if seq.size == 0:
            raise ParameterError("cannot fit a model to empty data")
        return self.fit(self.windows(seq), seq)

    def gates(self, X) -> np.ndarray:
        check_is_fitted(self, "theta_")
        wg, bg, *_ = self._split(self.theta_)
        return softmax(self._scaled(check_samples(X)) @ wg + bg, axis=1)

    def predict_proba(self, X) -> np.ndarray:
        """Predictive PMF over ``[z_min_, z_max_]`` for each row of ``X``."""
        check_is_fitted(self, "theta_")
        X = check_samples(X)
        wg, bg, wl, bl, log_s = self._split(self.theta_)
        Xs = self._scaled(X)
        g = softmax(Xs @ wg + bg, axis=1)
        loc = Xs @ wl + bl
        scale = SCALE_FLOOR + np.exp(log_s)
        support = np.arange(self.z_min_, self.z_max_ + 1, dtype=np.float64)
        q, _, _ = bin_mass_grads(
            "logistic",
            support[None, :, None],
            loc[:, None, :],
            scale,
            lower_open=support[None, :, None] == self.z_min_,
            upper_open=support[None, :, None] == self.z_max_,
        )
        p = np.maximum((q * g[:, None, :]).sum(-1), 0.0)
        return p / p.sum(1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X).argmax(1) + self.z_min_

    def predict_pmf(self, x_window) -> QuantizedPmf:
        return quantize_pmf(self.predict_proba(np.atleast_2d(x_window))[0], 16)

    def score(self, X, y) -> float:
        """Mean log2-likelihood (negated code length in bits per symbol)."""
        p = self.predict_proba(X)
        y = np.clip(np.asarray(y, dtype=np.int64), self.z_min_, self.z_max_) - self.z_min_
        with np.errstate(divide="ignore"):
            return float(np.log2(p[np.arange(y.size), y]).mean())
