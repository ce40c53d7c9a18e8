"""Trainable linear transform codec: y = x f, z = round(y), x_hat = z g.

Training minimizes the surrogate Lagrangian ``R + lam * D`` where the rate
uses the noisy density ``p~(y + u)`` and, in ``noise`` mode, the distortion
uses ``x_hat = (y + u) g``. In ``noise+ste`` mode the distortion instead uses
the rounded latents with an identity derivative through the rounding.
Rates are bits per sample; distortion is the squared error summed over
dimensions, averaged over samples.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .._validation import check_positive, check_samples
from ..entropy_coding.pmf import QuantizedPmf
from ..entropy_coding.rans import RansState, rans_encode
from ..errors import DivergenceError, ParameterError
from ..prob_models.densities import DiscretizedDensity, bin_mass_grads, std_pdf
from ..prob_models.fitting import SCALE_FLOOR
from ..quantization import uniform_quantize

_LN2 = np.log(2.0)
SURROGATES = ("noise", "noise+ste")
N_NOISE = 8
MAX_SUPPORT = 4096


@dataclass
class Params:
    f: np.ndarray  # (N, d) analysis
    g: np.ndarray  # (d, N) synthesis
    loc: np.ndarray  # (d,)
    log_s: np.ndarray  # (d,)

    @property
    def scale(self) -> np.ndarray:
        return SCALE_FLOOR + np.exp(self.log_s)

    def ravel(self) -> np.ndarray:
        return np.concatenate([self.f.ravel(), self.g.ravel(), self.loc, self.log_s])

    @classmethod
    def unravel(cls, theta, n_features, n_latents) -> "Params":
        N, d = n_features, n_latents
        i = 0
        f = theta[i : i + N * d].reshape(N, d)
        i += N * d
        g = theta[i : i + d * N].reshape(d, N)
        i += d * N
        return cls(f, g, theta[i : i + d], theta[i + d : i + 2 * d])


def surrogate_loss(
    params: Params,
    X: np.ndarray,
    noise: np.ndarray,
    lam: float,
    surrogate: str = "noise",
    family: str = "logistic",
    train_transform: bool = True,
    with_grad: bool = True,
):
    """Monte-Carlo surrogate Lagrangian; ``noise`` has shape (n, S, d).

    Returns ``(loss, rate, distortion, grad)`` with ``grad`` flattened like
    :meth:`Params.ravel` (zeros for f and g when they are frozen).
    """
    n, S, d = noise.shape
    scale = params.scale
    y = X @ params.f
    v = y[:, None, :] + noise
    p, dloc, dlogs = bin_mass_grads(family, v, params.loc, scale)
    with np.errstate(divide="ignore"):
        rate = float(-np.log2(p).sum() / (n * S))
    if surrogate == "noise":
        q = v
        err = q @ params.g - X[:, None, :]
        dist = float((err**2).sum() / (n * S))
    else:
        q = uniform_quantize(y).astype(np.float64)
        err = q @ params.g - X
        dist = float((err**2).sum() / n)
    loss = rate + lam * dist
    if not with_grad:
        return loss, rate, dist, None
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = -1.0 / (p * _LN2 * n * S)
        a = (v - 0.5 - params.loc) / scale
        b = (v + 0.5 - params.loc) / scale
        dp_dv = (std_pdf(family, b) - std_pdf(family, a)) / scale
        g_v = inv * dp_dv  # dR/dv
        g_loc = (inv * dloc).reshape(-1, d).sum(0)
        g_logs = (inv * dlogs).reshape(-1, d).sum(0) * (np.exp(params.log_s) / scale)
    if surrogate == "noise":
        g_g = lam * 2.0 * np.einsum("nsd,nsk->dk", q, err) / (n * S)
        g_v = g_v + lam * 2.0 * (err @ params.g.T) / (n * S)
        g_y = g_v.sum(1)
    else:
        g_g = lam * 2.0 * (q.T @ err) / n
        g_y = g_v.sum(1) + lam * 2.0 * (err @ params.g.T) / n
    g_f = X.T @ g_y
    if not train_transform:
        g_f = np.zeros_like(g_f)
        g_g = np.zeros_like(g_g)
    grad = np.concatenate([g_f.ravel(), g_g.ravel(), g_loc, g_logs])
    return loss, rate, dist, grad


@dataclass
class TrueEval:
    """Hard-quantization measurements next to the surrogate on the same data."""

    rate: float  # actual rANS bits per sample
    distortion: float
    info_bits: float  # sum of -log2 Q(z) per sample
    coder_bits: int
    surrogate_rate: float
    surrogate_distortion: float
    surrogate_loss: float


class LinearTransformCodec(BaseEstimator):
    """Linear analysis/synthesis pair with a factorized discretized prior.

    ``train_transform=False`` freezes ``f = g = I`` and trains only the prior,
    which is the identity-transform baseline.
    """

    def __init__(
        self,
        n_latents=None,
        lam: float = 1.0,
        surrogate: str = "noise",
        n_noise: int = N_NOISE,
        family: str = "logistic",
        train_transform: bool = True,
        tol: float = 1e-12,
        max_iter: int = 3000,
        n_init: int = 3,
        n_restarts: int = 5,
        random_state=0,
    ):
        self.n_latents = n_latents
        self.lam = lam
        self.surrogate = surrogate
        self.n_noise = n_noise
        self.family = family
        self.train_transform = train_transform
        self.tol = tol
        self.max_iter = max_iter
        self.n_init = n_init
        self.n_restarts = n_restarts
        self.random_state = random_state

    # setup

    def _check_params(self, n_features):
        check_positive(self.lam, "lam")
        if self.surrogate not in SURROGATES:
            raise ParameterError(f"surrogate must be one of {SURROGATES}")
        if self.family not in ("logistic", "gaussian"):
            raise ParameterError("prior family must be logistic or gaussian")
        d = n_features if self.n_latents is None else int(self.n_latents)
        if not 1 <= d <= n_features:
            raise ParameterError("need 1 <= n_latents <= n_features")
        if not self.train_transform and d != n_features:
            raise ParameterError("the identity baseline needs n_latents == n_features")
        return d

    def init_params(self, X) -> Params:
        X = check_samples(X)
        N = X.shape[1]
        d = self._check_params(N)
        rng = np.random.default_rng(self.random_state)
        if self.train_transform:
            q, _ = np.linalg.qr(rng.standard_normal((N, N)))
            f = q[:, :d].copy()
        else:
            f = np.eye(N)
        y = X @ f
        s = np.maximum(y.std(0), 0.5) * (np.sqrt(3) / np.pi if self.family == "logistic" else 1.0)
        return Params(f, f.T.copy(), y.mean(0), np.log(s))

    def draw_noise(self, n, d, seed=None) -> np.ndarray:
        rng = np.random.default_rng(self.random_state if seed is None else seed)
        return rng.uniform(-0.5, 0.5, size=(n, self.n_noise, d))

    def loss(self, theta, X, noise, with_grad=True):
        p = Params.unravel(theta, X.shape[1], noise.shape[2])
        return surrogate_loss(p, X, noise, self.lam, self.surrogate, self.family, self.train_transform, with_grad)

    # fitting

    def _fit_once(self, X, seed):
        p0 = self.set_params(random_state=seed).init_params(X)
        d = p0.f.shape[1]
        # one fixed noise draw: a deterministic objective the line search can trust
        noise = self.draw_noise(X.shape[0], d, seed)
        last = {"theta": p0.ravel()}
        history = []

        def fun(theta):
            loss, _, _, grad = self.loss(theta, X, noise)
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                return np.inf, np.zeros_like(theta)
            return loss, grad

        def record(intermediate_result):
            history.append(float(intermediate_result.fun))
            last["theta"] = intermediate_result.x.copy()

        theta = p0.ravel()
        f0, _ = fun(theta)
        if not np.isfinite(f0):
            raise DivergenceError("surrogate loss is not finite at initialization", last_state=p0)
        history.append(f0)
        n_iter = 0
        # L-BFGS restarts drop a stale curvature model after sharp turns
        start = f0
        for _ in range(self.n_restarts + 1):
            res = minimize(
                fun,
                theta,
                jac=True,
                method="L-BFGS-B",
                callback=record,
                options=dict(maxiter=self.max_iter, ftol=self.tol, gtol=1e-10, maxcor=20),
            )
            n_iter += int(res.nit)
            if not np.isfinite(res.fun):
                raise DivergenceError(
                    "training diverged", last_state=Params.unravel(last["theta"], X.shape[1], d)
                )
            improved = start - res.fun
            theta, start = res.x.copy(), res.fun
            if res.nit <= 1 or improved <= self.tol * abs(res.fun):
                break
        return Params.unravel(theta, X.shape[1], d), history, n_iter, str(res.message)

    def fit(self, X, y=None):
        X = check_samples(X)
        base_seed = self.random_state
        rng = np.random.default_rng(base_seed)
        seeds = [base_seed] + [int(s) for s in rng.integers(2**31, size=max(0, self.n_init - 1))]
        best = None
        try:
            for seed in seeds if self.train_transform else seeds[:1]:
                out = self._fit_once(X, seed)
                if best is None or out[1][-1] < best[1][-1]:
                    best = out + (seed,)
        finally:
            self.random_state = base_seed
        self.params_, self.loss_history_, self.n_iter_, self.message_, self.seed_ = best
        self.n_features_in_ = X.shape[1]
        self.support_ = self._support(X @ self.params_.f)
        return self

    def _support(self, y):
        lo = np.floor(y.min(0) - 0.5).astype(np.int64) - 4
        hi = np.ceil(y.max(0) + 0.5).astype(np.int64) + 4
        lo = np.minimum(lo, np.floor(self.params_.loc - 20 * self.params_.scale).astype(np.int64))
        hi = np.maximum(hi, np.ceil(self.params_.loc + 20 * self.params_.scale).astype(np.int64))
        if np.any(hi - lo + 1 > MAX_SUPPORT):
            raise ParameterError("latent range too wide to code")
        return np.stack([lo, hi], 1)

    # coding

    def priors(self) -> list[DiscretizedDensity]:
        check_is_fitted(self, "params_")
        p = self.params_
        return [
            DiscretizedDensity(self.family, p.loc[j], p.scale[j], int(lo), int(hi))
            for j, (lo, hi) in enumerate(self.support_)
        ]

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        return check_samples(X) @ self.params_.f

    def quantize(self, X) -> np.ndarray:
        z = uniform_quantize(self.transform(X))
        return np.clip(z, self.support_[:, 0], self.support_[:, 1])

    def reconstruct(self, z) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) @ self.params_.g

    def predict(self, X) -> np.ndarray:
        return self.reconstruct(self.quantize(X))

    def _pmfs(self) -> list[QuantizedPmf]:
        return [d.quantized(16) for d in self.priors()]

    def encode(self, X) -> bytes:
        z = self.quantize(X)
        pmfs = self._pmfs()
        syms = (z - self.support_[:, 0]).ravel().tolist()
        return rans_encode(pmfs * z.shape[0], syms).to_bytes()

    def decode(self, stream: bytes, n_samples: int) -> np.ndarray:
        state = RansState.from_bytes(stream)
        pmfs = self._pmfs()
        d = len(pmfs)
        z = np.array([state.pop(pmfs[j]) for _ in range(n_samples) for j in range(d)], dtype=np.int64)
        return self.reconstruct(z.reshape(n_samples, d) + self.support_[:, 0])


def train_linear_codec(X, lam: float, surrogate: str = "noise", **kwargs) -> LinearTransformCodec:
    return LinearTransformCodec(lam=lam, surrogate=surrogate, **kwargs).fit(X)


def eval_codec_true(codec: LinearTransformCodec, X, seed: int = 12345) -> TrueEval:
    """Measure hard-quantized rate (actual rANS bits) and distortion on ``X``."""
    check_is_fitted(codec, "params_")
    X = check_samples(X)
    n = X.shape[0]
    z = codec.quantize(X)
    pmfs = codec._pmfs()
    syms = z - codec.support_[:, 0]
    info = float(sum(-np.log2(np.asarray(pmfs[j].freqs)[syms[:, j]] / pmfs[j].total).sum() for j in range(len(pmfs))))
    stream = codec.encode(X)
    coder_bits = RansState.from_bytes(stream).serialized_bits()
    dist = float(((X - codec.reconstruct(z)) ** 2).sum(1).mean())
    noise = codec.draw_noise(n, z.shape[1], seed)
    loss, srate, sdist, _ = codec.loss(codec.params_.ravel(), X, noise, with_grad=False)
    return TrueEval(coder_bits / n, dist, info / n, coder_bits, srate, sdist, loss)
