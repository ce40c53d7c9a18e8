"""Quantizers and their training-time surrogates."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import softmax
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.cluster import kmeans_plusplus
from sklearn.utils.validation import check_is_fitted

from ._validation import check_positive, check_samples
from .entropy_coding.pmf import quantize_pmf
from .entropy_coding.rans import RansState, rans_encode
from .errors import ParameterError
from .prob_models.densities import DiscretizedDensity, _base, bin_mass_grads, interval_mass, std_pdf

ANNEAL_RATIO = 1.05


def uniform_quantize(z) -> np.ndarray:
    """Round to the nearest integer; ties go away from zero."""
    z = np.asarray(z, dtype=np.float64)
    return (np.sign(z) * np.floor(np.abs(z) + 0.5)).astype(np.int64)


# dithered (universal) quantization


def shared_dither(seed: int, shape) -> np.ndarray:
    """Dither both sides regenerate from the seed in the stream header."""
    return np.random.default_rng(seed).uniform(-0.5, 0.5, size=shape)


def dithered_quantize(y, u_prime) -> np.ndarray:
    u_prime = np.asarray(u_prime, dtype=np.float64)
    if np.any(u_prime < -0.5) or np.any(u_prime >= 0.5):
        raise ParameterError("dither must lie in [-0.5, 0.5)")
    return uniform_quantize(np.asarray(y, dtype=np.float64) - u_prime)


def dithered_reconstruct(k, u_prime) -> np.ndarray:
    return np.asarray(k, dtype=np.float64) + np.asarray(u_prime, dtype=np.float64)


def conditional_entropy_estimate(k, u_prime, n_bins: int = 20) -> float:
    """Plug-in estimate of H(k | u') in bits, binning the dither."""
    k = np.asarray(k, dtype=np.int64).ravel()
    u = np.asarray(u_prime, dtype=np.float64).ravel()
    bins = np.minimum(((u + 0.5) * n_bins).astype(np.int64), n_bins - 1)
    total = 0.0
    for b in range(n_bins):
        kb = k[bins == b]
        if kb.size == 0:
            continue
        _, c = np.unique(kb, return_counts=True)
        p = c / kb.size
        total += kb.size / k.size * float(-(p * np.log2(p)).sum())
    return total


# scalar quantizers


@dataclass(frozen=True)
class ScalarQuantizer:
    boundaries: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.boundaries, dtype=np.float64)
        p = np.asarray(self.points, dtype=np.float64)
        if p.size != b.size + 1:
            raise ParameterError("need exactly one more point than boundaries")
        if b.size and np.any(np.diff(b) <= 0):
            raise ParameterError("boundaries must be strictly increasing")
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "points", p)

    @property
    def n_levels(self) -> int:
        return self.points.size

    def index(self, x) -> np.ndarray:
        return np.searchsorted(self.boundaries, np.asarray(x, dtype=np.float64), side="right")

    def __call__(self, x) -> np.ndarray:
        return self.points[self.index(x)]

    @classmethod
    def from_points(cls, points) -> "ScalarQuantizer":
        p = np.sort(np.asarray(points, dtype=np.float64))
        return cls((p[1:] + p[:-1]) / 2.0, p)


class LloydMaxQuantizer(BaseEstimator, TransformerMixin):
    """MSE-optimal scalar quantizer by alternating cells and centroids.

    ``transform`` gives cell indices, ``inverse_transform`` their points.
    """

    def __init__(self, n_levels: int = 8, tol: float = 1e-10, max_iter: int = 1000):
        self.n_levels = n_levels
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        x = check_samples(X, ensure_2d=False).ravel()
        if self.n_levels < 1:
            raise ParameterError("n_levels must be >= 1")
        uniq = np.unique(x)
        m = min(self.n_levels, uniq.size)
        if m == uniq.size:
            points = uniq.copy()
        else:
            points = np.unique(np.quantile(x, (np.arange(m) + 0.5) / m))
            if points.size < m:  # heavy ties in the quantiles
                points = uniq[np.linspace(0, uniq.size - 1, m).round().astype(int)]
        history = []
        prev = np.inf
        for it in range(1, self.max_iter + 1):
            q = ScalarQuantizer.from_points(points)
            idx = q.index(x)
            mse = float(np.mean((x - q.points[idx]) ** 2))
            history.append(mse)
            counts = np.bincount(idx, minlength=q.n_levels)
            sums = np.bincount(idx, weights=x, minlength=q.n_levels)
            new = np.where(counts > 0, sums / np.maximum(counts, 1), q.points)
            empty = np.flatnonzero(counts == 0)
            if empty.size:
                # reseed empty cells at the worst-represented samples
                worst = np.argsort(-((x - q.points[idx]) ** 2), kind="stable")
                new[empty] = x[worst[: empty.size]]
            new = np.unique(new)
            if prev - mse <= self.tol and empty.size == 0:
                break
            prev = mse
            points = new
        self.quantizer_ = ScalarQuantizer.from_points(points)
        self.mse_history_ = history
        self.n_iter_ = it
        return self

    @property
    def boundaries_(self):
        return self.quantizer_.boundaries

    @property
    def points_(self):
        return self.quantizer_.points

    def transform(self, X):
        check_is_fitted(self, "quantizer_")
        return self.quantizer_.index(np.asarray(X, dtype=np.float64))

    def inverse_transform(self, idx):
        check_is_fitted(self, "quantizer_")
        return self.quantizer_.points[np.asarray(idx)]

    def predict(self, X):
        return self.inverse_transform(self.transform(X))


def lloyd_max(samples, n_levels: int, tol: float = 1e-10, max_iter: int = 1000) -> ScalarQuantizer:
    return LloydMaxQuantizer(n_levels, tol, max_iter).fit(samples).quantizer_


class ECVQ(BaseEstimator, TransformerMixin):
    """Entropy-constrained VQ: minimize ``-log2 P(c) + lam * ||z - c||^2`` per sample.

    Cell probabilities are re-estimated with additive smoothing ``alpha``; the
    tracked objective includes the matching Dirichlet penalty so every
    alternation step is a descent step.
    """

    def __init__(
        self,
        n_codewords: int = 8,
        lam: float = 1.0,
        alpha: float = 0.5,
        tol: float = 1e-9,
        max_iter: int = 300,
        n_init: int = 5,
        random_state: int = 0,
    ):
        self.n_codewords = n_codewords
        self.lam = lam
        self.alpha = alpha
        self.tol = tol
        self.max_iter = max_iter
        self.n_init = n_init
        self.random_state = random_state

    def _costs(self, X, codebook, log_p):
        d2 = ((X[:, None, :] - codebook[None, :, :]) ** 2).sum(-1)
        return -log_p[None, :] + self.lam * d2, d2

    def _objective(self, X, codebook, probs, assign):
        n = X.shape[0]
        log_p = np.log2(probs)
        d2 = ((X - codebook[assign]) ** 2).sum(-1)
        penalty = -self.alpha * log_p.sum() / n
        return float(np.mean(-log_p[assign] + self.lam * d2) + penalty)

    def _single(self, X, seed):
        m = self.n_codewords
        n = X.shape[0]
        codebook, _ = kmeans_plusplus(X, min(m, n), random_state=seed)
        if codebook.shape[0] < m:
            codebook = np.vstack([codebook, np.repeat(codebook[:1], m - codebook.shape[0], 0)])
        probs = np.full(m, 1.0 / m)
        history = []
        assign = None
        for _ in range(self.max_iter):
            cost, _ = self._costs(X, codebook, np.log2(probs))
            assign = np.argmin(cost, axis=1)
            history.append(self._objective(X, codebook, probs, assign))
            counts = np.bincount(assign, minlength=m)
            for j in np.flatnonzero(counts):
                codebook[j] = X[assign == j].mean(0)
            history.append(self._objective(X, codebook, probs, assign))
            probs = (counts + self.alpha) / (n + m * self.alpha)
            history.append(self._objective(X, codebook, probs, assign))
            if len(history) > 3 and history[-4] - history[-1] <= self.tol * abs(history[-4]):
                break
        return codebook, probs, history

    def fit(self, X, y=None):
        X = check_samples(X)
        if self.n_codewords < 1:
            raise ParameterError("n_codewords must be >= 1")
        check_positive(self.lam, "lam", allow_zero=True)
        check_positive(self.alpha, "alpha")
        rng = np.random.default_rng(self.random_state)
        best = None
        for _ in range(max(1, self.n_init)):
            cb, p, hist = self._single(X, int(rng.integers(2**31)))
            if best is None or hist[-1] < best[2][-1]:
                best = (cb, p, hist)
        self.codebook_, self.cell_probs_, self.lagrangian_history_ = best
        self.lagrangian_ = best[2][-1]
        return self

    def transform(self, X):
        check_is_fitted(self, "codebook_")
        cost, _ = self._costs(check_samples(X), self.codebook_, np.log2(self.cell_probs_))
        return np.argmin(cost, axis=1)

    def inverse_transform(self, idx):
        return self.codebook_[np.asarray(idx)]

    def predict(self, X):
        return self.inverse_transform(self.transform(X))

    def rate_distortion(self, X) -> tuple[float, float]:
        """Actual rANS bits per sample (cell PMF at 16 bits) and MSE per sample."""
        X = check_samples(X)
        idx = self.transform(X)
        pmf = quantize_pmf(self.cell_probs_, 16)
        state = rans_encode(pmf, idx.tolist(), RansState())
        rate = state.serialized_bits() / X.shape[0]
        dist = float(((X - self.codebook_[idx]) ** 2).sum(1).mean())
        return rate, dist


def ecvq_fit(samples, n_codewords: int, lam: float, **kw):
    q = ECVQ(n_codewords, lam, **kw).fit(samples)
    return q.codebook_, q.cell_probs_


# soft-to-hard relaxation


def soft_assignment(z, codebook, sigma: float) -> np.ndarray:
    """``softmax(-sigma * ||z - c_i||^2)``; sigma = 0 gives uniform weights."""
    sigma = check_positive(sigma, "sigma", allow_zero=True)
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    c = np.asarray(codebook, dtype=np.float64)
    if c.ndim == 1:
        c = c[:, None]
    if z.shape[1] != c.shape[1]:
        z = z.T if z.shape[0] == c.shape[1] else z.reshape(-1, c.shape[1])
    d2 = ((z[:, None, :] - c[None, :, :]) ** 2).sum(-1)
    return softmax(-sigma * d2, axis=1)


def soft_quantize(z, codebook, sigma: float) -> np.ndarray:
    c = np.asarray(codebook, dtype=np.float64)
    c2 = c[:, None] if c.ndim == 1 else c
    return soft_assignment(z, c2, sigma) @ c2


def anneal_schedule(sigma0: float, n_steps: int, ratio: float = ANNEAL_RATIO) -> np.ndarray:
    return sigma0 * ratio ** np.arange(n_steps)


# stochastic binarization


def stochastic_binarize(z, rng=None) -> np.ndarray:
    """+1 with probability (1 + z) / 2, else -1; unbiased for z in [-1, 1]."""
    rng = np.random.default_rng(rng)
    z = np.asarray(z, dtype=np.float64)
    if np.any(np.abs(z) > 1):
        warnings.warn("binarizer input outside [-1, 1] was clamped", RuntimeWarning, stacklevel=2)
        z = np.clip(z, -1.0, 1.0)
    return np.where(rng.random(z.shape) < (1.0 + z) / 2.0, 1.0, -1.0)


def ste_derivative(z=None):
    """Straight-through surrogate: the derivative of the identity."""
    return 1.0 if z is None else np.ones_like(np.asarray(z, dtype=np.float64))


# additive uniform noise relaxation


class NoisyDensity:
    """Density of ``y + u`` with ``u ~ U[-0.5, 0.5)``: ``p~(v) = F(v + 0.5) - F(v - 0.5)``.

    No tail folding, so it is a proper continuous density; at interior
    integers it equals the discretized PMF.
    """

    def __init__(self, family: str, loc, scale, weights=None):
        base = DiscretizedDensity(family, loc, scale, 0, 1, weights)
        self.family = family
        self.loc = base.loc
        self.scale = base.scale
        self.weights = base.weights

    @classmethod
    def from_density(cls, density: DiscretizedDensity) -> "NoisyDensity":
        return cls(density.family, density.loc, density.scale, density.weights)

    def pdf(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)[..., None]
        return (self.weights * interval_mass(self.family, v - 0.5, v + 0.5, self.loc, self.scale)).sum(-1)

    def nll_bits(self, v) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return -np.log2(self.pdf(v))

    def grad_v(self, v) -> np.ndarray:
        base = _base(self.family)
        v = np.asarray(v, dtype=np.float64)[..., None]
        hi = std_pdf(base, (v + 0.5 - self.loc) / self.scale)
        lo = std_pdf(base, (v - 0.5 - self.loc) / self.scale)
        return (self.weights * (hi - lo) / self.scale).sum(-1)

    def grad_params(self, v):
        """Derivatives of ``p~(v)`` w.r.t. each component's loc and log-scale."""
        v = np.asarray(v, dtype=np.float64)[..., None]
        _, dloc, dlogs = bin_mass_grads(self.family, v, self.loc, self.scale)
        return self.weights * dloc, self.weights * dlogs


def noisy_relax(density: DiscretizedDensity) -> NoisyDensity:
    return NoisyDensity.from_density(density)


__all__ = [
    "ANNEAL_RATIO",
    "ECVQ",
    "LloydMaxQuantizer",
    "NoisyDensity",
    "ScalarQuantizer",
    "anneal_schedule",
    "conditional_entropy_estimate",
    "dithered_quantize",
    "dithered_reconstruct",
    "ecvq_fit",
    "lloyd_max",
    "noisy_relax",
    "shared_dither",
    "soft_assignment",
    "soft_quantize",
    "ste_derivative",
    "stochastic_binarize",
    "uniform_quantize",
]
