"""Maximum-likelihood fitting (equivalently, cross-entropy minimization)."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.special import softmax

from ..errors import ParameterError
from ..optim import gradient_descent
from .densities import DiscretizedDensity, bin_mass_grads
from .info import Categorical

SCALE_FLOOR = 1e-4
LOG_SCALE_CAP = 30.0
_LN2 = np.log(2.0)


def fit_categorical(data, num_symbols: int, alpha: float = 0.1) -> Categorical:
    """Additively smoothed frequency estimate."""
    data = np.asarray(data, dtype=np.int64)
    if data.size == 0:
        raise ParameterError("cannot fit a model to empty data")
    if data.min() < 0 or data.max() >= num_symbols:
        raise ParameterError("data outside the alphabet")
    counts = np.bincount(data, minlength=num_symbols).astype(np.float64) + alpha
    return Categorical(counts / counts.sum())


def _unpack(family, theta, k):
    if family == "logistic-mixture":
        loc = theta[:k]
        log_s = theta[k : 2 * k]
        logits = theta[2 * k :]
        return loc, log_s, logits
    return theta[:1], theta[1:2], np.zeros(1)


def discretized_nll_and_grad(family, theta, values, counts, z_min, z_max, k=1):
    """Mean NLL in bits of integer data and its gradient w.r.t. ``theta``.

    ``theta`` is ``[loc, log_scale]`` for single densities and
    ``[locs, log_scales, logits]`` for mixtures; scale = floor + exp(log_scale).
    """
    loc, log_s, logits = _unpack(family, theta, k)
    if np.any(log_s > LOG_SCALE_CAP):
        # a flat optimum drifts the scale upward; reject so the line search backs off
        return np.inf, np.zeros_like(theta)
    es = np.exp(log_s)
    scale = SCALE_FLOOR + es
    w = softmax(logits)
    x = values[:, None].astype(np.float64)
    q, dloc, dlogs = bin_mass_grads(
        family, x, loc, scale, lower_open=(x <= z_min), upper_open=(x >= z_max)
    )
    dlogs = dlogs * (es / scale)
    mix = (w * q).sum(1)
    n = counts.sum()
    with np.errstate(divide="ignore"):
        nll = float(-(counts * np.log(mix)).sum() / (n * _LN2))
    if not np.isfinite(nll):
        return np.inf, np.zeros_like(theta)
    wc = (counts / mix)[:, None] / (n * _LN2)
    g_loc = -(wc * w * dloc).sum(0)
    g_logs = -(wc * w * dlogs).sum(0)
    if family == "logistic-mixture":
        resp = w * q / mix[:, None]
        g_logit = -((resp - w) * (counts / (n * _LN2))[:, None]).sum(0)
        grad = np.concatenate([g_loc, g_logs, g_logit])
    else:
        grad = np.concatenate([g_loc, g_logs])
    return nll, grad


def _init_theta(family, data, k, rng):
    mean = float(data.mean())
    std = max(float(data.std()), 0.5)
    if family == "logistic-mixture":
        qs = np.quantile(data, (np.arange(k) + 0.5) / k) + rng.normal(0, 1e-3, k)
        s = std / k * np.sqrt(3) / np.pi
        return np.concatenate([qs, np.full(k, np.log(s)), np.zeros(k)])
    s = std * np.sqrt(3) / np.pi if family == "logistic" else std
    return np.array([mean, np.log(s)])


class DensityFit(NamedTuple):
    density: DiscretizedDensity
    initial_nll: float
    final_nll: float
    n_iter: int


def fit_discretized(
    family,
    data,
    support=None,
    n_components: int = 3,
    tol: float = 1e-8,
    max_iter: int = 5000,
    seed: int = 0,
) -> DensityFit:
    if family not in ("logistic", "gaussian", "logistic-mixture"):
        raise ParameterError(f"cannot fit family {family!r}")
    data = np.asarray(data)
    if data.size == 0:
        raise ParameterError("cannot fit a model to empty data")
    if not np.all(data == np.round(data)):
        raise ParameterError("discretized densities need integer data")
    data = data.astype(np.int64).ravel()
    if support is None:
        support = (int(data.min()) - 1, int(data.max()) + 1)
    z_min, z_max = support
    values, counts = np.unique(data, return_counts=True)
    counts = counts.astype(np.float64)
    k = n_components if family == "logistic-mixture" else 1
    theta0 = _init_theta(family, data.astype(np.float64), k, np.random.default_rng(seed))

    def objective(theta):
        return discretized_nll_and_grad(family, theta, values, counts, z_min, z_max, k)

    f0, _ = objective(theta0)
    res = gradient_descent(objective, theta0, tol=tol, max_iter=max_iter)
    loc, log_s, logits = _unpack(family, res.x, k)
    density = DiscretizedDensity(
        family, loc, SCALE_FLOOR + np.exp(log_s), z_min, z_max, softmax(logits)
    )
    return DensityFit(density, f0, res.fun, res.n_iter)


def fit_ml(family: str, data, **kwargs):
    """Fit ``family`` to ``data`` by maximum likelihood.

    ``categorical`` returns a smoothed frequency estimate; density families
    return a :class:`DiscretizedDensity`; ``gated-mixture`` returns a fitted
    :class:`~ncc.prob_models.mixture.GatedMixturePredictor`.
    """
    if family == "categorical":
        num_symbols = kwargs.pop("num_symbols", None)
        if num_symbols is None:
            num_symbols = int(np.max(data)) + 1
        return fit_categorical(data, num_symbols, **kwargs)
    if family == "gated-mixture":
        from .mixture import GatedMixturePredictor

        return GatedMixturePredictor(**kwargs).fit_sequence(data)
    return fit_discretized(family, data, **kwargs).density


class DequantizationGap(NamedTuple):
    noisy_nll: float
    discrete_nll: float
    noisy_stderr: float


def dequantization_gap(density: DiscretizedDensity, data, n_noise: int = 16, rng=None) -> DequantizationGap:
    """Compare the dequantized continuous NLL with the discretized NLL.

    The first is a Monte-Carlo estimate of ``E[-log2 q(x + u)]`` with
    ``u ~ U[-0.5, 0.5)``; the second is exact. The first upper-bounds the second.
    """
    rng = np.random.default_rng(rng)
    x = np.asarray(data, dtype=np.float64).ravel()
    u = rng.uniform(-0.5, 0.5, size=(n_noise, x.size))
    with np.errstate(divide="ignore"):
        terms = -np.log2(density.pdf(x[None, :] + u))
    per_item = terms.mean(0)
    noisy = float(per_item.mean())
    stderr = float(per_item.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0
    return DequantizationGap(noisy, density.nll(x.astype(np.int64)), stderr)


__all__ = [
    "DensityFit",
    "DequantizationGap",
    "SCALE_FLOOR",
    "dequantization_gap",
    "discretized_nll_and_grad",
    "fit_categorical",
    "fit_discretized",
    "fit_ml",
]
