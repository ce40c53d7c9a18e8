"""Two-part and bits-back coding over small latent-variable models.

Every model here exposes real-valued conditionals (``prior_probs``,
``likelihood_probs(z)``, ``posterior_probs(x)``) for exact accounting and
16-bit quantized versions of the same for the rANS coder.
"""
from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from ._validation import check_positive
from .entropy_coding.pmf import QuantizedPmf, quantize_pmf
from .entropy_coding.rans import RansState
from .errors import (
    FormatError,
    InitialBitsExhaustedError,
    InvalidDistributionError,
    ParameterError,
    StreamExhaustedError,
    UnencodableError,
)
from .prob_models.densities import DiscretizedDensity

PRECISION = 16
DEFAULT_PREAMBLE_WORDS = 4


class LatentModel:
    """Shared quantization/caching for latent-variable models."""

    precision = PRECISION

    def prior_probs(self) -> np.ndarray:
        raise NotImplementedError

    def likelihood_probs(self, z: int) -> np.ndarray:
        raise NotImplementedError

    def posterior_probs(self, x: int) -> np.ndarray:
        raise NotImplementedError

    def x_symbol(self, x: int) -> int:
        return int(x)

    def x_value(self, symbol: int) -> int:
        return int(symbol)

    def _cache(self) -> dict:
        return self.__dict__.setdefault("_pmf_cache", {})

    def _quantized(self, key, probs_fn, arg=None) -> QuantizedPmf:
        cache = self._cache()
        k = (key, arg)
        if k not in cache:
            cache[k] = quantize_pmf(probs_fn() if arg is None else probs_fn(arg), self.precision)
        return cache[k]

    def prior_pmf(self) -> QuantizedPmf:
        return self._quantized("prior", self.prior_probs)

    def likelihood_pmf(self, z: int) -> QuantizedPmf:
        return self._quantized("lik", self.likelihood_probs, int(z))

    def posterior_pmf(self, x: int) -> QuantizedPmf:
        return self._quantized("post", self.posterior_probs, int(x))


def _normalized_rows(a, name):
    a = np.asarray(a, dtype=np.float64)
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise InvalidDistributionError(f"{name} must be finite and nonnegative")
    s = a.sum(-1)
    if np.any(np.abs(s - 1.0) > 1e-9):
        raise InvalidDistributionError(f"{name} rows must sum to 1")
    return a


class ToyLatentModel(LatentModel):
    """Enumerable model with a latent alphabet of size Z and data alphabet of size X.

    ``likelihood[z, x] = p(x | z)`` and ``posterior[x, z] = q(z | x)``; the
    posterior defaults to the exact one.
    """

    _MAGIC = b"TL"

    def __init__(self, prior, likelihood, posterior=None):
        self.prior = _normalized_rows(prior, "prior")
        self.likelihood = _normalized_rows(likelihood, "likelihood")
        if self.prior.ndim != 1 or self.likelihood.shape[0] != self.prior.size:
            raise ParameterError("likelihood must have one row per latent value")
        if posterior is None:
            posterior = self.exact_posterior()
        self.posterior = _normalized_rows(posterior, "posterior")
        if self.posterior.shape != (self.num_symbols, self.num_latents):
            raise ParameterError("posterior must have shape (X, Z)")

    @property
    def num_latents(self) -> int:
        return self.prior.size

    @property
    def num_symbols(self) -> int:
        return self.likelihood.shape[1]

    @classmethod
    def random(cls, num_latents=4, num_symbols=8, rng=None, concentration=1.0) -> "ToyLatentModel":
        rng = np.random.default_rng(rng)
        prior = rng.dirichlet(np.full(num_latents, concentration))
        lik = rng.dirichlet(np.full(num_symbols, concentration), size=num_latents)
        return cls(prior, lik)

    def joint(self) -> np.ndarray:
        """``p(z, x)`` with shape (Z, X)."""
        return self.prior[:, None] * self.likelihood

    def marginal(self) -> np.ndarray:
        return self.joint().sum(0)

    def exact_posterior(self) -> np.ndarray:
        j = self.joint().T
        m = j.sum(1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            post = np.where(m > 0, j / np.where(m > 0, m, 1.0), 1.0 / self.num_latents)
        return post

    def with_posterior(self, posterior) -> "ToyLatentModel":
        return ToyLatentModel(self.prior, self.likelihood, posterior)

    def prior_probs(self):
        return self.prior

    def likelihood_probs(self, z):
        return self.likelihood[z]

    def posterior_probs(self, x):
        return self.posterior[x]

    def sample(self, n: int, rng) -> np.ndarray:
        rng = np.random.default_rng(rng)
        return rng.choice(self.num_symbols, size=n, p=self.marginal())

    def to_bytes(self) -> bytes:
        head = struct.pack("<2sBHH", self._MAGIC, 1, self.num_latents, self.num_symbols)
        body = np.concatenate([self.prior, self.likelihood.ravel(), self.posterior.ravel()])
        return head + body.astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ToyLatentModel":
        size = struct.calcsize("<2sBHH")
        if len(blob) < size:
            raise FormatError("truncated latent model blob")
        magic, version, nz, nx = struct.unpack_from("<2sBHH", blob)
        if magic != cls._MAGIC:
            raise FormatError("not a latent model blob")
        if version > 1:
            raise FormatError(f"latent model version {version} is newer than supported")
        body = np.frombuffer(blob[size:], dtype="<f8").astype(np.float64)
        if body.size != nz + 2 * nz * nx:
            raise FormatError("latent model blob has wrong size")
        prior = body[:nz]
        lik = body[nz : nz + nz * nx].reshape(nz, nx)
        post = body[nz + nz * nx :].reshape(nx, nz)
        try:
            return cls(prior, lik, post)
        except (ParameterError, InvalidDistributionError) as exc:
            raise FormatError(str(exc)) from exc


def fit_latent_mixture(data, num_latents: int, num_symbols: int, n_iter: int = 50, alpha: float = 0.1, seed: int = 0):
    """EM for a mixture of categoricals; returns a model with exact posterior."""
    data = np.asarray(data, dtype=np.int64)
    if data.size == 0:
        raise ParameterError("cannot fit a model to empty data")
    counts = np.bincount(data, minlength=num_symbols).astype(np.float64)
    rng = np.random.default_rng(seed)
    prior = np.full(num_latents, 1.0 / num_latents)
    lik = rng.dirichlet(np.ones(num_symbols) * 5.0, size=num_latents)
    lik = 0.5 * lik + 0.5 * (counts + alpha) / (counts + alpha).sum()
    for _ in range(n_iter):
        j = prior[:, None] * lik
        resp = j / j.sum(0, keepdims=True)
        w = resp * counts
        prior = w.sum(1) + 1e-3
        prior /= prior.sum()
        lik = w + alpha
        lik /= lik.sum(1, keepdims=True)
    return ToyLatentModel(prior, lik)


def _info(p) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return -np.log2(p)


def nelbo(model: LatentModel, x: int) -> float:
    """``E_q[-log2 p(z, x)] - H[q(z|x)]`` in bits; ``inf`` if q covers an impossible z."""
    q = model.posterior_probs(x)
    sym = model.x_symbol(x)
    lik = np.array([model.likelihood_probs(z)[sym] for z in range(q.size)])
    joint = model.prior_probs() * lik
    m = q > 0
    if np.any(joint[m] <= 0):
        return float("inf")
    return float((q[m] * (np.log2(q[m]) - np.log2(joint[m]))).sum())


def two_part_lengths(model: LatentModel, x: int) -> np.ndarray:
    """``-log2 p(z) - log2 p(x|z)`` for every z."""
    sym = model.x_symbol(x)
    prior = model.prior_probs()
    lik = np.array([model.likelihood_probs(z)[sym] for z in range(prior.size)])
    return _info(prior) + _info(lik)


def best_latent(model: LatentModel, x: int) -> int:
    lengths = two_part_lengths(model, x)
    if not np.any(np.isfinite(lengths)):
        raise UnencodableError(f"no latent value can generate {x}")
    return int(np.argmin(lengths))  # first minimum, so ties go to the lowest index


def two_part_encode(model: LatentModel, x: int, state: RansState | None = None):
    """Push x under p(x|z*) then z* under p(z); returns ``(state, z*)``."""
    z = best_latent(model, x)
    state = RansState() if state is None else state
    state.push(model.x_symbol(x), model.likelihood_pmf(z))
    state.push(z, model.prior_pmf())
    return state, z


def two_part_decode(model: LatentModel, state: RansState) -> int:
    z = state.pop(model.prior_pmf())
    return model.x_value(state.pop(model.likelihood_pmf(z)))


@dataclass
class BitsBackLedger:
    """Per-item information contents (bits) of each coding step."""

    prior_bits: list = field(default_factory=list)
    likelihood_bits: list = field(default_factory=list)
    recovered_bits: list = field(default_factory=list)
    aux_bits_consumed: list = field(default_factory=list)

    @property
    def net_bits(self) -> np.ndarray:
        return np.asarray(self.prior_bits) + np.asarray(self.likelihood_bits) - np.asarray(self.recovered_bits)

    def __len__(self):
        return len(self.prior_bits)


@dataclass
class BitsBackCode:
    state: RansState
    initial: RansState
    ledger: BitsBackLedger
    n_items: int

    @property
    def net_bits(self) -> int:
        """Measured stack growth over the initial bits."""
        return self.state.bit_length() - self.initial.bit_length()

    @property
    def total_bits(self) -> int:
        """Everything transmitted, the preamble included."""
        return self.state.serialized_bits()


def preamble(seed: int, words: int = DEFAULT_PREAMBLE_WORDS) -> RansState:
    """Deterministic pseudo-random initial bits shared through the header."""
    return RansState.random(words, np.random.default_rng(seed))


def bitsback_encode(
    model: LatentModel,
    xs: Sequence[int],
    state: RansState | None = None,
    seed: int = 0,
    preamble_words: int = DEFAULT_PREAMBLE_WORDS,
) -> BitsBackCode:
    """Bits-back chain: per item pop z ~ q(z|x), push x | z, push z.

    Decoding pops items in reverse, so the data come back last-first.
    """
    state = preamble(seed, preamble_words) if state is None else state
    initial = state.copy()
    base = initial.bit_length()
    ledger = BitsBackLedger()
    prior = model.prior_pmf()
    for i, x in enumerate(xs):
        q = model.posterior_pmf(x)
        earned = state.bit_length() - base
        try:
            z = state.pop(q)
        except StreamExhaustedError as exc:
            raise InitialBitsExhaustedError(
                f"initial bits ran out at item {i}; supply a longer preamble"
            ) from exc
        lik = model.likelihood_pmf(z)
        state.push(model.x_symbol(x), lik)
        state.push(z, prior)
        rec = q.information(z)
        ledger.recovered_bits.append(rec)
        ledger.aux_bits_consumed.append(max(0.0, rec - max(earned, 0)))
        ledger.likelihood_bits.append(lik.information(model.x_symbol(x)))
        ledger.prior_bits.append(prior.information(z))
    return BitsBackCode(state, initial, ledger, len(xs))


def bitsback_decode(model: LatentModel, state: RansState, n_items: int) -> tuple[list[int], RansState]:
    """Recover the data (in original order) and the initial bits."""
    prior = model.prior_pmf()
    out = []
    for _ in range(n_items):
        z = state.pop(prior)
        x = model.x_value(state.pop(model.likelihood_pmf(z)))
        state.push(z, model.posterior_pmf(x))
        out.append(x)
    out.reverse()
    return out, state


# continuous latents on a grid


@dataclass(frozen=True)
class LatentGrid:
    """Bins of width ``delta`` tiling ``[lo, lo + n_bins * delta)``."""

    lo: float
    delta: float
    n_bins: int

    @classmethod
    def covering(cls, lo: float, hi: float, delta: float) -> "LatentGrid":
        delta = check_positive(delta, "delta")
        n = max(1, int(np.ceil((hi - lo) / delta - 1e-9)))
        return cls(float(lo), delta, n)

    @property
    def centers(self) -> np.ndarray:
        return self.lo + (np.arange(self.n_bins) + 0.5) * self.delta


def discretize_latent_space(family: str, loc: float, scale: float, grid: LatentGrid, warn: bool = True) -> DiscretizedDensity:
    """Density over latent bins: bin k holds the mass of ``[lo + k delta, lo + (k+1) delta)``.

    Edge bins absorb the tails. Warns when the tails carry noticeable mass
    or the density is much narrower than a bin.
    """
    d = DiscretizedDensity(
        family,
        (loc - grid.lo) / grid.delta - 0.5,
        scale / grid.delta,
        0,
        grid.n_bins - 1,
    )
    if warn and grid.n_bins > 1:
        outside = float(d.cdf(-0.5) + 1.0 - d.cdf(grid.n_bins - 0.5))
        if outside > 1e-3:
            warnings.warn(f"latent grid misses {outside:.2g} of the mass", RuntimeWarning, stacklevel=2)
    return d


class GaussianLatentModel(LatentModel):
    """z ~ N(0, 1) on a grid; x = round(a z + noise) with Gaussian noise of scale ``sigma``.

    The posterior is the Gaussian one of the continuous model, shifted by
    ``posterior_shift`` to allow deliberately mismatched q.
    """

    def __init__(self, a: float, sigma: float, grid: LatentGrid, x_range=(-20, 20), posterior_shift: float = 0.0):
        self.a = float(a)
        self.sigma = check_positive(sigma, "sigma")
        self.grid = grid
        self.x_min, self.x_max = map(int, x_range)
        self.posterior_shift = float(posterior_shift)
        prec = 1.0 + self.a**2 / self.sigma**2
        self.post_scale = 1.0 / np.sqrt(prec)
        self._post_gain = self.a / self.sigma**2 / prec

    def x_symbol(self, x):
        return int(x) - self.x_min

    def x_value(self, symbol):
        return int(symbol) + self.x_min

    def prior_probs(self):
        return discretize_latent_space("gaussian", 0.0, 1.0, self.grid, warn=False).pmf()

    def likelihood_probs(self, z):
        loc = self.a * self.grid.centers[z]
        return DiscretizedDensity("gaussian", loc, self.sigma, self.x_min, self.x_max).pmf()

    def posterior_probs(self, x):
        mean = self._post_gain * x + self.posterior_shift
        return discretize_latent_space("gaussian", mean, self.post_scale, self.grid, warn=False).pmf()

    def sample(self, n: int, rng) -> np.ndarray:
        rng = np.random.default_rng(rng)
        z = rng.standard_normal(n)
        x = np.round(self.a * z + self.sigma * rng.standard_normal(n))
        return np.clip(x, self.x_min, self.x_max).astype(np.int64)


__all__ = [
    "BitsBackCode",
    "BitsBackLedger",
    "GaussianLatentModel",
    "LatentGrid",
    "LatentModel",
    "ToyLatentModel",
    "best_latent",
    "bitsback_decode",
    "bitsback_encode",
    "discretize_latent_space",
    "fit_latent_mixture",
    "nelbo",
    "preamble",
    "two_part_decode",
    "two_part_encode",
    "two_part_lengths",
]
