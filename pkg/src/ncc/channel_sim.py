"""Reverse channel coding with minimal random coding (MRC).

Encoder and decoder draw the same ``N`` candidates ``z_1..z_N`` from the prior
with a counter-based generator keyed by a shared seed. The encoder picks index
``k`` with probability proportional to ``q(z_k | x) / p(z_k)`` and sends it in
``log2 N`` bits; the decoder regenerates ``z_k``.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy.special import logsumexp

from ._validation import check_positive
from .errors import FormatError, ParameterError, UnencodableError, UnsupportedVersionError

_LN2 = math.log(2.0)
# KL values within this of an integer are treated as that integer before ceil()
_KL_SNAP = 1e-9
MAX_EXPONENT = 30


def candidate_generator(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox) so candidate lists agree bit-for-bit."""
    return np.random.Generator(np.random.Philox(key=int(seed)))


@dataclass(frozen=True)
class Gaussian:
    """Diagonal Gaussian; ``mean`` and ``std`` broadcast to a common shape."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean, std = np.broadcast_arrays(np.atleast_1d(np.asarray(self.mean, float)), np.asarray(self.std, float))
        if np.any(std <= 0) or not np.all(np.isfinite(std)):
            raise ParameterError("std must be positive and finite")
        object.__setattr__(self, "mean", mean.copy())
        object.__setattr__(self, "std", std.copy())

    @property
    def dim(self) -> int:
        return self.mean.size

    def sample(self, rng, n: int) -> np.ndarray:
        return self.mean + self.std * rng.standard_normal((n, self.dim))

    def log_prob(self, z) -> np.ndarray:
        r = (np.asarray(z, float) - self.mean) / self.std
        return (-0.5 * r**2 - np.log(self.std) - 0.5 * math.log(2 * math.pi)).sum(-1)

    def to_bytes(self) -> bytes:
        return struct.pack(f"<BI{2 * self.dim}d", 0, self.dim, *self.mean, *self.std)


@dataclass(frozen=True)
class Discrete:
    """PMF over a finite set of scalar values."""

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, float).ravel()
        probs = np.asarray(self.probs, float).ravel()
        if values.shape != probs.shape or np.any(probs < 0) or not np.isclose(probs.sum(), 1.0):
            raise ParameterError("probs must be a distribution over values")
        if len(np.unique(values)) != len(values):
            raise ParameterError("values must be distinct")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs / probs.sum())

    dim = 1

    def sample(self, rng, n: int) -> np.ndarray:
        # inverse-CDF on uniforms keeps the draw a pure function of the counter stream
        idx = np.searchsorted(np.cumsum(self.probs), rng.random(n), side="right")
        return self.values[np.minimum(idx, len(self.values) - 1)][:, None]

    def log_prob(self, z) -> np.ndarray:
        z = np.asarray(z, float).reshape(-1)
        out = np.full(z.shape, -np.inf)
        order = np.argsort(self.values)
        sv = self.values[order]
        pos = np.clip(np.searchsorted(sv, z), 0, len(sv) - 1)
        hit = sv[pos] == z
        with np.errstate(divide="ignore"):
            out[hit] = np.log(self.probs[order][pos[hit]])
        return out

    def to_bytes(self) -> bytes:
        k = len(self.values)
        return struct.pack(f"<BI{2 * k}d", 1, k, *self.values, *self.probs)


Distribution = Union[Gaussian, Discrete]


def kl_bits(q: Distribution, p: Distribution) -> float:
    """KL(q || p) in bits: closed form for Gaussians, enumeration for PMFs."""
    if isinstance(q, Gaussian) and isinstance(p, Gaussian):
        if q.dim != p.dim:
            raise ParameterError("dimension mismatch")
        nats = np.log(p.std / q.std) + (q.std**2 + (q.mean - p.mean) ** 2) / (2 * p.std**2) - 0.5
        return float(nats.sum() / _LN2)
    if isinstance(q, Discrete) and isinstance(p, Discrete):
        mask = q.probs > 0
        lp = p.log_prob(q.values[mask])
        if np.any(np.isinf(lp)):
            return math.inf
        return float((q.probs[mask] * (np.log(q.probs[mask]) - lp)).sum() / _LN2)
    raise ParameterError("KL needs two Gaussians or two discrete distributions")


def rcc_cost_bound(mutual_information: float) -> float:
    """Upper bound on the average cost of reverse channel coding, in bits."""
    check_positive(mutual_information, "mutual_information", allow_zero=True)
    return mutual_information + math.log2(mutual_information + 1) + 5


@dataclass
class MrcConfig:
    """Shared prior, target (a distribution or a callable ``x -> distribution``), slack and seed."""

    prior: Distribution
    target: Union[Distribution, Callable[..., Distribution]]
    t: int = 8
    seed: int = 0

    def resolve(self, x=None) -> Distribution:
        if callable(self.target) and not isinstance(self.target, (Gaussian, Discrete)):
            return self.target(x)
        return self.target

    def exponent(self, x=None) -> int:
        """``ceil(KL) + t``; the index costs exactly this many bits."""
        if self.t < 0 or int(self.t) != self.t:
            raise ParameterError("t must be a non-negative integer")
        kl = kl_bits(self.resolve(x), self.prior)
        if not math.isfinite(kl):
            raise UnencodableError("target is not absolutely continuous w.r.t. the prior")
        e = max(0, math.ceil(kl - _KL_SNAP)) + int(self.t)
        if e > MAX_EXPONENT:
            raise ParameterError(f"2^{e} candidates is too many")
        return e

    def n_candidates(self, x=None) -> int:
        return 1 << self.exponent(x)


def candidates(prior: Distribution, seed: int, n: int) -> np.ndarray:
    """The first ``n`` prior samples for ``seed``; shape (n, dim)."""
    return prior.sample(candidate_generator(seed), n)


@dataclass(frozen=True)
class MrcPayload:
    """Header fields plus the index; ``index_bits`` equals ``exponent``."""

    seed: int
    t: int
    exponent: int
    index: int

    MAGIC = b"NMRC"
    VERSION = 1
    _HEAD = struct.Struct("<4sBQBB")

    @property
    def n_candidates(self) -> int:
        return 1 << self.exponent

    @property
    def index_bits(self) -> int:
        return self.exponent

    def to_bytes(self) -> bytes:
        nbytes = (self.exponent + 7) // 8
        return self._HEAD.pack(self.MAGIC, self.VERSION, self.seed, self.t, self.exponent) + self.index.to_bytes(
            nbytes, "little"
        )

    @classmethod
    def from_bytes(cls, blob: bytes) -> "MrcPayload":
        if len(blob) < cls._HEAD.size:
            raise FormatError("MRC payload too short")
        magic, version, seed, t, e = cls._HEAD.unpack_from(blob)
        if magic != cls.MAGIC:
            raise FormatError("bad MRC magic")
        if version != cls.VERSION:
            raise UnsupportedVersionError(f"MRC version {version}")
        if e > MAX_EXPONENT:
            raise FormatError("candidate count out of range")
        rest = blob[cls._HEAD.size :]
        if len(rest) != (e + 7) // 8:
            raise FormatError("index length does not match the candidate count")
        k = int.from_bytes(rest, "little")
        if k >= 1 << e:
            raise FormatError("index out of range")
        return cls(seed, t, e, k)


def mrc_weights(config: MrcConfig, x=None) -> tuple[np.ndarray, np.ndarray]:
    """Candidates and normalized importance weights ``q/p``."""
    n = config.n_candidates(x)
    z = candidates(config.prior, config.seed, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        logw = config.resolve(x).log_prob(z) - config.prior.log_prob(z)
    logw = np.where(np.isnan(logw), -np.inf, logw)
    if not np.any(np.isfinite(logw)):
        raise UnencodableError("every candidate has zero target weight")
    return z, np.exp(logw - logsumexp(logw))


def mrc_encode(config: MrcConfig, x=None, rng=None) -> MrcPayload:
    """Pick ``k`` with probability ``w_k / sum w``; ``rng`` is the encoder's private randomness."""
    _, w = mrc_weights(config, x)
    rng = np.random.default_rng(rng)
    k = int(rng.choice(len(w), p=w))
    return MrcPayload(int(config.seed), int(config.t), config.exponent(x), k)


def mrc_decode(prior: Distribution, payload: MrcPayload) -> np.ndarray:
    """Regenerate candidate ``k`` from the shared prior and seed."""
    if not 0 <= payload.index < payload.n_candidates:
        raise IndexError(f"index {payload.index} outside [0, {payload.n_candidates})")
    return candidates(prior, payload.seed, payload.index + 1)[payload.index]
