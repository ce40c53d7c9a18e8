"""Discrete models induced by continuous densities via CDF differences."""
from __future__ import annotations

import struct
from functools import cached_property

import numpy as np
from scipy.special import expit, ndtr

from ..entropy_coding.pmf import QuantizedPmf, quantize_pmf
from ..errors import FormatError, ParameterError

FAMILIES = ("logistic", "gaussian", "logistic-mixture", "uniform")
_FAMILY_TAG = {name: i for i, name in enumerate(FAMILIES)}
_BLOB_MAGIC = b"DD"
_BLOB_VERSION = 1

_SQRT_2PI = np.sqrt(2.0 * np.pi)


def std_cdf(family: str, t):
    """CDF of the standardized member of ``family`` (uniform lives on [-1, 1])."""
    if family == "gaussian":
        return ndtr(t)
    if family == "uniform":
        return np.clip((np.asarray(t, dtype=np.float64) + 1.0) / 2.0, 0.0, 1.0)
    return expit(t)


def std_pdf(family: str, t):
    t = np.asarray(t, dtype=np.float64)
    if family == "gaussian":
        return np.exp(-0.5 * t * t) / _SQRT_2PI
    if family == "uniform":
        return np.where(np.abs(t) <= 1.0, 0.5, 0.0)
    s = expit(t)
    return s * (1.0 - s)


def _base(family: str) -> str:
    return "logistic" if family == "logistic-mixture" else family


def interval_mass(family, lo, hi, loc, scale):
    """Probability of ``[lo, hi)`` under a location-scale member of ``family``.

    Evaluated in whichever tail keeps both CDF values small, so tiny masses
    far from the location do not cancel to zero.
    """
    base = _base(family)
    a = (np.asarray(lo, dtype=np.float64) - loc) / scale
    b = (np.asarray(hi, dtype=np.float64) - loc) / scale
    if base == "uniform":
        return std_cdf(base, b) - std_cdf(base, a)
    with np.errstate(invalid="ignore"):
        upper = (a + b) > 0  # nan for the whole line, which takes the direct branch
        direct = std_cdf(base, b) - std_cdf(base, a)
        mirrored = std_cdf(base, -a) - std_cdf(base, -b)
    return np.where(upper, mirrored, direct)


def bin_mass_grads(family, x, loc, scale, lower_open=None, upper_open=None):
    """Mass of the unit bin around ``x`` and its derivatives.

    Returns ``(Q, dQ/dloc, dQ/dlog_scale)``; open bins extend to -inf/+inf.
    """
    base = _base(family)
    x = np.asarray(x, dtype=np.float64)
    lo = x - 0.5
    hi = x + 0.5
    if lower_open is not None:
        lo = np.where(lower_open, -np.inf, lo)
    if upper_open is not None:
        hi = np.where(upper_open, np.inf, hi)
    q = interval_mass(base, lo, hi, loc, scale)
    with np.errstate(invalid="ignore"):
        a = (lo - loc) / scale
        b = (hi - loc) / scale
        fa = np.where(np.isfinite(a), std_pdf(base, np.where(np.isfinite(a), a, 0.0)), 0.0)
        fb = np.where(np.isfinite(b), std_pdf(base, np.where(np.isfinite(b), b, 0.0)), 0.0)
        afa = np.where(np.isfinite(a), a * fa, 0.0)
        bfb = np.where(np.isfinite(b), b * fb, 0.0)
    dloc = -(fb - fa) / scale
    dlogs = -(bfb - afa)
    return q, dloc, dlogs


class DiscretizedDensity:
    """Integer PMF on ``[z_min, z_max]`` from a continuous density.

    Interior bins hold ``F(x + 0.5) - F(x - 0.5)``; the two edge bins absorb
    the full tails so the PMF sums to one. A one-bin support is a point mass.
    """

    def __init__(self, family, loc, scale, z_min, z_max, weights=None):
        if family not in FAMILIES:
            raise ParameterError(f"unknown family {family!r}")
        loc = np.atleast_1d(np.asarray(loc, dtype=np.float64))
        scale = np.atleast_1d(np.asarray(scale, dtype=np.float64))
        if loc.shape != scale.shape:
            raise ParameterError("loc and scale must have the same length")
        if np.any(~np.isfinite(scale)) or np.any(scale <= 0):
            raise ParameterError("scale must be positive")
        if np.any(~np.isfinite(loc)):
            raise ParameterError("loc must be finite")
        if family != "logistic-mixture" and loc.size != 1:
            raise ParameterError(f"{family} takes a single component")
        if weights is None:
            weights = np.full(loc.size, 1.0 / loc.size)
        weights = np.atleast_1d(np.asarray(weights, dtype=np.float64))
        if weights.shape != loc.shape or np.any(weights < 0) or abs(weights.sum() - 1) > 1e-9:
            raise ParameterError("mixture weights must be a probability vector")
        z_min, z_max = int(z_min), int(z_max)
        if z_min > z_max:
            raise ParameterError("support needs z_min <= z_max")
        self.family = family
        self.loc = loc
        self.scale = scale
        self.weights = weights
        self.z_min = z_min
        self.z_max = z_max

    def __repr__(self):
        return (
            f"DiscretizedDensity({self.family!r}, loc={self.loc.tolist()}, "
            f"scale={self.scale.tolist()}, support=[{self.z_min}, {self.z_max}])"
        )

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.z_min, self.z_max + 1)

    @property
    def size(self) -> int:
        return self.z_max - self.z_min + 1

    # continuous side
    def cdf(self, v):
        base = _base(self.family)
        v = np.asarray(v, dtype=np.float64)[..., None]
        return (self.weights * std_cdf(base, (v - self.loc) / self.scale)).sum(-1)

    def pdf(self, v):
        base = _base(self.family)
        v = np.asarray(v, dtype=np.float64)[..., None]
        return (self.weights * std_pdf(base, (v - self.loc) / self.scale) / self.scale).sum(-1)

    def mass(self, lo, hi):
        lo = np.asarray(lo, dtype=np.float64)[..., None]
        hi = np.asarray(hi, dtype=np.float64)[..., None]
        return (self.weights * interval_mass(self.family, lo, hi, self.loc, self.scale)).sum(-1)

    # discrete side
    @cached_property
    def _pmf(self) -> np.ndarray:
        x = self.support.astype(np.float64)
        lo = np.where(x == self.z_min, -np.inf, x - 0.5)
        hi = np.where(x == self.z_max, np.inf, x + 0.5)
        p = np.maximum(self.mass(lo, hi), 0.0)
        p.setflags(write=False)
        return p

    def pmf(self) -> np.ndarray:
        return self._pmf

    def prob(self, x):
        x = np.asarray(x, dtype=np.int64)
        inside = (x >= self.z_min) & (x <= self.z_max)
        idx = np.clip(x - self.z_min, 0, self.size - 1)
        return np.where(inside, self._pmf[idx], 0.0)

    def nll(self, data) -> float:
        """Mean ``-log2 Q(x)`` over integer data."""
        p = self.prob(data)
        with np.errstate(divide="ignore"):
            return float(-np.log2(p).mean())

    def quantized(self, precision: int = 16) -> QuantizedPmf:
        cache = self.__dict__.setdefault("_qcache", {})
        if precision not in cache:
            cache[precision] = quantize_pmf(self._pmf, precision)
        return cache[precision]

    def symbol(self, x: int) -> int:
        return int(x) - self.z_min

    def value(self, symbol: int) -> int:
        return int(symbol) + self.z_min

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(self.support, size=n, p=self._pmf / self._pmf.sum())

    # serialization
    def to_bytes(self) -> bytes:
        k = self.loc.size
        head = struct.pack(
            "<2sBBBii", _BLOB_MAGIC, _BLOB_VERSION, _FAMILY_TAG[self.family], k, self.z_min, self.z_max
        )
        body = np.concatenate([self.loc, self.scale, self.weights]).astype("<f8").tobytes()
        return head + body

    @classmethod
    def from_bytes(cls, blob: bytes) -> "DiscretizedDensity":
        size = struct.calcsize("<2sBBBii")
        if len(blob) < size:
            raise FormatError("truncated density blob")
        magic, version, tag, k, z_min, z_max = struct.unpack_from("<2sBBBii", blob)
        if magic != _BLOB_MAGIC:
            raise FormatError("not a density blob")
        if version > _BLOB_VERSION:
            raise FormatError(f"density blob version {version} is newer than supported")
        if tag >= len(FAMILIES):
            raise FormatError(f"unknown family tag {tag}")
        body = blob[size:]
        if len(body) != 24 * k:
            raise FormatError("density blob has wrong parameter count")
        params = np.frombuffer(body, dtype="<f8").astype(np.float64)
        loc, scale, weights = params[:k], params[k : 2 * k], params[2 * k :]
        try:
            return cls(FAMILIES[tag], loc, scale, z_min, z_max, weights)
        except ParameterError as exc:
            raise FormatError(str(exc)) from exc

    def __eq__(self, other):
        if not isinstance(other, DiscretizedDensity):
            return NotImplemented
        return self.to_bytes() == other.to_bytes()

    def __hash__(self):
        return hash(self.to_bytes())


def discretize(family, loc, scale, support, weights=None) -> DiscretizedDensity:
    """Build the discretized PMF of a density over ``support = (z_min, z_max)``."""
    z_min, z_max = support
    if z_min >= z_max:
        raise ParameterError("support needs z_min < z_max")
    return DiscretizedDensity(family, loc, scale, z_min, z_max, weights)


def uniform_box(center: int, z_min: int, z_max: int, width: float = 1.0) -> DiscretizedDensity:
    """Uniform density of the given width; width 1 puts all mass on one integer."""
    return DiscretizedDensity("uniform", center, width / 2.0, z_min, z_max)
