"""Categorical distributions and basic information measures (all in bits)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..entropy_coding.pmf import QuantizedPmf, quantize_pmf
from ..errors import InvalidDistributionError


@dataclass(frozen=True, eq=False)
class Categorical:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise InvalidDistributionError("probs must be a non-empty vector")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise InvalidDistributionError("probs must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-9:
            raise InvalidDistributionError(f"probs sum to {p.sum()}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def num_symbols(self) -> int:
        return self.probs.size

    def quantized(self, precision: int = 12) -> QuantizedPmf:
        return quantize_pmf(self.probs, precision)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(self.num_symbols, size=n, p=self.probs)


def _as_probs(p) -> np.ndarray:
    if isinstance(p, Categorical):
        return p.probs
    if isinstance(p, QuantizedPmf):
        return p.probs()
    return np.asarray(p, dtype=np.float64)


def entropy(p) -> float:
    p = _as_probs(p)
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def cross_entropy(p, q) -> float:
    """Average bits to code samples of ``p`` with a code built for ``q``.

    Returns ``inf`` if ``q`` misses part of the support of ``p``.
    """
    p, q = _as_probs(p), _as_probs(q)
    if p.shape != q.shape:
        raise ValueError("alphabet size mismatch")
    m = p > 0
    if np.any(q[m] <= 0):
        return float("inf")
    return float(-(p[m] * np.log2(q[m])).sum())


def kl(p, q) -> float:
    p, q = _as_probs(p), _as_probs(q)
    if p.shape != q.shape:
        raise ValueError("alphabet size mismatch")
    m = p > 0
    if np.any(q[m] <= 0):
        return float("inf")
    return float(max(0.0, (p[m] * (np.log2(p[m]) - np.log2(q[m]))).sum()))


def empirical_entropy(data, num_symbols: int | None = None) -> float:
    counts = np.bincount(np.asarray(data, dtype=np.int64), minlength=num_symbols or 0)
    return entropy(counts / counts.sum())
