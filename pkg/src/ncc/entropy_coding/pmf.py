"""Fixed-point probability mass functions shared by every entropy coder."""
from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import InvalidDistributionError

DEFAULT_PRECISION = 12
MAX_PRECISION = 16


@dataclass(frozen=True, eq=False)
class QuantizedPmf:
    """Integer frequencies summing to ``2**precision``.

    Coders only ever see this type, so sender and receiver agree on the
    probabilities bit for bit.
    """

    freqs: tuple[int, ...]
    precision: int = DEFAULT_PRECISION
    cdf: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        freqs = tuple(int(f) for f in self.freqs)
        if not freqs:
            raise InvalidDistributionError("empty alphabet")
        if not 1 <= self.precision <= MAX_PRECISION:
            raise InvalidDistributionError(f"precision must be in [1, {MAX_PRECISION}]")
        if min(freqs) < 1:
            raise InvalidDistributionError("every frequency must be >= 1")
        if sum(freqs) != 1 << self.precision:
            raise InvalidDistributionError(
                f"frequencies sum to {sum(freqs)}, expected {1 << self.precision}"
            )
        cdf = [0]
        for f in freqs:
            cdf.append(cdf[-1] + f)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "cdf", tuple(cdf))

    @property
    def num_symbols(self) -> int:
        return len(self.freqs)

    @property
    def total(self) -> int:
        return 1 << self.precision

    def prob(self, symbol: int) -> float:
        return self.freqs[symbol] / self.total

    def probs(self) -> np.ndarray:
        return np.asarray(self.freqs, dtype=np.float64) / self.total

    def information(self, symbol: int) -> float:
        """Information content ``-log2 P(symbol)`` in bits."""
        return self.precision - float(np.log2(self.freqs[symbol]))

    def symbol_for_slot(self, slot: int) -> int:
        return bisect_right(self.cdf, slot) - 1

    def __eq__(self, other):
        if not isinstance(other, QuantizedPmf):
            return NotImplemented
        return self.freqs == other.freqs and self.precision == other.precision

    def __hash__(self):
        return hash((self.freqs, self.precision))


def quantize_pmf(probs: Sequence[float], precision: int = DEFAULT_PRECISION) -> QuantizedPmf:
    """Round a real-valued PMF to integer frequencies.

    Largest-remainder rounding of ``p * 2**precision``, then every zero is
    raised to 1 by stealing units from the currently largest frequency.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise InvalidDistributionError("probs must be a non-empty vector")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise InvalidDistributionError("probs must be finite and nonnegative")
    s = p.sum()
    if s <= 0:
        raise InvalidDistributionError("all-zero distribution")
    total = 1 << precision
    if p.size > total:
        raise InvalidDistributionError(f"{p.size} symbols do not fit in {precision} bits")

    scaled = p / s * total
    freqs = np.floor(scaled).astype(np.int64)
    short = total - int(freqs.sum())
    if short > 0:
        # stable sort keeps ties in symbol order
        order = np.argsort(-(scaled - freqs), kind="stable")
        freqs[order[:short]] += 1

    zeros = np.flatnonzero(freqs == 0)
    for i in zeros:
        j = int(np.argmax(freqs))
        freqs[j] -= 1
        freqs[i] = 1
    return QuantizedPmf(tuple(int(f) for f in freqs), precision)


def uniform_pmf(num_symbols: int, precision: int = DEFAULT_PRECISION) -> QuantizedPmf:
    return quantize_pmf(np.ones(num_symbols), precision)


def message_information(pmfs, message: Sequence[int]) -> float:
    """``-log2 P(message)`` under a static PMF or a per-position sequence."""
    if isinstance(pmfs, QuantizedPmf):
        counts = np.bincount(np.asarray(message, dtype=np.int64), minlength=pmfs.num_symbols)
        f = np.asarray(pmfs.freqs, dtype=np.float64)
        return float(len(message) * pmfs.precision - counts @ np.log2(f))
    return float(sum(p.information(x) for p, x in zip(pmfs, message)))
