"""Adaptive order-k context models (chain rule with a Markov window)."""
from __future__ import annotations

import struct
from typing import Sequence

import numpy as np

from ..entropy_coding.pmf import QuantizedPmf, quantize_pmf
from ..errors import FormatError, ParameterError

_BLOB = struct.Struct("<2sBBIdB")
_MAGIC = b"CM"


class ContextModel:
    """Counts per length-``order`` context, with additive smoothing ``alpha``.

    Contexts shorter than ``order`` are left-padded with a reserved start
    symbol (``num_symbols``). Encoder and decoder stay synchronized as long
    as they call :meth:`update` in the same order.
    """

    def __init__(self, num_symbols: int, order: int = 1, alpha: float = 0.1, precision: int = 16):
        if num_symbols < 1:
            raise ParameterError("num_symbols must be >= 1")
        if order < 0:
            raise ParameterError("order must be >= 0")
        if alpha <= 0:
            raise ParameterError("alpha must be positive")
        self.num_symbols = num_symbols
        self.order = order
        self.alpha = float(alpha)
        self.precision = precision
        self.start_symbol = num_symbols
        self.counts: dict[tuple, np.ndarray] = {}
        self._cache: dict[tuple, QuantizedPmf] = {}

    def context_of(self, history: Sequence[int]) -> tuple:
        if self.order == 0:
            return ()
        tail = tuple(history[-self.order :]) if len(history) else ()
        pad = self.order - len(tail)
        return (self.start_symbol,) * pad + tail

    def probs(self, context: tuple) -> np.ndarray:
        c = self.counts.get(tuple(context))
        if c is None:
            return np.full(self.num_symbols, 1.0 / self.num_symbols)
        s = c + self.alpha
        return s / s.sum()

    def predict(self, context: tuple) -> QuantizedPmf:
        context = tuple(context)
        pmf = self._cache.get(context)
        if pmf is None:
            pmf = quantize_pmf(self.probs(context), self.precision)
            self._cache[context] = pmf
        return pmf

    def update(self, context: tuple, symbol: int) -> None:
        context = tuple(context)
        c = self.counts.get(context)
        if c is None:
            c = self.counts[context] = np.zeros(self.num_symbols)
        c[symbol] += 1
        self._cache.pop(context, None)

    def sequence_information(self, message: Sequence[int], adapt: bool = True) -> float:
        """``-log2`` of the joint probability, accumulated over the chain rule."""
        bits = 0.0
        for i, x in enumerate(message):
            ctx = self.context_of(message[:i])
            bits -= float(np.log2(self.predict(ctx).prob(x)))
            if adapt:
                self.update(ctx, x)
        return bits

    def config_bytes(self) -> bytes:
        return _BLOB.pack(_MAGIC, 1, self.order, self.num_symbols, self.alpha, self.precision)

    @classmethod
    def from_config_bytes(cls, blob: bytes) -> "ContextModel":
        if len(blob) != _BLOB.size:
            raise FormatError("bad context model blob")
        magic, version, order, m, alpha, precision = _BLOB.unpack(blob)
        if magic != _MAGIC or version != 1:
            raise FormatError("bad context model blob")
        return cls(m, order, alpha, precision)


def context_predict(model: ContextModel, context) -> QuantizedPmf:
    return model.predict(context)


def context_update(model: ContextModel, context, symbol: int) -> None:
    model.update(context, symbol)
