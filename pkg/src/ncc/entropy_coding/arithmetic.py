"""Arithmetic coding: a queue-ordered streaming code.

The integer coder keeps 32-bit ``low``/``high`` registers, resolves carries
by counting pending (straddle) bits and terminates with two disambiguating
bits. The message length travels out of band.
"""
from __future__ import annotations

from fractions import Fraction
from math import ceil, log2
from typing import Sequence, Union

from .bits import BitVector
from .pmf import QuantizedPmf

STATE_BITS = 32
FULL = (1 << STATE_BITS) - 1
HALF = 1 << (STATE_BITS - 1)
QUARTER = 1 << (STATE_BITS - 2)
THREE_QUARTERS = 3 * QUARTER

# Termination emits 2 bits; range rounding adds well under one more bit for
# messages of practical length at precision <= 16.
FLUSH_BITS = 2

Model = Union[QuantizedPmf, Sequence[QuantizedPmf]]


class ArithmeticEncoder:
    def __init__(self):
        self.low = 0
        self.high = FULL
        self.pending_bits = 0
        self._out = bytearray()
        self._finished = False

    def encode(self, symbol: int, pmf: QuantizedPmf) -> None:
        low, high = self.low, self.high
        rng = high - low + 1
        n = pmf.precision
        cdf = pmf.cdf
        high = low + ((rng * cdf[symbol + 1]) >> n) - 1
        low = low + ((rng * cdf[symbol]) >> n)
        out = self._out
        pending = self.pending_bits
        while True:
            if high < HALF:
                out.append(0)
                if pending:
                    out.extend(b"\x01" * pending)
                    pending = 0
            elif low >= HALF:
                out.append(1)
                if pending:
                    out.extend(b"\x00" * pending)
                    pending = 0
                low -= HALF
                high -= HALF
            elif low >= QUARTER and high < THREE_QUARTERS:
                pending += 1
                low -= QUARTER
                high -= QUARTER
            else:
                break
            low <<= 1
            high = (high << 1) | 1
        self.low, self.high, self.pending_bits = low, high, pending

    def finish(self) -> BitVector:
        if not self._finished:
            self.pending_bits += 1
            if self.low < QUARTER:
                self._out.append(0)
                self._out.extend(b"\x01" * self.pending_bits)
            else:
                self._out.append(1)
                self._out.extend(b"\x00" * self.pending_bits)
            self._finished = True
        bits = BitVector()
        bits._bits = bytearray(self._out)
        return bits


class ArithmeticDecoder:
    """Reads past the end of the stream as zeros, matching the termination."""

    def __init__(self, bits: BitVector):
        self._data = bits._bits
        self._pos = 0
        self.low = 0
        self.high = FULL
        value = 0
        for _ in range(STATE_BITS):
            value = (value << 1) | self._next_bit()
        self.value = value

    def _next_bit(self) -> int:
        pos = self._pos
        self._pos = pos + 1
        if pos < len(self._data):
            return self._data[pos]
        return 0

    def decode(self, pmf: QuantizedPmf) -> int:
        low, high, value = self.low, self.high, self.value
        rng = high - low + 1
        n = pmf.precision
        cdf = pmf.cdf
        # largest slot s with low + floor(rng*cdf[s] / 2^n) <= value
        slot = (((value - low + 1) << n) - 1) // rng
        symbol = pmf.symbol_for_slot(slot)
        high = low + ((rng * cdf[symbol + 1]) >> n) - 1
        low = low + ((rng * cdf[symbol]) >> n)
        data = self._data
        ndata = len(data)
        pos = self._pos
        while True:
            if high < HALF:
                pass
            elif low >= HALF:
                low -= HALF
                high -= HALF
                value -= HALF
            elif low >= QUARTER and high < THREE_QUARTERS:
                low -= QUARTER
                high -= QUARTER
                value -= QUARTER
            else:
                break
            low <<= 1
            high = (high << 1) | 1
            value = (value << 1) | (data[pos] if pos < ndata else 0)
            pos += 1
        self._pos = pos
        self.low, self.high, self.value = low, high, value
        return symbol


def _per_step(model: Model, n: int):
    if isinstance(model, QuantizedPmf):
        return [model] * n
    pmfs = list(model)
    if len(pmfs) != n:
        raise ValueError(f"model provides {len(pmfs)} PMFs for a message of length {n}")
    return pmfs


def ac_encode(model: Model, message: Sequence[int]) -> BitVector:
    """Encode ``message``; ``model`` is one static PMF or one PMF per position."""
    pmfs = _per_step(model, len(message))
    enc = ArithmeticEncoder()
    for pmf, x in zip(pmfs, message):
        if not 0 <= x < pmf.num_symbols:
            raise ValueError(f"symbol {x} outside the alphabet")
        enc.encode(x, pmf)
    return enc.finish()


def ac_decode(model: Model, bits: BitVector, n_symbols: int | None = None) -> list[int]:
    if isinstance(model, QuantizedPmf):
        if n_symbols is None:
            raise ValueError("a static model needs n_symbols")
        pmfs = [model] * n_symbols
    else:
        pmfs = list(model)
        if n_symbols is not None and n_symbols != len(pmfs):
            raise ValueError("model/message length mismatch")
    dec = ArithmeticDecoder(bits)
    return [dec.decode(p) for p in pmfs]


def exact_interval(probs: Sequence, message: Sequence[int]) -> tuple[Fraction, Fraction]:
    """Final subinterval of [0, 1) for ``message`` using exact rationals."""
    ps = [Fraction(p) for p in probs]
    cum = [Fraction(0)]
    for p in ps:
        cum.append(cum[-1] + p)
    low, width = Fraction(0), Fraction(1)
    for x in message:
        low += width * cum[x]
        width *= ps[x]
    return low, low + width


def exact_code(probs: Sequence, message: Sequence[int]) -> BitVector:
    """Shortest bit string whose dyadic interval lies inside the message interval.

    Any continuation of such a string still decodes to the same message.
    """
    low, high = exact_interval(probs, message)
    k = max(0, ceil(-log2(high - low)))
    while True:
        scale = 1 << k
        c = ceil(low * scale)
        if Fraction(c + 1, scale) <= high:
            return BitVector.from_int(c, k) if k else BitVector()
        k += 1
