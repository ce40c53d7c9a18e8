"""Range-variant asymmetric numeral systems: a stack-ordered streaming code.

State lives in ``[L, L * 2**16)`` with ``L = 2**16``; renormalization moves
16-bit words between the state and the stack.
"""
from __future__ import annotations

import struct
from typing import Iterable, Sequence

import numpy as np

from ..errors import FormatError, StreamExhaustedError
from .pmf import QuantizedPmf

WORD_BITS = 16
WORD_MASK = (1 << WORD_BITS) - 1
RANS_L = 1 << 16
STATE_UPPER = RANS_L << WORD_BITS  # exclusive
# Serialized size of the final state, counted once per message.
FLUSH_BITS = 32


class RansState:
    """Mutable coder state: a 32-bit head plus a LIFO stack of 16-bit words."""

    __slots__ = ("state", "stack")

    def __init__(self, state: int = RANS_L, stack: Iterable[int] = ()):
        if not RANS_L <= state < STATE_UPPER:
            raise ValueError("state outside the renormalization interval")
        self.state = state
        self.stack = list(stack)

    @classmethod
    def random(cls, n_words: int, rng: np.random.Generator) -> "RansState":
        """State filled with uniformly random bits (``32 + 16 * n_words`` of them, minus one)."""
        head = int(rng.integers(0, 1 << 31)) | (1 << 31)
        words = rng.integers(0, 1 << WORD_BITS, size=n_words)
        return cls(head, (int(w) for w in words))

    def copy(self) -> "RansState":
        return RansState(self.state, self.stack)

    def bit_length(self) -> int:
        """Exact information measure of the whole stack: words plus significant head bits."""
        return WORD_BITS * len(self.stack) + self.state.bit_length()

    def serialized_bits(self) -> int:
        return WORD_BITS * len(self.stack) + FLUSH_BITS

    def push(self, symbol: int, pmf: QuantizedPmf) -> None:
        f = pmf.freqs[symbol]
        x = self.state
        x_max = ((RANS_L >> pmf.precision) << WORD_BITS) * f
        while x >= x_max:
            self.stack.append(x & WORD_MASK)
            x >>= WORD_BITS
        self.state = ((x // f) << pmf.precision) + (x % f) + pmf.cdf[symbol]

    def pop(self, pmf: QuantizedPmf) -> int:
        n = pmf.precision
        x = self.state
        slot = x & ((1 << n) - 1)
        symbol = pmf.symbol_for_slot(slot)
        x = pmf.freqs[symbol] * (x >> n) + slot - pmf.cdf[symbol]
        stack = self.stack
        while x < RANS_L:
            if not stack:
                raise StreamExhaustedError("rANS stack exhausted")
            x = (x << WORD_BITS) | stack.pop()
        self.state = x
        return symbol

    def peek(self, pmf: QuantizedPmf) -> int:
        return pmf.symbol_for_slot(self.state & ((1 << pmf.precision) - 1))

    def to_bytes(self) -> bytes:
        return struct.pack(f"<I{len(self.stack)}H", self.state, *self.stack)

    @classmethod
    def from_bytes(cls, data: bytes) -> "RansState":
        if len(data) < 4 or len(data) % 2:
            raise FormatError("malformed rANS stream")
        (state,) = struct.unpack_from("<I", data)
        if not RANS_L <= state < STATE_UPPER:
            raise FormatError("rANS head outside the renormalization interval")
        words = struct.unpack_from(f"<{(len(data) - 4) // 2}H", data, 4)
        return cls(state, words)

    def __eq__(self, other):
        if not isinstance(other, RansState):
            return NotImplemented
        return self.state == other.state and self.stack == other.stack

    def __repr__(self):
        return f"RansState(state={self.state:#x}, words={len(self.stack)})"


def rans_push(state: RansState, symbol: int, pmf: QuantizedPmf) -> RansState:
    """Functional push; returns a new state."""
    out = state.copy()
    out.push(symbol, pmf)
    return out


def rans_pop(state: RansState, pmf: QuantizedPmf) -> tuple[int, RansState]:
    out = state.copy()
    symbol = out.pop(pmf)
    return symbol, out


def rans_decode_as_sample(state: RansState, pmf: QuantizedPmf) -> int:
    """Decode one symbol from a state holding random bits, i.e. draw a sample.

    The state is consumed in place.
    """
    return state.pop(pmf)


def _per_step(model, n):
    if isinstance(model, QuantizedPmf):
        return [model] * n
    pmfs = list(model)
    if len(pmfs) != n:
        raise ValueError(f"model provides {len(pmfs)} PMFs for a message of length {n}")
    return pmfs


def rans_encode(model, message: Sequence[int], state: RansState | None = None) -> RansState:
    """Push a message so that popping returns it in the original order."""
    pmfs = _per_step(model, len(message))
    st = RansState() if state is None else state
    stack = st.stack
    x = st.state
    for pmf, s in zip(reversed(pmfs), reversed(list(message))):
        if not 0 <= s < pmf.num_symbols:
            raise ValueError(f"symbol {s} outside the alphabet")
        f = pmf.freqs[s]
        x_max = ((RANS_L >> pmf.precision) << WORD_BITS) * f
        while x >= x_max:
            stack.append(x & WORD_MASK)
            x >>= WORD_BITS
        x = ((x // f) << pmf.precision) + (x % f) + pmf.cdf[s]
    st.state = x
    return st


def rans_decode(model, state: RansState, n_symbols: int | None = None) -> list[int]:
    if isinstance(model, QuantizedPmf):
        if n_symbols is None:
            raise ValueError("a static model needs n_symbols")
        pmfs = [model] * n_symbols
    else:
        pmfs = list(model)
    return [state.pop(p) for p in pmfs]

