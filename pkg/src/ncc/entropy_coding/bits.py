"""Bit-level containers."""
from __future__ import annotations

from typing import Iterable, Iterator

import numpy as np


class BitVector:
    """Ordered sequence of bits, one byte of storage per bit.

    The storage is a ``bytearray`` holding 0/1 values so appends and slicing
    stay cheap; packing to real bytes happens only at the I/O boundary.
    """

    __slots__ = ("_bits",)

    def __init__(self, bits: Iterable[int] = ()):
        self._bits = bytearray(bits)
        if self._bits and max(self._bits) > 1:
            raise ValueError("bits must be 0 or 1")

    @classmethod
    def from_string(cls, s: str) -> "BitVector":
        return cls(int(c) for c in s)

    @classmethod
    def from_int(cls, value: int, width: int) -> "BitVector":
        if value < 0 or value >> width:
            raise ValueError(f"{value} does not fit in {width} bits")
        return cls((value >> (width - 1 - i)) & 1 for i in range(width))

    @classmethod
    def from_bytes(cls, data: bytes, nbits: int | None = None) -> "BitVector":
        arr = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
        if nbits is not None:
            if nbits > arr.size:
                raise ValueError("nbits exceeds available data")
            arr = arr[:nbits]
        out = cls()
        out._bits = bytearray(arr.tobytes())
        return out

    def to_bytes(self) -> bytes:
        """Pack MSB-first; the final byte is zero padded."""
        if not self._bits:
            return b""
        return np.packbits(np.frombuffer(bytes(self._bits), dtype=np.uint8)).tobytes()

    def to_int(self) -> int:
        v = 0
        for b in self._bits:
            v = (v << 1) | b
        return v

    def append(self, bit: int) -> None:
        self._bits.append(bit)

    def extend(self, bits: Iterable[int]) -> None:
        if isinstance(bits, BitVector):
            self._bits.extend(bits._bits)
        else:
            self._bits.extend(bits)

    def __len__(self) -> int:
        return len(self._bits)

    def __iter__(self) -> Iterator[int]:
        return iter(self._bits)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            out = BitVector()
            out._bits = self._bits[idx]
            return out
        return self._bits[idx]

    def __add__(self, other: "BitVector") -> "BitVector":
        out = BitVector()
        out._bits = self._bits + other._bits
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitVector):
            return NotImplemented
        return self._bits == other._bits

    def __hash__(self):
        return hash(bytes(self._bits))

    def __repr__(self) -> str:
        s = "".join(map(str, self._bits[:64]))
        return f"BitVector('{s}{'...' if len(self) > 64 else ''}', len={len(self)})"

    def __str__(self) -> str:
        return "".join(map(str, self._bits))


class BitReader:
    """Sequential reader over a BitVector."""

    def __init__(self, bits: BitVector, pad_with_zeros: bool = False):
        self._bits = bits._bits
        self.pos = 0
        self.pad = pad_with_zeros

    def read(self) -> int:
        if self.pos < len(self._bits):
            b = self._bits[self.pos]
            self.pos += 1
            return b
        if self.pad:
            self.pos += 1
            return 0
        from ..errors import TruncatedStreamError

        raise TruncatedStreamError("bit stream exhausted")

    def read_int(self, width: int) -> int:
        v = 0
        for _ in range(width):
            v = (v << 1) | self.read()
        return v

    @property
    def remaining(self) -> int:
        return max(0, len(self._bits) - self.pos)
