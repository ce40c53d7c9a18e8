"""Huffman symbol code."""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Sequence

from ..errors import TruncatedStreamError
from .bits import BitVector
from .pmf import QuantizedPmf


@dataclass(frozen=True)
class HuffmanNode:
    weight: int
    symbol: int | None = None
    left: "HuffmanNode | None" = None
    right: "HuffmanNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.symbol is not None


class HuffmanTree:
    """Prefix code built by repeatedly merging the two lightest nodes.

    Ties are broken by the smallest symbol index contained in each subtree.
    A one-symbol alphabet gets the codeword ``0``.
    """

    def __init__(self, root: HuffmanNode, num_symbols: int):
        self.root = root
        self.num_symbols = num_symbols
        self.codewords: list[str] = [""] * num_symbols
        if root.is_leaf:
            self.codewords[root.symbol] = "0"
        else:
            stack = [(root, "")]
            while stack:
                node, prefix = stack.pop()
                if node.is_leaf:
                    self.codewords[node.symbol] = prefix
                else:
                    stack.append((node.right, prefix + "1"))
                    stack.append((node.left, prefix + "0"))
        self._decode_table = {
            (len(c), int(c, 2)): s for s, c in enumerate(self.codewords)
        }
        self._max_len = max(len(c) for c in self.codewords)

    @property
    def lengths(self) -> list[int]:
        return [len(c) for c in self.codewords]

    def kraft_sum(self) -> float:
        return sum(2.0 ** -len(c) for c in self.codewords)

    def expected_length(self, probs: Sequence[float]) -> float:
        return float(sum(p * len(c) for p, c in zip(probs, self.codewords)))


def build_huffman(pmf: QuantizedPmf) -> HuffmanTree:
    heap = [(f, s, HuffmanNode(f, symbol=s)) for s, f in enumerate(pmf.freqs)]
    heapq.heapify(heap)
    while len(heap) > 1:
        w1, k1, a = heapq.heappop(heap)
        w2, k2, b = heapq.heappop(heap)
        heapq.heappush(heap, (w1 + w2, min(k1, k2), HuffmanNode(w1 + w2, left=a, right=b)))
    return HuffmanTree(heap[0][2], pmf.num_symbols)


def huffman_encode(tree: HuffmanTree, message: Sequence[int]) -> BitVector:
    table = tree.codewords
    try:
        s = "".join([table[x] for x in message])
    except (IndexError, TypeError) as exc:
        raise ValueError("symbol outside the alphabet") from exc
    out = BitVector()
    out._bits = bytearray(s.encode("ascii").translate(_ASCII_TO_BIT))
    return out


_ASCII_TO_BIT = bytes.maketrans(b"01", b"\x00\x01")


def huffman_decode(tree: HuffmanTree, bits: BitVector, n_symbols: int) -> list[int]:
    table = tree._decode_table
    max_len = tree._max_len
    data = bits._bits
    n = len(data)
    out = []
    pos = 0
    for _ in range(n_symbols):
        code = 0
        length = 0
        while True:
            if pos >= n:
                raise TruncatedStreamError("bits exhausted mid-symbol")
            code = (code << 1) | data[pos]
            pos += 1
            length += 1
            sym = table.get((length, code))
            if sym is not None:
                out.append(sym)
                break
            if length > max_len:  # pragma: no cover - prefix code is complete
                raise TruncatedStreamError("invalid codeword")
    return out
