"""Bit I/O and the three entropy coders: Huffman, arithmetic coding, rANS."""
from .arithmetic import (
    ArithmeticDecoder,
    ArithmeticEncoder,
    ac_decode,
    ac_encode,
    exact_code,
    exact_interval,
)
from .bits import BitReader, BitVector
from .huffman import HuffmanTree, build_huffman, huffman_decode, huffman_encode
from .pmf import QuantizedPmf, message_information, quantize_pmf, uniform_pmf
from .rans import (
    RANS_L,
    RansState,
    rans_decode,
    rans_decode_as_sample,
    rans_encode,
    rans_pop,
    rans_push,
)

__all__ = [
    "ArithmeticDecoder",
    "ArithmeticEncoder",
    "BitReader",
    "BitVector",
    "HuffmanTree",
    "QuantizedPmf",
    "RANS_L",
    "RansState",
    "ac_decode",
    "ac_encode",
    "build_huffman",
    "exact_code",
    "exact_interval",
    "huffman_decode",
    "huffman_encode",
    "message_information",
    "quantize_pmf",
    "rans_decode",
    "rans_decode_as_sample",
    "rans_encode",
    "rans_pop",
    "rans_push",
    "uniform_pmf",
]
