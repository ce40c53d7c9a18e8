"""NCC1 container: one compressed payload plus the model needed to decode it.

Layout (little endian)::

    b"NCC1" | version u8 | codec id u8 | model length u32 | model blob
            | payload length u64 | payload | CRC-32 u32

The CRC covers every preceding byte and is checked before anything else is
interpreted, so any corruption surfaces as :class:`ChecksumError`.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

from .errors import ChecksumError, FormatError, UnsupportedVersionError

MAGIC = b"NCC1"
VERSION = 1
CODECS = {
    "huffman": 1,
    "arith": 2,
    "rans": 3,
    "ctx-rans": 4,
    "bitsback": 5,
    "jpegish": 6,
}
CODEC_NAMES = {v: k for k, v in CODECS.items()}

_HEAD = struct.Struct("<4sBBI")
_PLEN = struct.Struct("<Q")
_CRC = struct.Struct("<I")


@dataclass(frozen=True)
class Container:
    codec: str
    model: bytes
    payload: bytes

    def to_bytes(self) -> bytes:
        if self.codec not in CODECS:
            raise FormatError(f"unknown codec {self.codec!r}")
        body = (
            _HEAD.pack(MAGIC, VERSION, CODECS[self.codec], len(self.model))
            + self.model
            + _PLEN.pack(len(self.payload))
            + self.payload
        )
        return body + _CRC.pack(zlib.crc32(body))

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Container":
        if len(blob) < _HEAD.size + _PLEN.size + _CRC.size:
            raise ChecksumError("container too short to carry a checksum")
        body, (crc,) = blob[: -_CRC.size], _CRC.unpack(blob[-_CRC.size :])
        if zlib.crc32(body) != crc:
            raise ChecksumError("container checksum mismatch")
        magic, version, codec_id, mlen = _HEAD.unpack_from(body)
        if magic != MAGIC:
            raise FormatError("not an NCC1 container")
        if version > VERSION:
            raise UnsupportedVersionError(f"container version {version} is newer than {VERSION}")
        if codec_id not in CODEC_NAMES:
            raise FormatError(f"unknown codec id {codec_id}")
        off = _HEAD.size
        if off + mlen + _PLEN.size > len(body):
            raise FormatError("model blob overruns the container")
        model = body[off : off + mlen]
        off += mlen
        (plen,) = _PLEN.unpack_from(body, off)
        off += _PLEN.size
        if off + plen != len(body):
            raise FormatError("payload length does not match the container size")
        return cls(CODEC_NAMES[codec_id], bytes(model), bytes(body[off:]))
