"""Byte-stream codecs behind the CLI, each producing a self-contained container.

Lossless codecs work on bytes (alphabet 256). Static-model codecs embed the
real-valued model in the container and quantize it identically on both sides;
``ctx-rans`` adapts as it goes and only stores its configuration.
"""
from __future__ import annotations

import struct

import numpy as np

from .container import Container
from .entropy_coding import (
    ArithmeticDecoder,
    BitVector,
    RansState,
    ac_encode,
    build_huffman,
    huffman_decode,
    huffman_encode,
    quantize_pmf,
    rans_encode,
)
from .errors import FormatError, InitialBitsExhaustedError, ParameterError
from .latent_coding import (
    DEFAULT_PREAMBLE_WORDS,
    ToyLatentModel,
    bitsback_decode,
    bitsback_encode,
    fit_latent_mixture,
    preamble,
)
from .prob_models.context import ContextModel
from .prob_models.fitting import fit_categorical

ALPHABET = 256
PRECISION = 16
LOSSLESS = ("huffman", "arith", "rans", "ctx-rans", "bitsback")
MODEL_FAMILIES = ("categorical", "context", "latent")
NUM_LATENTS = 4
CONTEXT_ORDER = 1
CONTEXT_ALPHA = 0.5

_CAT = struct.Struct("<4sH")
_CAT_MAGIC = b"NCAT"
_LEN = struct.Struct("<Q")
_BB = struct.Struct("<QQI")  # n items, preamble seed, preamble words


def _symbols(data: bytes) -> list[int]:
    return list(bytes(data))


# models


def categorical_blob(probs) -> bytes:
    probs = np.asarray(probs, dtype="<f8")
    return _CAT.pack(_CAT_MAGIC, probs.size) + probs.tobytes()


def parse_categorical(blob: bytes) -> np.ndarray:
    if len(blob) < _CAT.size:
        raise FormatError("truncated categorical model")
    magic, n = _CAT.unpack_from(blob)
    if magic != _CAT_MAGIC or len(blob) != _CAT.size + 8 * n or n != ALPHABET:
        raise FormatError("bad categorical model")
    probs = np.frombuffer(blob, dtype="<f8", offset=_CAT.size).astype(np.float64)
    if not np.all(np.isfinite(probs)) or np.any(probs < 0) or probs.sum() <= 0:
        raise FormatError("categorical model is not a distribution")
    return probs


def fit_model(data: bytes, family: str = "categorical", seed: int = 0) -> bytes:
    """Serialized model for ``data``; byte-identical for identical inputs and seed."""
    xs = np.frombuffer(bytes(data), dtype=np.uint8)
    if family == "categorical":
        if xs.size == 0:
            raise ParameterError("cannot fit a model to empty data")
        return categorical_blob(fit_categorical(xs, ALPHABET, alpha=0.0).probs)
    if family == "context":
        return ContextModel(ALPHABET, CONTEXT_ORDER, CONTEXT_ALPHA, PRECISION).config_bytes()
    if family == "latent":
        if xs.size == 0:
            raise ParameterError("cannot fit a model to empty data")
        return fit_latent_mixture(xs, NUM_LATENTS, ALPHABET, seed=seed).to_bytes()
    raise ParameterError(f"unknown model family {family!r}; choose from {MODEL_FAMILIES}")


def _static_pmf(model_blob: bytes):
    return quantize_pmf(parse_categorical(model_blob), PRECISION)


def _own_model(data: bytes, family: str, seed: int) -> bytes:
    # empty inputs get a flat model so every path handles them
    if len(data) == 0 and family == "categorical":
        return categorical_blob(np.full(ALPHABET, 1.0 / ALPHABET))
    if len(data) == 0 and family == "latent":
        flat = np.full(ALPHABET, 1.0 / ALPHABET)
        return ToyLatentModel(np.full(NUM_LATENTS, 1.0 / NUM_LATENTS), np.tile(flat, (NUM_LATENTS, 1))).to_bytes()
    return fit_model(data, family, seed)


# lossless codecs


def _ctx_pmfs(model: ContextModel, msg: list[int]):
    order = model.order
    for i, x in enumerate(msg):
        ctx = model.context_of(msg[max(0, i - order) : i])
        yield ctx, model.predict(ctx)
        model.update(ctx, x)


def compress_bytes(data: bytes, codec: str, model: bytes | None = None, seed: int = 0) -> Container:
    msg = _symbols(data)
    n = len(msg)
    if codec in ("huffman", "arith", "rans"):
        model = model if model is not None else _own_model(data, "categorical", seed)
        pmf = _static_pmf(model)
        if codec == "huffman":
            body = huffman_encode(build_huffman(pmf), msg).to_bytes()
        elif codec == "arith":
            body = ac_encode(pmf, msg).to_bytes()
        else:
            body = rans_encode(pmf, msg).to_bytes()
        return Container(codec, model, _LEN.pack(n) + body)
    if codec == "ctx-rans":
        model = model if model is not None else fit_model(data, "context")
        cm = ContextModel.from_config_bytes(model)
        pmfs = [p for _, p in _ctx_pmfs(cm, msg)]
        return Container(codec, model, _LEN.pack(n) + rans_encode(pmfs, msg).to_bytes())
    if codec == "bitsback":
        model = model if model is not None else _own_model(data, "latent", seed)
        lm = ToyLatentModel.from_bytes(model)
        words = DEFAULT_PREAMBLE_WORDS
        while True:
            try:
                code = bitsback_encode(lm, msg, seed=seed, preamble_words=words)
                break
            except InitialBitsExhaustedError:
                # the preamble is charged to the output, so grow it only as needed
                words *= 2
        return Container(codec, model, _BB.pack(n, seed, words) + code.state.to_bytes())
    raise ParameterError(f"unknown lossless codec {codec!r}")


def decompress_bytes(container: Container) -> bytes:
    codec, model, payload = container.codec, container.model, container.payload
    if codec in ("huffman", "arith", "rans", "ctx-rans"):
        if len(payload) < _LEN.size:
            raise FormatError("payload too short")
        (n,) = _LEN.unpack_from(payload)
        body = payload[_LEN.size :]
    if codec in ("huffman", "arith", "rans"):
        pmf = _static_pmf(model)
        if codec == "huffman":
            if n > 8 * len(body):
                raise FormatError("symbol count exceeds the payload")
            msg = huffman_decode(build_huffman(pmf), BitVector.from_bytes(body), n)
        elif codec == "arith":
            dec = ArithmeticDecoder(BitVector.from_bytes(body))
            msg = [dec.decode(pmf) for _ in range(n)]
        else:
            state = RansState.from_bytes(body)
            msg = [state.pop(pmf) for _ in range(n)]
            _check_drained(state)
        return bytes(msg)
    if codec == "ctx-rans":
        cm = ContextModel.from_config_bytes(model)
        state = RansState.from_bytes(body)
        msg: list[int] = []
        order = cm.order
        for i in range(n):
            ctx = cm.context_of(msg[max(0, i - order) : i])
            x = state.pop(cm.predict(ctx))
            cm.update(ctx, x)
            msg.append(x)
        _check_drained(state)
        return bytes(msg)
    if codec == "bitsback":
        if len(payload) < _BB.size:
            raise FormatError("payload too short")
        n, seed, words = _BB.unpack_from(payload)
        lm = ToyLatentModel.from_bytes(model)
        state = RansState.from_bytes(payload[_BB.size :])
        msg, rest = bitsback_decode(lm, state, n)
        if rest != preamble(seed, words):
            raise FormatError("initial bits not recovered")
        return bytes(msg)
    raise ParameterError(f"{codec!r} is not a lossless byte codec")


def _check_drained(state: RansState) -> None:
    if state != RansState():
        raise FormatError("trailing data after the last symbol")
