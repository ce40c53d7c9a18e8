"""Decorrelate, quantize, entropy-code: fixed DCT, trainable linear and progressive codecs."""
from .dct import blockify, dct8_forward, dct8_inverse, dct_matrix, pad_to_blocks, unblockify, zigzag_order
from .jpegish import (
    COLOR_MATRIX,
    JpegishCodec,
    JpegishImage,
    color_matrix,
    jpegish_decode,
    jpegish_encode,
    parse_header,
    quality_steps,
)
from .linear import (
    LinearTransformCodec,
    Params,
    TrueEval,
    eval_codec_true,
    surrogate_loss,
    train_linear_codec,
)
from .progressive import ProgressiveCoder, progressive_decode, progressive_encode

__all__ = [
    "COLOR_MATRIX",
    "JpegishCodec",
    "JpegishImage",
    "LinearTransformCodec",
    "Params",
    "ProgressiveCoder",
    "TrueEval",
    "blockify",
    "color_matrix",
    "dct8_forward",
    "dct8_inverse",
    "dct_matrix",
    "eval_codec_true",
    "jpegish_decode",
    "jpegish_encode",
    "pad_to_blocks",
    "parse_header",
    "progressive_decode",
    "progressive_encode",
    "quality_steps",
    "surrogate_loss",
    "train_linear_codec",
    "unblockify",
    "zigzag_order",
]
