"""A JPEG-like image codec: color transform, 8x8 DCT, per-band steps, rANS.

Encoder ``z = round(D A C (x - 128))``; decoder ``x = C^-1 A^T D^-1 z + 128``
followed by clipping and rounding to 8 bits.

Stream layout (little endian)::

    4s   magic b"NJPG"
    B    version (1)
    B    channels (1 or 3)
    B    quality (1..100)
    B    reserved (0)
    I    height
    I    width
    [channels == 3] 9 x (i, i)  color matrix as exact fractions, row major
    per channel, 63 x (h, h, f, f)  AC band models: z_min, z_max, loc, scale
    ...  rANS state (u32 head, u16 words)
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..entropy_coding.pmf import QuantizedPmf, uniform_pmf
from ..entropy_coding.rans import RansState, rans_encode
from ..errors import FormatError, ParameterError, StreamExhaustedError, UnsupportedVersionError
from ..prob_models.context import ContextModel
from ..prob_models.densities import DiscretizedDensity
from ..prob_models.fitting import fit_discretized
from ..quantization import uniform_quantize
from .dct import BLOCK, blockify, dct8_forward, dct8_inverse, pad_to_blocks, unblockify, zigzag_order

MAGIC = b"NJPG"
VERSION = 1
_HEAD = struct.Struct("<4sBBBBII")
_FRAC = struct.Struct("<ii")
_BAND = struct.Struct("<hhff")
PRECISION = 16
DC_CATEGORIES = 16

# ITU T.81 Annex K example tables
LUMA_TABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ]
)
CHROMA_TABLE = np.array(
    [
        [17, 18, 24, 47, 99, 99, 99, 99],
        [18, 21, 26, 66, 99, 99, 99, 99],
        [24, 26, 56, 99, 99, 99, 99, 99],
        [47, 66, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
    ]
)

_L = (Fraction(299, 1000), Fraction(587, 1000), Fraction(114, 1000))
# full-range YCbCr: Cb = (B - Y) / 1.772, Cr = (R - Y) / 1.402
COLOR_MATRIX = (
    _L,
    (-_L[0] / Fraction(1772, 1000), -_L[1] / Fraction(1772, 1000), Fraction(1, 2)),
    (Fraction(1, 2), -_L[1] / Fraction(1402, 1000), -_L[2] / Fraction(1402, 1000)),
)


def color_matrix() -> np.ndarray:
    return np.array([[float(f) for f in row] for row in COLOR_MATRIX])


def quality_steps(quality: int, table=LUMA_TABLE) -> np.ndarray:
    """IJG quality scaling of a base table; quality 100 gives unit steps."""
    if not 1 <= int(quality) <= 100:
        raise ParameterError("quality must be in [1, 100]")
    q = int(quality)
    scale = 5000 // q if q < 50 else 200 - 2 * q
    return np.clip((table * scale + 50) // 100, 1, 255).astype(np.float64)


def _dc_category(d: int) -> int:
    return abs(int(d)).bit_length()


def _dc_extra(d: int, cat: int) -> int:
    return d if d >= 0 else d + (1 << cat) - 1


def _dc_from_extra(v: int, cat: int) -> int:
    return v if v >= (1 << (cat - 1)) else v - (1 << cat) + 1


@dataclass
class JpegishImage:
    """Decoded image plus what the stream said about it."""

    pixels: np.ndarray
    quality: int
    n_bits: int

    @property
    def bits_per_pixel(self) -> float:
        h, w = self.pixels.shape[:2]
        return self.n_bits / (h * w)


def _as_planes(image) -> np.ndarray:
    img = np.asarray(image)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ParameterError("expected a grayscale or RGB image")
    if img.shape[0] == 0 or img.shape[1] == 0:
        raise ParameterError("empty image")
    if np.issubdtype(img.dtype, np.floating) or img.min() < 0 or img.max() > 255:
        if not np.all((img >= 0) & (img <= 255) & (img == np.round(img))):
            raise ParameterError("expected 8-bit pixel values")
    return img.astype(np.float64)


def analysis(image, quality: int) -> tuple[np.ndarray, tuple[int, int]]:
    """Quantized coefficients with shape (channels, H/8, W/8, 8, 8)."""
    img = _as_planes(image)
    size = img.shape[:2]
    x = pad_to_blocks(img) - 128.0
    if x.shape[2] == 3:
        x = x @ color_matrix().T
    out = []
    for c in range(x.shape[2]):
        steps = quality_steps(quality, LUMA_TABLE if c == 0 else CHROMA_TABLE)
        coeffs = dct8_forward(blockify(x[:, :, c]))
        out.append(uniform_quantize(coeffs / steps))
    return np.stack(out), size


def synthesis(z: np.ndarray, size, quality: int) -> np.ndarray:
    planes = []
    for c in range(z.shape[0]):
        steps = quality_steps(quality, LUMA_TABLE if c == 0 else CHROMA_TABLE)
        planes.append(unblockify(dct8_inverse(z[c] * steps)))
    x = np.stack(planes, axis=-1)
    if x.shape[2] == 3:
        x = x @ np.linalg.inv(color_matrix()).T
    x = np.clip(np.round(x + 128.0), 0, 255).astype(np.uint8)
    x = x[: size[0], : size[1]]
    return x[:, :, 0] if x.shape[2] == 1 else x


def _fit_band(values: np.ndarray) -> tuple[int, int, float, float]:
    lo, hi = int(values.min()), int(values.max())
    if lo < -32768 or hi > 32767:
        raise ParameterError("coefficient outside the 16-bit band range")
    if lo == hi:
        return lo, hi, float(lo), 1.0
    fit = fit_discretized("logistic", values, support=(lo, hi), tol=1e-7, max_iter=400)
    return lo, hi, float(fit.density.loc[0]), float(fit.density.scale[0])


def _band_pmf(lo, hi, loc, scale) -> QuantizedPmf:
    return DiscretizedDensity("logistic", loc, scale, lo, hi).quantized(PRECISION)


def _dc_sequence(dc: np.ndarray):
    """(pmf, symbol) pairs for one channel's DC differences, adaptive on the category."""
    model = ContextModel(DC_CATEGORIES, order=1, alpha=0.1, precision=PRECISION)
    pmfs, syms = [], []
    prev, prev_cat = 0, ()
    for v in dc.ravel():
        d = int(v) - prev
        prev = int(v)
        cat = _dc_category(d)
        if cat >= DC_CATEGORIES:
            raise ParameterError("DC difference out of range")
        ctx = model.context_of(prev_cat)
        pmfs.append(model.predict(ctx))
        syms.append(cat)
        model.update(ctx, cat)
        prev_cat = (cat,)
        if cat:
            pmfs.append(uniform_pmf(1 << cat, cat))
            syms.append(_dc_extra(d, cat))
    return pmfs, syms


def jpegish_encode(image, quality: int = 75) -> bytes:
    z, (h, w) = analysis(image, quality)
    channels = z.shape[0]
    head = _HEAD.pack(MAGIC, VERSION, channels, int(quality), 0, h, w)
    if channels == 3:
        head += b"".join(_FRAC.pack(f.numerator, f.denominator) for row in COLOR_MATRIX for f in row)
    flat = z.reshape(channels, -1, BLOCK * BLOCK)
    zz = zigzag_order()
    pmfs, syms = [], []
    bands = []
    for c in range(channels):
        p, s = _dc_sequence(flat[c, :, 0])
        pmfs += p
        syms += s
        for k in zz[1:]:
            params = _fit_band(flat[c, :, k])
            lo, hi, loc, scale = _BAND.unpack(_BAND.pack(*params))  # what the decoder will see
            bands.append((lo, hi, loc, scale))
            pmf = _band_pmf(lo, hi, loc, scale)
            pmfs += [pmf] * flat.shape[1]
            syms += (flat[c, :, k] - lo).tolist()
    head += b"".join(_BAND.pack(*b) for b in bands)
    state = rans_encode(pmfs, syms)
    return head + state.to_bytes()


def parse_header(stream: bytes):
    if len(stream) < _HEAD.size:
        raise FormatError("stream shorter than the header")
    magic, version, channels, quality, _, h, w = _HEAD.unpack_from(stream)
    if magic != MAGIC:
        raise FormatError("not a jpegish stream")
    if version > VERSION:
        raise UnsupportedVersionError(f"jpegish version {version} is newer than supported")
    if channels not in (1, 3) or not 1 <= quality <= 100 or h == 0 or w == 0:
        raise FormatError("invalid jpegish header fields")
    off = _HEAD.size
    if channels == 3:
        need = off + 9 * _FRAC.size
        if len(stream) < need:
            raise FormatError("truncated color matrix")
        fr = [_FRAC.unpack_from(stream, off + i * _FRAC.size) for i in range(9)]
        if any(d == 0 for _, d in fr):
            raise FormatError("zero denominator in color matrix")
        if tuple(Fraction(n, d) for n, d in fr) != tuple(f for row in COLOR_MATRIX for f in row):
            raise FormatError("unsupported color matrix")
        off = need
    n_bands = channels * (BLOCK * BLOCK - 1)
    need = off + n_bands * _BAND.size
    if len(stream) < need:
        raise FormatError("truncated band table")
    bands = [_BAND.unpack_from(stream, off + i * _BAND.size) for i in range(n_bands)]
    for lo, hi, loc, scale in bands:
        if lo > hi or not np.isfinite(loc) or not (np.isfinite(scale) and scale > 0):
            raise FormatError("invalid band model")
    return dict(channels=channels, quality=quality, height=h, width=w, bands=bands, offset=need)


def jpegish_decode(stream: bytes) -> JpegishImage:
    hdr = parse_header(stream)
    channels, h, w = hdr["channels"], hdr["height"], hdr["width"]
    bh, bw = -(-h // BLOCK), -(-w // BLOCK)
    n_blocks = bh * bw
    state = RansState.from_bytes(stream[hdr["offset"] :])
    flat = np.zeros((channels, n_blocks, BLOCK * BLOCK), dtype=np.int64)
    zz = zigzag_order()
    bands = iter(hdr["bands"])
    try:
        for c in range(channels):
            model = ContextModel(DC_CATEGORIES, order=1, alpha=0.1, precision=PRECISION)
            prev, prev_cat = 0, ()
            for b in range(n_blocks):
                ctx = model.context_of(prev_cat)
                cat = state.pop(model.predict(ctx))
                model.update(ctx, cat)
                prev_cat = (cat,)
                d = _dc_from_extra(state.pop(uniform_pmf(1 << cat, cat)), cat) if cat else 0
                prev += d
                flat[c, b, 0] = prev
            for k in zz[1:]:
                lo, hi, loc, scale = next(bands)
                pmf = _band_pmf(lo, hi, loc, scale)
                flat[c, :, k] = [state.pop(pmf) + lo for _ in range(n_blocks)]
    except StreamExhaustedError as exc:
        raise StreamExhaustedError("jpegish payload is truncated") from exc
    z = flat.reshape(channels, bh, bw, BLOCK, BLOCK)
    pixels = synthesis(z, (h, w), hdr["quality"])
    return JpegishImage(pixels, hdr["quality"], 8 * len(stream))


class JpegishCodec:
    """Thin object wrapper; ``quality`` picks the step table scale."""

    def __init__(self, quality: int = 75):
        quality_steps(quality)
        self.quality = int(quality)

    def encode(self, image) -> bytes:
        return jpegish_encode(image, self.quality)

    def decode(self, stream: bytes) -> np.ndarray:
        return jpegish_decode(stream).pixels

    def rate_distortion(self, image) -> tuple[float, float]:
        """(bits per pixel, MSE) of an actual encode/decode."""
        stream = self.encode(image)
        out = self.decode(stream)
        img = np.asarray(image, dtype=np.float64)
        return 8 * len(stream) / (img.shape[0] * img.shape[1]), float(np.mean((img - out) ** 2))
