"""``ncc`` command-line interface.

Exit codes: 0 ok, 2 usage, 3 format or corruption, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import functools
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .codecs import LOSSLESS, MODEL_FAMILIES, compress_bytes, decompress_bytes, fit_model
from .container import Container
from .errors import (
    ConvergenceError,
    FormatError,
    NccError,
    ParameterError,
    StreamExhaustedError,
    TruncatedStreamError,
    UnencodableError,
)

EXIT_OK, EXIT_USAGE, EXIT_FORMAT, EXIT_NUMERIC = 0, 2, 3, 4
CODECS = LOSSLESS + ("jpegish",)
SWEEP_CODECS = ("jpegish", "linear", "ecvq", "progressive")


def _floats(text: str) -> list[float]:
    text = text.strip()
    if not text:
        return []
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _read_image(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB" if im.mode in ("RGBA", "P", "CMYK", "YCbCr") else "L")
        return np.asarray(im)


def _write_image(path, pixels: np.ndarray) -> None:
    from PIL import Image

    Image.fromarray(np.asarray(pixels, dtype=np.uint8)).save(path)


def _read_vectors(path) -> np.ndarray:
    path = Path(path)
    x = np.load(path) if path.suffix == ".npy" else np.loadtxt(path, delimiter="," if path.suffix == ".csv" else None)
    x = np.asarray(x, dtype=np.float64)
    return x[:, None] if x.ndim == 1 else x


def _write(out, data: bytes) -> None:
    if out in (None, "-"):
        sys.stdout.buffer.write(data)
    else:
        Path(out).write_bytes(data)


# subcommands


def cmd_fit(args) -> int:
    data = Path(args.input).read_bytes()
    blob = fit_model(data, args.family, args.seed)
    _write(args.output, blob)
    return EXIT_OK


def cmd_compress(args) -> int:
    if args.codec == "jpegish":
        from .metrics import mse, psnr
        from .transform_coding import jpegish_decode, jpegish_encode

        image = _read_image(args.input)
        stream = jpegish_encode(image, args.quality)
        _write(args.output, Container("jpegish", b"", stream).to_bytes())
        if args.report:
            rec = jpegish_decode(stream)
            print(f"bpp,{rec.bits_per_pixel!r}\nmse,{mse(image, rec.pixels)!r}\npsnr,{psnr(image, rec.pixels)!r}",
                  file=sys.stderr)
        return EXIT_OK
    data = Path(args.input).read_bytes()
    model = Path(args.model).read_bytes() if args.model else None
    container = compress_bytes(data, args.codec, model, args.seed)
    blob = container.to_bytes()
    _write(args.output, blob)
    if args.report:
        n = max(len(data), 1)
        print(f"bits_per_byte,{8 * len(container.payload) / n!r}\ntotal_bits_per_byte,{8 * len(blob) / n!r}",
              file=sys.stderr)
    return EXIT_OK


def cmd_decompress(args) -> int:
    container = Container.from_bytes(Path(args.input).read_bytes())
    if container.codec == "jpegish":
        from .transform_coding import jpegish_decode

        rec = jpegish_decode(container.payload)
        if args.output in (None, "-"):
            raise ParameterError("jpegish output needs an image path")
        _write_image(args.output, rec.pixels)
        if args.report:
            print(f"bpp,{rec.bits_per_pixel!r}", file=sys.stderr)
        return EXIT_OK
    _write(args.output, decompress_bytes(container))
    return EXIT_OK


def _eval_jpegish(quality, image):
    from .transform_coding import JpegishCodec

    return JpegishCodec(int(quality)).rate_distortion(image)


def _eval_linear(lam, X, seed):
    from .transform_coding import LinearTransformCodec, eval_codec_true

    codec = LinearTransformCodec(lam=lam, random_state=seed).fit(X)
    ev = eval_codec_true(codec, X)
    return ev.rate, ev.distortion


def _eval_ecvq(lam, X, seed):
    from .quantization import ECVQ

    return ECVQ(lam=lam, random_state=seed).fit(X).rate_distortion(X)


def cmd_rd_sweep(args) -> int:
    from .rd_theory import RDPoint, rd_sweep, write_rd_csv

    if args.codec == "jpegish":
        qualities = args.quality_list if args.quality_list is not None else args.lam
        rows = rd_sweep(_eval_jpegish, qualities, _read_image(args.input), "jpegish")
    elif args.codec in ("linear", "ecvq"):
        X = _read_vectors(args.input)
        fn = functools.partial(_eval_linear if args.codec == "linear" else _eval_ecvq, seed=args.seed)
        rows = rd_sweep(fn, args.lam, X, args.codec)
    else:
        from .transform_coding import ProgressiveCoder

        X = _read_vectors(args.input)
        coder = ProgressiveCoder(n_stages=args.stages).fit(X)
        payloads = coder.encode(X)
        rows, bits = [], 0
        for t in range(1, args.stages + 1):
            bits += 8 * len(payloads[t - 1])
            rec = coder.decode(payloads, t)
            rows.append(RDPoint(t, bits / len(X), float(((X - rec) ** 2).sum(1).mean()), "progressive"))
    _emit_csv(write_rd_csv(rows), args.csv)
    return EXIT_OK


def _emit_csv(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_ba(args) -> int:
    from .rd_theory import hamming_distortion, rd_curve, squared_distortion, write_rd_csv

    source = np.asarray(_floats(args.source))
    if source.size == 0:
        raise ParameterError("--source needs at least one probability")
    if args.distortion == "hamming":
        rho = hamming_distortion(source.size)
    else:
        values = np.asarray(_floats(args.values)) if args.values else np.arange(source.size, dtype=float)
        if values.size != source.size:
            raise ParameterError("--values must match --source in length")
        recon = np.asarray(_floats(args.recon)) if args.recon else values
        rho = squared_distortion(values, recon)
    _emit_csv(write_rd_csv(rd_curve(source, rho, args.lam)), args.csv)
    return EXIT_OK


def cmd_metrics(args) -> int:
    from .metrics import color_metric, ms_ssim, mse, psnr, ssim_image

    x = _read_image(args.reference).astype(np.float64)
    y = _read_image(args.distorted).astype(np.float64)
    if x.shape != y.shape:
        raise ParameterError(f"image shapes differ: {x.shape} vs {y.shape}")
    rows = [("mse", mse(x, y)), ("psnr", psnr(x, y))]
    metric = (lambda f, **kw: color_metric(x, y, f, **kw)) if x.ndim == 3 else (lambda f, **kw: f(x, y, **kw))
    rows.append(("ssim", metric(ssim_image)))
    try:
        rows.append(("ms_ssim", metric(ms_ssim)))
    except ParameterError:
        pass  # too small for five scales
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("metric", "value"))
    for name, value in rows:
        w.writerow((name, repr(float(value))))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ncc", description="Compression toolkit.")
    p.add_argument("--version", action="version", version=f"ncc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a byte model and write it to a file")
    f.add_argument("input")
    f.add_argument("-o", "--output", "--model", dest="output", required=True)
    f.add_argument("--family", choices=MODEL_FAMILIES, default="categorical")
    f.add_argument("--seed", type=int, default=0)
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("compress", help="compress a file into an NCC1 container")
    c.add_argument("input")
    c.add_argument("-o", "--output")
    c.add_argument("--codec", choices=CODECS, default="rans")
    c.add_argument("--model", help="model file from 'ncc fit'")
    c.add_argument("--quality", type=int, default=75)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--report", action="store_true", help="print rate (and distortion) to stderr")
    c.set_defaults(func=cmd_compress)

    d = sub.add_parser("decompress", help="decode an NCC1 container")
    d.add_argument("input")
    d.add_argument("-o", "--output")
    d.add_argument("--report", action="store_true")
    d.set_defaults(func=cmd_decompress)

    r = sub.add_parser("rd-sweep", help="operational rate-distortion points as CSV")
    r.add_argument("input")
    r.add_argument("--codec", choices=SWEEP_CODECS, required=True)
    r.add_argument("--lambda", dest="lam", type=_floats, default=[], help="comma-separated slopes")
    r.add_argument("--quality", dest="quality_list", type=_floats)
    r.add_argument("--stages", type=int, default=3)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--csv")
    r.set_defaults(func=cmd_rd_sweep)

    b = sub.add_parser("ba", help="information rate-distortion curve by Blahut-Arimoto")
    b.add_argument("--source", required=True, help="comma-separated source probabilities")
    b.add_argument("--distortion", choices=("hamming", "squared"), default="hamming")
    b.add_argument("--values", help="source values for squared distortion")
    b.add_argument("--recon", help="reconstruction values for squared distortion")
    b.add_argument("--lambda", dest="lam", type=_floats, default=[], help="comma-separated slopes")
    b.add_argument("--csv")
    b.set_defaults(func=cmd_ba)

    m = sub.add_parser("metrics", help="MSE, PSNR, SSIM and MS-SSIM of an image pair")
    m.add_argument("reference")
    m.add_argument("distorted")
    m.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (FormatError, StreamExhaustedError, TruncatedStreamError) as exc:
        print(f"ncc: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (ConvergenceError, UnencodableError, ArithmeticError, FloatingPointError) as exc:
        print(f"ncc: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParameterError, OSError, ValueError, argparse.ArgumentTypeError, NccError) as exc:
        print(f"ncc: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
