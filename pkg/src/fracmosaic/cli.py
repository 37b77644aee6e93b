"""Command line entry point: one subcommand per pipeline stage.

Exit status is 0 on success, 2 for usage or validation errors and 1 for
runtime failures.  Files are written via temp file + rename, so a failed run
leaves no partial outputs.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import MOSAIC_MODES, expand_corpus, parse_ops
from .edges import canny
from .fracconv import FcParams, default_threads, fd_grid, mask_from_fd, segment
from .fractal import binarize, fractal_dimension
from .imgcore import atomic_write_bytes, load_image, save_image, to_grayscale
from .metrics import fd_report, report_csv, ssim
from .mosaic import CODES, inter_mix, intra_mosaicslice, load_figures
from .tilefill import FillConfig, fill_all, load_annotations, load_pool, upscale_tile

log = logging.getLogger("fracmosaic")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _weights(text: str) -> tuple[float, float, float]:
    try:
        parts = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"weights must be three numbers: {text!r}") from None
    if len(parts) != 3 or any(v < 0 for v in parts):
        raise argparse.ArgumentTypeError("weights must be three nonnegative numbers")
    return parts


def _write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def cmd_fd(args) -> int:
    gray = to_grayscale(load_image(args.image))
    edge_map = canny(gray, args.canny_low, args.canny_high) if args.edges else binarize(gray, args.threshold)
    res = fractal_dimension(edge_map)
    buf = io.StringIO()
    buf.write(f"dimension,{res.dimension:.6f}\nr_squared,{res.r_squared:.6f}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["s", "n"])
    writer.writerows(res.series.entries)
    sys.stdout.write(buf.getvalue())
    return 0


def _fc_params(args) -> FcParams:
    return FcParams(args.patch, args.stride, args.canny_low, args.canny_high, args.global_canny)


def cmd_fracconv(args) -> int:
    img = load_image(args.image)
    p = _fc_params(args)
    fd = fd_grid(img, p, args.threads)
    mask = mask_from_fd(fd, img.shape[1], img.shape[0], p)
    save_image(args.out, mask)
    if args.dump_fd:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["row", "col", "fd", "empty"])
        centre = p.patch // 2
        for (r, c), v in np.ndenumerate(fd):
            empty = bool(np.isnan(v))
            writer.writerow([r * p.stride + centre, c * p.stride + centre,
                             "0.000000" if empty else f"{v:.6f}", int(empty)])
        _write_text(args.dump_fd, buf.getvalue())
    log.info("wrote %s", args.out)
    return 0


def cmd_segment(args) -> int:
    img = load_image(args.image)
    mask = load_image(args.mask)
    if mask.ndim == 3:
        mask = to_grayscale(mask)
    save_image(args.out, segment(img, mask, args.mode, args.threshold))
    return 0


def cmd_mosaic_intra(args) -> int:
    tile = load_image(args.tile)
    rects = args.rects or Path(args.tile).with_suffix(".rects")
    figures = load_figures(tile, rects)
    outs = intra_mosaicslice(figures, args.seam_width, args.blur, args.sigma, args.length, args.angle)
    stem = Path(args.tile).stem
    for code, out in zip(CODES, outs):
        save_image(Path(args.out_dir) / f"{stem}__{code.replace(chr(39), 'p')}.png", out)
    return 0


def cmd_mosaic_inter(args) -> int:
    a = load_image(args.tile_a)
    b = load_image(args.tile_b)
    fa = load_figures(a, args.rects_a or Path(args.tile_a).with_suffix(".rects"))
    fb = load_figures(b, args.rects_b or Path(args.tile_b).with_suffix(".rects"))
    mix = inter_mix(fa, fb, args.seed, args.code)
    for w in mix.warnings:
        log.warning(w)
    save_image(args.out, mix.image)
    return 0


def cmd_augment(args) -> int:
    chains = parse_ops(args.ops) if args.ops else []
    manifest = expand_corpus(args.src, args.out, chains, args.mosaic, args.seed,
                             args.variants_per_image, args.threads, args.seam_width)
    log.info("%d outputs, manifest at %s", len(manifest.outputs), Path(args.out) / "manifest.jsonl")
    return 0


def cmd_fill(args) -> int:
    wall = load_image(args.wall)
    anns = load_annotations(Path(args.annotations).read_text(), wall.shape[1], wall.shape[0])
    pool = load_pool(args.pool)
    if args.alpha > 1:
        pool = [(i, upscale_tile(t, args.alpha)) for i, t in pool]
    if any(a.cls == "no_tile" for a in anns) and not pool:
        raise ValueError("no candidates")
    restored, placements = fill_all(wall, anns, pool, FillConfig(args.margin, args.weights))
    lines = "".join(json.dumps(p.report(args.timing), sort_keys=True) + "\n" for p in placements)
    save_image(args.out, restored)
    _write_text(args.report or Path(args.out).with_name("report.json"), lines)
    return 0


def cmd_ssim(args) -> int:
    a = to_grayscale(load_image(args.a))
    b = to_grayscale(load_image(args.b))
    print(f"{ssim(a, b):.6f}")
    return 0


def cmd_fd_report(args) -> int:
    rows = fd_report(args.dir, preprocess=not args.no_preprocess)
    for row in rows:
        for w in row.warnings:
            log.warning("%s: %s", row.name, w)
    text = report_csv(rows)
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _add_canny(p: argparse.ArgumentParser) -> None:
    p.add_argument("--canny-low", type=float, default=50.0, help="Canny low threshold (default 50)")
    p.add_argument("--canny-high", type=float, default=150.0, help="Canny high threshold (default 150)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracmosaic", description="Fractal convolution, MosaicSlice augmentation and tile filling for heritage imagery.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--threads", type=_positive_int, default=default_threads(),
                        help="worker pool size (default: logical cores); outputs do not depend on it")
    noise = parser.add_mutually_exclusive_group()
    noise.add_argument("-v", "--verbose", action="store_true")
    noise.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("fd", help="box-counting fractal dimension of an image")
    p.add_argument("image")
    p.add_argument("--edges", action="store_true", help="measure the Canny edge map instead of the mean-binarized image")
    p.add_argument("--threshold", default="mean", type=lambda t: t if t == "mean" else float(t),
                   help="binarization threshold: 'mean' or a number (default mean)")
    _add_canny(p)
    p.set_defaults(func=cmd_fd)

    p = sub.add_parser("fracconv", help="fractal convolution richness mask")
    p.add_argument("image")
    p.add_argument("--out", required=True)
    p.add_argument("--patch", type=int, default=8, help="window side (default 8)")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--global-canny", action="store_true", help="run Canny once on the whole image")
    p.add_argument("--dump-fd", metavar="CSV", help="also write raw per-window dimensions")
    _add_canny(p)
    p.set_defaults(func=cmd_fracconv)

    p = sub.add_parser("segment", help="apply a richness mask to an image")
    p.add_argument("image")
    p.add_argument("mask")
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("scaled", "binary"), default="scaled")
    p.add_argument("--threshold", type=int, default=128, help="binary mode cut-off (default 128)")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("mosaic", help="MosaicSlice augmentation")
    msub = p.add_subparsers(dest="mosaic_command", required=True, metavar="MODE")
    q = msub.add_parser("intra", help="eight compositions of one tile's figures")
    q.add_argument("tile")
    q.add_argument("--out-dir", required=True)
    q.add_argument("--rects", help="figure sidecar (default: <tile>.rects, else midline split)")
    q.add_argument("--seam-width", type=int, default=8)
    q.add_argument("--blur", choices=("gaussian", "motion"), default="gaussian")
    q.add_argument("--sigma", type=float, default=2.0)
    q.add_argument("--length", type=int, default=9)
    q.add_argument("--angle", type=float, default=0.0)
    q.set_defaults(func=cmd_mosaic_intra)
    q = msub.add_parser("inter", help="mix figures across two tiles")
    q.add_argument("tile_a")
    q.add_argument("tile_b")
    q.add_argument("--out", required=True)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--code", choices=CODES, default="AB")
    q.add_argument("--rects-a")
    q.add_argument("--rects-b")
    q.set_defaults(func=cmd_mosaic_inter)

    p = sub.add_parser("augment", help="expand a tile corpus with a provenance manifest")
    p.add_argument("src")
    p.add_argument("--out", required=True)
    p.add_argument("--ops", default="", help="comma-separated chains of '+'-joined ops, e.g. 'brightness,hflip+blur=1.5'")
    p.add_argument("--variants-per-image", type=int, default=0)
    p.add_argument("--mosaic", choices=MOSAIC_MODES, default="none")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seam-width", type=int, default=8)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("fill", help="fill annotated empty tile regions from a candidate pool")
    p.add_argument("--wall", required=True)
    p.add_argument("--annotations", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="placement report, JSON lines (default: report.json beside --out)")
    p.add_argument("--margin", type=int, default=6)
    p.add_argument("--alpha", type=_positive_int, default=4, help="bicubic upscale factor for pool tiles (default 4)")
    p.add_argument("--weights", type=_weights, default=(0.5, 0.3, 0.2), help="objective weights (default 0.5,0.3,0.2)")
    p.add_argument("--timing", action="store_true", help="record elapsed_ms in the report (makes it nondeterministic)")
    p.set_defaults(func=cmd_fill)

    p = sub.add_parser("metrics", help="evaluation metrics")
    msub = p.add_subparsers(dest="metrics_command", required=True, metavar="METRIC")
    q = msub.add_parser("ssim", help="structural similarity of two images (gray)")
    q.add_argument("a")
    q.add_argument("b")
    q.set_defaults(func=cmd_ssim)
    q = msub.add_parser("fd-report", help="FD(O)/FD(P) table for a directory")
    q.add_argument("dir")
    q.add_argument("--out")
    q.add_argument("--no-preprocess", action="store_true", help="skip median denoising before Canny")
    q.set_defaults(func=cmd_fd_report)
    return parser


def _validate(args, parser: argparse.ArgumentParser) -> None:
    if args.command == "fracconv":
        if args.patch < 2:
            parser.error(f"patch exceeds image bounds or is below 2: {args.patch}")
        if args.stride < 1:
            parser.error("stride must be >= 1")
    if args.command in ("fracconv", "fd") and args.canny_low >= args.canny_high:
        parser.error("thresholds inverted")
    if args.command == "fill" and args.margin < 0:
        parser.error("margin must be >= 0")
    if args.command == "augment" and args.variants_per_image < 0:
        parser.error("--variants-per-image must be >= 0")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _validate(args, parser)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = logging.DEBUG if args.verbose else logging.ERROR if args.quiet else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"fracmosaic {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"fracmosaic {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
