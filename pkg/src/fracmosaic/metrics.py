"""SSIM and fractal-dimension report tables."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import ndimage

from .edges import canny
from .fractal import binarize, fractal_dimension
from .imgcore import check_image, load_image, to_grayscale
from .mosaic import median_blur

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
K1, K2, DATA_RANGE = 0.01, 0.03, 255.0


def _window_mean(x: np.ndarray) -> np.ndarray:
    r = SSIM_WINDOW // 2
    t = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(t * t) / (2 * SSIM_SIGMA ** 2))
    k /= k.sum()
    out = ndimage.correlate1d(x, k, axis=0, mode="reflect")
    return ndimage.correlate1d(out, k, axis=1, mode="reflect")


def ssim_map(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Local SSIM over an 11x11 Gaussian window (sigma 1.5), border of 5 cropped."""
    a, b = check_image(a, "a"), check_image(b, "b")
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("ssim expects single-channel images")
    if a.shape != b.shape:
        raise ValueError(f"size mismatch: {a.shape} vs {b.shape}")
    if min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    x, y = a.astype(np.float64), b.astype(np.float64)
    c1, c2 = (K1 * DATA_RANGE) ** 2, (K2 * DATA_RANGE) ** 2
    mx, my = _window_mean(x), _window_mean(y)
    vx = _window_mean(x * x) - mx * mx
    vy = _window_mean(y * y) - my * my
    cxy = _window_mean(x * y) - mx * my
    s = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    r = SSIM_WINDOW // 2
    return s[r:-r, r:-r]


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.clip(ssim_map(a, b).mean(), -1.0, 1.0))


@dataclass
class FdReportRow:
    name: str
    fd_original: float
    fd_preprocessed: float
    warnings: list[str] = field(default_factory=list)


def _fd_or_zero(map_: np.ndarray, label: str, warnings: list[str]) -> float:
    try:
        return fractal_dimension(map_).dimension
    except ValueError as exc:
        warnings.append(f"{label}: {exc}")
        return 0.0


def fd_row(name: str, img: np.ndarray, preprocess: bool = True) -> FdReportRow:
    """FD(O) from the gray image binarized at its mean; FD(P) from its Canny edges,
    after a 3x3 median denoise when ``preprocess`` is on."""
    gray = to_grayscale(img)
    warnings: list[str] = []
    fd_o = _fd_or_zero(binarize(gray, "mean"), "fd_o", warnings)
    source = median_blur(gray, 3) if preprocess else gray
    fd_p = _fd_or_zero(canny(source), "fd_p", warnings)
    return FdReportRow(name, fd_o, fd_p, warnings)


def list_images(directory: str | Path) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise ValueError(f"not a directory: {d}")
    return sorted(p for p in d.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def fd_report(directory: str | Path, preprocess: bool = True) -> list[FdReportRow]:
    rows = []
    root = Path(directory)
    for path in list_images(root):
        name = path.relative_to(root).as_posix()
        try:
            img = load_image(path)
        except Exception as exc:  # unreadable files degrade to a warning row
            log.warning("skipping %s: %s", name, exc)
            rows.append(FdReportRow(name, 0.0, 0.0, [f"unreadable: {exc}"]))
            continue
        rows.append(fd_row(name, img, preprocess))
    return rows


def report_csv(rows: list[FdReportRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["name", "fd_o", "fd_p"])
    for row in rows:
        writer.writerow([row.name, f"{row.fd_original:.4f}", f"{row.fd_preprocessed:.4f}"])
    return buf.getvalue()


def published_fd_table() -> list[FdReportRow]:
    """Published monument FD(O)/FD(P) means, shipped in report format.

    These are reference numbers only: the photographs they were measured on
    are not available, so the values cannot be recomputed here.
    """
    text = resources.files("fracmosaic").joinpath("data/published_fd.csv").read_text()
    reader = csv.DictReader(io.StringIO(text))
    return [FdReportRow(r["name"], float(r["fd_o"]), float(r["fd_p"])) for r in reader]
