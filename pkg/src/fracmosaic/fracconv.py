"""Sliding-window fractal convolution and mask-based segmentation.

Every ``patch x patch`` window (stepping by ``stride``) is converted to gray,
run through Canny, binarized at the mean of its edge map and measured by box
counting.  The dimension is scaled to a byte and written at the window
centre of an otherwise zero mask the size of the input.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .edges import CANNY_HIGH, CANNY_LOW, canny_stack
from .fractal import MAX_DIMENSION, count_stack, default_sizes, fit_slopes
from .imgcore import check_image, round_half_away, to_grayscale

FD_SCALE = 127
# patches per vectorized batch; bounds peak memory at a few tens of MB
_BATCH = 8192


@dataclass(frozen=True)
class FcParams:
    patch: int = 8
    stride: int = 1
    canny_low: float = CANNY_LOW
    canny_high: float = CANNY_HIGH
    global_canny: bool = False

    def validate(self, width: int, height: int) -> None:
        if self.patch < 2:
            raise ValueError(f"patch must be >= 2, got {self.patch}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.canny_low >= self.canny_high:
            raise ValueError("thresholds inverted")
        if self.patch > min(width, height):
            raise ValueError(f"patch exceeds image: {self.patch} > {min(width, height)}")


def scale_fd(d: float | None) -> int:
    """Map a dimension onto 1..255; negative values map to 0.

    ``None`` (a window without edges) is treated as dimension 0.
    """
    if d is None or (isinstance(d, float) and np.isnan(d)):
        d = 0.0
    t = int(round_half_away(d * FD_SCALE))
    t = t + 1 if t >= 0 else 0
    return min(max(t, 0), 255)


def scale_fd_array(fd: np.ndarray) -> np.ndarray:
    """Vectorized `scale_fd`; NaN marks windows without edges."""
    t = round_half_away(np.nan_to_num(fd, nan=0.0) * FD_SCALE)
    t = np.where(t >= 0, t + 1, 0)
    return np.clip(t, 0, 255).astype(np.uint8)


def _window_fd(edges: np.ndarray, sizes: list[int]) -> np.ndarray:
    """Dimension per edge window ``(N, p, p)``; NaN where the binarized window is empty."""
    values = edges.astype(np.float64) * 255.0
    level = values.mean(axis=(-2, -1), keepdims=True)
    occ = values > level
    counts = count_stack(occ, sizes)
    slope, _ = fit_slopes(sizes, counts)
    return np.clip(slope, 0.0, MAX_DIMENSION)


def _band_fd(source: np.ndarray, rows: range, p: FcParams, sizes: list[int],
             edges_given: bool) -> np.ndarray:
    windows = sliding_window_view(source, (p.patch, p.patch))[::p.stride, ::p.stride]
    band = windows[rows.start:rows.stop]
    n_rows, n_cols = band.shape[:2]
    flat = band.reshape(-1, p.patch, p.patch)
    out = np.empty(flat.shape[0])
    for start in range(0, flat.shape[0], _BATCH):
        chunk = flat[start:start + _BATCH]
        if edges_given:
            edges = chunk
        else:
            edges = canny_stack(chunk, p.canny_low, p.canny_high)
        out[start:start + _BATCH] = _window_fd(edges, sizes)
    return out.reshape(n_rows, n_cols)


def fd_grid(img: np.ndarray, p: FcParams = FcParams(), threads: int = 1) -> np.ndarray:
    """Raw per-window dimensions, shape ``(n_row_windows, n_col_windows)``.

    NaN marks windows whose binarized edge map is empty.  Output rows are
    split into disjoint bands across ``threads`` workers; the values do not
    depend on the split.
    """
    img = check_image(img)
    height, width = img.shape[:2]
    p.validate(width, height)
    gray = to_grayscale(img)
    if p.global_canny:
        source, edges_given = canny_stack(gray, p.canny_low, p.canny_high), True
    else:
        source, edges_given = gray, False
    sizes = default_sizes(p.patch, p.patch)
    n_rows = (height - p.patch) // p.stride + 1

    threads = max(1, int(threads or 1))
    bounds = np.linspace(0, n_rows, min(threads, n_rows) + 1).astype(int)
    bands = [range(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if len(bands) == 1:
        parts = [_band_fd(source, bands[0], p, sizes, edges_given)]
    else:
        with ThreadPoolExecutor(max_workers=len(bands)) as pool:
            parts = list(pool.map(lambda r: _band_fd(source, r, p, sizes, edges_given), bands))
    return np.concatenate(parts, axis=0)


def mask_from_fd(fd: np.ndarray, width: int, height: int, p: FcParams) -> np.ndarray:
    mask = np.zeros((height, width), dtype=np.uint8)
    n_rows, n_cols = fd.shape
    centre = p.patch // 2
    rows = np.arange(n_rows) * p.stride + centre
    cols = np.arange(n_cols) * p.stride + centre
    mask[np.ix_(rows, cols)] = scale_fd_array(fd)
    return mask


def fractal_convolution(img: np.ndarray, p: FcParams = FcParams(), threads: int = 1) -> np.ndarray:
    """Richness mask with the same height and width as ``img``.

    Samples that are not the centre of any window stay 0.
    """
    img = check_image(img)
    fd = fd_grid(img, p, threads)
    return mask_from_fd(fd, img.shape[1], img.shape[0], p)


def default_threads() -> int:
    return os.cpu_count() or 1


def segment(img: np.ndarray, mask: np.ndarray, mode: str = "scaled", threshold: int = 128) -> np.ndarray:
    """Apply a richness mask to an image.

    ``scaled`` multiplies each channel by ``mask / 255``; ``binary`` keeps
    samples whose mask value is at least ``threshold`` and zeroes the rest.
    """
    img = check_image(img)
    mask = check_image(mask, "mask")
    if mask.ndim != 2 or mask.shape != img.shape[:2]:
        raise ValueError(f"mask/image size mismatch: {mask.shape} vs {img.shape[:2]}")
    m = mask if img.ndim == 2 else mask[:, :, None]
    if mode == "scaled":
        out = round_half_away(img.astype(np.float64) * m.astype(np.float64) / 255.0)
        return np.clip(out, 0, 255).astype(np.uint8)
    if mode == "binary":
        return np.where(m >= threshold, img, 0).astype(np.uint8)
    raise ValueError(f"unknown segment mode {mode!r}")
