"""Box-counting fractal dimension of binary maps.

The dimension is the least-squares slope of ``ln N(s)`` against ``ln(1/s)``,
where ``N(s)`` counts the origin-anchored ``s x s`` grid cells (partial cells at
the right and bottom included) that hold at least one occupied sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imgcore import check_image

MAX_DIMENSION = 2.0


@dataclass(frozen=True)
class BoxCountSeries:
    sizes: tuple[int, ...]
    counts: tuple[int, ...]

    @property
    def entries(self) -> list[tuple[int, int]]:
        return list(zip(self.sizes, self.counts))


@dataclass(frozen=True)
class FdResult:
    """Fitted dimension with fit quality.

    The scaling law ``n = k * r**d`` also carries a constant offset
    ``-ln(k) / ln(1/r)``; it plays no part in the estimate and is not stored.
    """

    dimension: float
    r_squared: float
    series: BoxCountSeries


def binarize(img: np.ndarray, threshold: str | float = "mean") -> np.ndarray:
    """Samples strictly above the threshold become 255, the rest 0.

    ``threshold`` is ``"mean"`` (image mean) or a fixed number.
    """
    img = check_image(img)
    if img.ndim != 2:
        raise ValueError("binarize expects a single-channel image")
    level = float(img.mean()) if threshold == "mean" else float(threshold)
    return np.where(img > level, 255, 0).astype(np.uint8)


def default_sizes(width: int, height: int) -> list[int]:
    """Powers of two from the largest <= min(dim)/2 down to 2.

    Maps too small to yield two such sizes fall back to ``[2, 1]``.
    """
    side = min(width, height)
    if side < 2:
        raise ValueError("map too small for box counting")
    sizes = []
    s = 1
    while s * 2 <= side // 2:
        s *= 2
    while s >= 2:
        sizes.append(s)
        s //= 2
    if len(sizes) < 2:
        sizes = [2, 1]
    return sizes


def _occupied(map_: np.ndarray) -> np.ndarray:
    return np.asarray(map_) > 0


def count_stack(occ: np.ndarray, sizes: list[int]) -> np.ndarray:
    """Occupied-box counts for a boolean stack ``(..., H, W)``; shape ``(..., len(sizes))``."""
    h, w = occ.shape[-2:]
    lead = occ.shape[:-2]
    out = np.empty(lead + (len(sizes),), dtype=np.int64)
    for k, s in enumerate(sizes):
        ph, pw = -h % s, -w % s
        grid = occ
        if ph or pw:
            grid = np.pad(occ, [(0, 0)] * len(lead) + [(0, ph), (0, pw)])
        cells = grid.reshape(lead + ((h + ph) // s, s, (w + pw) // s, s))
        out[..., k] = cells.any(axis=(-3, -1)).sum(axis=(-2, -1))
    return out


def box_count(map_: np.ndarray, sizes: list[int]) -> BoxCountSeries:
    occ = _occupied(check_image(map_))
    if occ.ndim != 2:
        raise ValueError("box_count expects a single-channel map")
    sizes = [int(s) for s in sizes]
    if not sizes:
        raise ValueError("box size out of range: no sizes given")
    limit = min(occ.shape)
    for s in sizes:
        if not 1 <= s <= limit:
            raise ValueError(f"box size out of range: {s}")
    counts = count_stack(occ, sizes)
    return BoxCountSeries(tuple(sizes), tuple(int(c) for c in counts))


def fit_slopes(sizes: list[int], counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares slope and r^2 of ln N against ln(1/s) along the last axis.

    Rows containing a zero count give NaN for both.
    """
    x = np.log(1.0 / np.asarray(sizes, dtype=np.float64))
    xc = x - x.mean()
    sxx = float(np.dot(xc, xc))
    counts = np.asarray(counts, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.log(counts)
        yc = y - y.mean(axis=-1, keepdims=True)
        slope = (yc * xc).sum(axis=-1) / sxx
        resid = yc - slope[..., None] * xc
        ss_tot = (yc * yc).sum(axis=-1)
        ss_res = (resid * resid).sum(axis=-1)
        r2 = np.where(ss_tot > 0, 1.0 - ss_res / np.where(ss_tot > 0, ss_tot, 1.0), 1.0)
    empty = (counts <= 0).any(axis=-1)
    slope = np.where(empty, np.nan, slope)
    r2 = np.where(empty, np.nan, np.clip(r2, 0.0, 1.0))
    return slope, r2


def fractal_dimension(map_: np.ndarray, sizes: list[int] | None = None) -> FdResult:
    """Box-counting dimension of the occupied (non-zero) samples, clamped to [0, 2]."""
    map_ = check_image(map_)
    if map_.ndim != 2:
        raise ValueError("fractal_dimension expects a single-channel map")
    if not _occupied(map_).any():
        raise ValueError("empty set has no dimension")
    if sizes is None:
        sizes = default_sizes(map_.shape[1], map_.shape[0])
    series = box_count(map_, sizes)
    slope, r2 = fit_slopes(list(series.sizes), np.array(series.counts))
    dim = float(np.clip(slope, 0.0, MAX_DIMENSION))
    return FdResult(dim, float(r2), series)
