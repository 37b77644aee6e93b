"""Tile filling for damaged walls.

Regions come from YOLO/labelImg annotation files.  For every ``no_tile``
region the most compatible candidate from a pool is chosen by argmin of an
objective, resized to the region and feathered into the wall.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .imgcore import Rect, check_image, load_image, resize, round_half_away, to_grayscale, to_uint8
from .metrics import IMAGE_SUFFIXES

CLASS_NAMES = {0: "no_tile", 1: "tile"}
RING = 8
HIST_BINS = 32
CHI2_EPS = 1e-9
DEFAULT_WEIGHTS = (0.5, 0.3, 0.2)
_C1, _C2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2


@dataclass(frozen=True)
class RegionAnnotation:
    cls: str
    cx: float
    cy: float
    w: float
    h: float

    def to_rect(self, img_w: int, img_h: int) -> Rect:
        """Pixel rect covering the normalized box, at least 1x1 and inside the image."""
        x0 = int(round_half_away((self.cx - self.w / 2) * img_w))
        y0 = int(round_half_away((self.cy - self.h / 2) * img_h))
        x1 = int(round_half_away((self.cx + self.w / 2) * img_w))
        y1 = int(round_half_away((self.cy + self.h / 2) * img_h))
        x0, y0 = min(max(x0, 0), img_w - 1), min(max(y0, 0), img_h - 1)
        x1, y1 = min(max(x1, x0 + 1), img_w), min(max(y1, y0 + 1), img_h)
        return Rect(x0, y0, x1 - x0, y1 - y0)


def load_annotations(text: str, img_w: int | None = None, img_h: int | None = None) -> list[RegionAnnotation]:
    """Parse ``class cx cy w h`` lines (class 0 = no_tile, 1 = tile).

    The image size is accepted for interface symmetry; coordinates stay
    normalized until `RegionAnnotation.to_rect`.
    """
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 5:
            raise ValueError(f"line {lineno}: expected 'class cx cy w h', got {line.strip()!r}")
        try:
            cls = int(parts[0])
            cx, cy, w, h = (float(v) for v in parts[1:])
        except ValueError:
            raise ValueError(f"line {lineno}: malformed number in {line.strip()!r}") from None
        if cls not in CLASS_NAMES:
            raise ValueError(f"line {lineno}: unknown class {cls}")
        if not all(np.isfinite([cx, cy, w, h])) or w <= 0 or h <= 0:
            raise ValueError(f"line {lineno}: box size must be positive")
        eps = 1e-9
        if cx - w / 2 < -eps or cy - h / 2 < -eps or cx + w / 2 > 1 + eps or cy + h / 2 > 1 + eps:
            raise ValueError(f"line {lineno}: box escapes the unit square")
        out.append(RegionAnnotation(CLASS_NAMES[cls], cx, cy, w, h))
    return out


def upscale_tile(t: np.ndarray, alpha: int = 4) -> np.ndarray:
    """Bicubic upscale by an integer factor; stands in for a learned SR model."""
    t = check_image(t)
    if int(alpha) != alpha or alpha < 1:
        raise ValueError(f"alpha must be an integer >= 1, got {alpha}")
    if alpha == 1:
        return t.copy()
    return resize(t, t.shape[1] * int(alpha), t.shape[0] * int(alpha), "bicubic")


def _as_color(img: np.ndarray) -> np.ndarray:
    return img[:, :, None] if img.ndim == 2 else img


def _histogram(pixels: np.ndarray) -> np.ndarray:
    """Per-channel normalized 32-bin histograms, shape (channels, bins)."""
    pixels = pixels.reshape(-1, pixels.shape[-1])
    bins = (pixels.astype(np.int64) * HIST_BINS) // 256
    hist = np.stack([np.bincount(bins[:, c], minlength=HIST_BINS) for c in range(pixels.shape[1])])
    return hist / max(len(pixels), 1)


def _chi2(h1: np.ndarray, h2: np.ndarray) -> float:
    return float((0.5 * ((h1 - h2) ** 2 / (h1 + h2 + CHI2_EPS)).sum(axis=1)).mean())


def _strip_ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Single-window SSIM of two equally shaped gray strips."""
    a, b = a.astype(np.float64).ravel(), b.astype(np.float64).ravel()
    ma, mb = a.mean(), b.mean()
    va, vb = a.var(), b.var()
    cov = ((a - ma) * (b - mb)).mean()
    return ((2 * ma * mb + _C1) * (2 * cov + _C2)) / ((ma * ma + mb * mb + _C1) * (va + vb + _C2))


def _sides(region: Rect, width: int, height: int, depth: int = RING):
    """Yield (inside slice, mirrored outside slice) pairs for each side with ring content.

    Inside strips run inward from the region edge; outside strips run outward
    and are flipped so sample k of each lies k steps from the boundary.
    """
    x0, y0, x1, y1 = region.x, region.y, region.x + region.w, region.y + region.h
    d = min(depth, region.w, region.h)
    n = min(d, y0)
    if n > 0:  # top
        yield (slice(y0, y0 + n), slice(x0, x1)), (slice(y0 - 1, y0 - n - 1 if y0 - n - 1 >= 0 else None, -1), slice(x0, x1))
    n = min(d, height - y1)
    if n > 0:  # bottom
        yield (slice(y1 - 1, y1 - n - 1 if y1 - n - 1 >= 0 else None, -1), slice(x0, x1)), (slice(y1, y1 + n), slice(x0, x1))
    n = min(d, x0)
    if n > 0:  # left
        yield (slice(y0, y1), slice(x0, x0 + n)), (slice(y0, y1), slice(x0 - 1, x0 - n - 1 if x0 - n - 1 >= 0 else None, -1))
    n = min(d, width - x1)
    if n > 0:  # right
        yield (slice(y0, y1), slice(x1 - 1, x1 - n - 1 if x1 - n - 1 >= 0 else None, -1)), (slice(y0, y1), slice(x1, x1 + n))


def _ring_mask(region: Rect, width: int, height: int, depth: int = RING) -> np.ndarray:
    mask = np.zeros((height, width), dtype=bool)
    mask[max(0, region.y - depth):region.y + region.h + depth,
         max(0, region.x - depth):region.x + region.w + depth] = True
    mask[region.y:region.y + region.h, region.x:region.x + region.w] = False
    return mask


def _border_mask(w: int, h: int, depth: int = RING) -> np.ndarray:
    mask = np.ones((h, w), dtype=bool)
    if w > 2 * depth and h > 2 * depth:
        mask[depth:h - depth, depth:w - depth] = False
    return mask


def compatibility_terms(candidate: np.ndarray, wall: np.ndarray, region: Rect) -> tuple[float, float, float]:
    """(histogram chi^2, mean seam gradient / 255, 1 - mean strip SSIM); all >= 0."""
    candidate, wall = check_image(candidate, "candidate"), check_image(wall, "wall")
    region = Rect(*region)
    height, width = wall.shape[:2]
    if not region.inside(width, height):
        raise ValueError(f"rect outside image: {tuple(region)}")
    if candidate.ndim != wall.ndim:
        raise ValueError("candidate and wall channel counts differ")
    cand = resize(candidate, region.w, region.h, "bicubic")
    wall_c, cand_c = _as_color(wall), _as_color(cand)

    ring = _ring_mask(region, width, height)
    if ring.any():
        chi2 = _chi2(_histogram(cand_c[_border_mask(region.w, region.h)]), _histogram(wall_c[ring]))
    else:
        chi2 = 0.0

    pasted = wall_c.astype(np.float64)
    pasted[region.y:region.y + region.h, region.x:region.x + region.w] = cand_c
    seams = []
    for inner, outer in _sides(region, width, height, depth=1):
        seams.append(np.abs(pasted[inner] - pasted[outer]).mean())
    seam = float(np.mean(seams)) / 255.0 if seams else 0.0

    gray_pasted = to_grayscale(to_uint8(pasted[:, :, 0] if wall.ndim == 2 else pasted))
    scores = [_strip_ssim(gray_pasted[inner], gray_pasted[outer])
              for inner, outer in _sides(region, width, height)]
    structure = 1.0 - float(np.mean(scores)) if scores else 0.0
    return chi2, seam, max(structure, 0.0)


def compatibility(candidate: np.ndarray, wall: np.ndarray, region: Rect,
                  weights: tuple[float, float, float] = DEFAULT_WEIGHTS) -> float:
    """Weighted mismatch of a candidate pasted into ``region``; lower is better."""
    terms = compatibility_terms(candidate, wall, region)
    return float(sum(w * t for w, t in zip(weights, terms)))


def select_tile(pool: Iterable[tuple[str, np.ndarray]], wall: np.ndarray, region: Rect,
                weights: tuple[float, float, float] = DEFAULT_WEIGHTS) -> tuple[str, float]:
    """Argmin of `compatibility` over the pool; ties go to the smallest id."""
    best = None
    for tile_id, img in pool:
        score = compatibility(img, wall, region, weights)
        if best is None or score < best[1] or (score == best[1] and tile_id < best[0]):
            best = (tile_id, score)
    if best is None:
        raise ValueError("no candidates")
    return best


def feather_blend(wall: np.ndarray, tile: np.ndarray, region: Rect, margin: int) -> np.ndarray:
    """Paste ``tile`` into ``region`` with a linear alpha ramp ``margin`` samples wide.

    The ramp runs inside the region, so samples outside it are never touched.
    """
    wall, tile = check_image(wall, "wall"), check_image(tile, "tile")
    region = Rect(*region)
    if not region.inside(wall.shape[1], wall.shape[0]):
        raise ValueError(f"rect outside image: {tuple(region)}")
    if tile.shape[:2] != (region.h, region.w) or tile.ndim != wall.ndim:
        raise ValueError("tile must be pre-resized to the region")
    if margin < 0:
        raise ValueError("margin must be >= 0")
    if 2 * margin >= min(region.w, region.h):
        raise ValueError("margin swallows region")
    out = wall.copy()
    sl = (slice(region.y, region.y + region.h), slice(region.x, region.x + region.w))
    if margin == 0:
        out[sl] = tile
        return out
    yy, xx = np.mgrid[:region.h, :region.w]
    dist = np.minimum(np.minimum(xx, region.w - 1 - xx), np.minimum(yy, region.h - 1 - yy))
    alpha = np.minimum((dist + 1) / (margin + 1), 1.0)
    if wall.ndim == 3:
        alpha = alpha[:, :, None]
    under = wall[sl].astype(np.float64)
    mixed = under + alpha * (tile.astype(np.float64) - under)
    out[sl] = np.where(alpha >= 1.0, tile, to_uint8(mixed))
    return out


@dataclass
class PlacementResult:
    index: int
    region: RegionAnnotation
    rect: Rect
    chosen_id: str
    objective: float
    composited: np.ndarray = field(repr=False)
    elapsed_ms: float = 0.0

    def report(self, timing: bool = False) -> dict:
        return {"region_index": self.index, "chosen_id": self.chosen_id,
                "objective": self.objective,
                "elapsed_ms": round(self.elapsed_ms, 3) if timing else None}


@dataclass(frozen=True)
class FillConfig:
    margin: int = 6
    weights: tuple[float, float, float] = DEFAULT_WEIGHTS


def fill_all(wall: np.ndarray, annotations: list[RegionAnnotation], pool: list[tuple[str, np.ndarray]],
             cfg: FillConfig = FillConfig()) -> tuple[np.ndarray, list[PlacementResult]]:
    """Fill every ``no_tile`` region in annotation order.

    Each selection sees the wall as left by the previous placements.
    """
    wall = check_image(wall, "wall")
    pool = sorted(pool, key=lambda item: item[0])
    ids = [i for i, _ in pool]
    if len(set(ids)) != len(ids):
        raise ValueError("candidate ids must be unique")
    out = wall.copy()
    results = []
    for index, ann in enumerate(annotations):
        if ann.cls != "no_tile":
            continue
        start = time.perf_counter()
        rect = ann.to_rect(wall.shape[1], wall.shape[0])
        chosen, objective = select_tile(pool, out, rect, cfg.weights)
        tile = dict(pool)[chosen]
        if tile.ndim != out.ndim:
            raise ValueError(f"candidate {chosen} channel count differs from the wall")
        tile = resize(tile, rect.w, rect.h, "bicubic")
        margin = min(cfg.margin, (min(rect.w, rect.h) - 1) // 2)
        out = feather_blend(out, tile, rect, margin)
        placed = out[rect.y:rect.y + rect.h, rect.x:rect.x + rect.w].copy()
        results.append(PlacementResult(index, ann, rect, chosen, objective, placed,
                                       (time.perf_counter() - start) * 1000.0))
    return out, results


def load_pool(directory: str | Path) -> list[tuple[str, np.ndarray]]:
    """Candidate tiles from a directory; ids are paths relative to it."""
    root = Path(directory)
    if not root.is_dir():
        raise ValueError(f"not a directory: {root}")
    files = sorted(p for p in root.rglob("*") if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)
    return [(p.relative_to(root).as_posix(), load_image(p)) for p in files]
