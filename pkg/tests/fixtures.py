"""Synthetic images shared by the test modules and the acceptance suite."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from fracmosaic.edges import gaussian_blur
from fracmosaic.imgcore import Rect, save_image


def checker(size: int = 64, cell: int = 8) -> np.ndarray:
    y, x = np.mgrid[:size, :size]
    return np.where(((x // cell) + (y // cell)) % 2 == 0, 255, 0).astype(np.uint8)


def blurred_checker(size: int = 64, cell: int = 8, sigma: float = 2.0) -> np.ndarray:
    return gaussian_blur(checker(size, cell), sigma)


def half_plane(h: int = 64, w: int = 64) -> np.ndarray:
    img = np.zeros((h, w), dtype=np.uint8)
    img[:, w // 2:] = 255
    return img


def line_map(size: int = 512) -> np.ndarray:
    m = np.zeros((size, size), dtype=np.uint8)
    m[size // 2, :] = 255
    return m


def square_map(size: int = 512) -> np.ndarray:
    return np.full((size, size), 255, dtype=np.uint8)


def carpet(depth: int = 5) -> np.ndarray:
    """Sierpinski carpet, built recursively: 8 scaled copies around an empty centre."""
    if depth == 0:
        return np.full((1, 1), 255, dtype=np.uint8)
    sub = carpet(depth - 1)
    n = sub.shape[0]
    out = np.zeros((3 * n, 3 * n), dtype=np.uint8)
    for i in range(3):
        for j in range(3):
            if (i, j) != (1, 1):
                out[i * n:(i + 1) * n, j * n:(j + 1) * n] = sub
    return out


def textured_composite(size: int = 512, period: int = 4) -> np.ndarray:
    """Fine line grid on the left half, flat gray on the right half."""
    img = np.full((size, size), 128, dtype=np.uint8)
    y, x = np.mgrid[:size, :size // 2]
    img[:, :size // 2] = np.where((x % period == 0) | (y % period == 0), 255, 0)
    return img


def ramp_tile(h: int = 48, w: int = 64) -> np.ndarray:
    y, x = np.mgrid[:h, :w]
    return np.stack([40 + 2 * x, 60 + 2 * y, 120 + x + y], axis=-1).clip(0, 255).astype(np.uint8)


def random_tile(rng: np.random.Generator, h: int = 48, w: int = 64) -> np.ndarray:
    """Smooth color tile with a few bright blobs, so both figures carry structure."""
    base = rng.integers(30, 220, size=(h // 8 + 1, w // 8 + 1, 3)).astype(np.float64)
    tile = np.repeat(np.repeat(base, 8, axis=0), 8, axis=1)[:h, :w]
    y, x = np.mgrid[:h, :w]
    for _ in range(3):
        cy, cx, r = rng.uniform(0, h), rng.uniform(0, w), rng.uniform(4, 10)
        tile[(y - cy) ** 2 + (x - cx) ** 2 < r * r] = rng.integers(0, 256, size=3)
    return tile.clip(0, 255).astype(np.uint8)


def write_corpus(directory: Path, n: int = 10, seed: int = 7) -> list[Path]:
    rng = np.random.default_rng(seed)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for k in range(n):
        p = directory / f"tile{k:02d}.png"
        save_image(p, random_tile(rng))
        paths.append(p)
    return paths


HOLES = (Rect(16, 16, 32, 32), Rect(88, 24, 32, 32), Rect(40, 80, 40, 32))


def smooth_wall(h: int = 128, w: int = 144) -> np.ndarray:
    y, x = np.mgrid[:h, :w].astype(np.float64)
    r = 110 + 60 * np.sin(x / 23.0) + 20 * np.cos(y / 17.0)
    g = 90 + 50 * np.cos((x + y) / 29.0)
    b = 70 + 40 * np.sin(y / 13.0) * np.cos(x / 31.0)
    return np.stack([r, g, b], axis=-1).clip(0, 255).astype(np.uint8)


def holed_wall() -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    """(intact wall, wall with three black holes, cut-outs in hole order)."""
    intact = smooth_wall()
    holed = intact.copy()
    cutouts = []
    for r in HOLES:
        cutouts.append(intact[r.y:r.y + r.h, r.x:r.x + r.w].copy())
        holed[r.y:r.y + r.h, r.x:r.x + r.w] = 0
    return intact, holed, cutouts


def annotation_text(regions, width: int, height: int, cls: int = 0) -> str:
    lines = []
    for r in regions:
        cx, cy = (r.x + r.w / 2) / width, (r.y + r.h / 2) / height
        lines.append(f"{cls} {cx:.10f} {cy:.10f} {r.w / width:.10f} {r.h / height:.10f}")
    return "\n".join(lines) + "\n"


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    mse = np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2)
    return float("inf") if mse == 0 else 10 * np.log10(255.0 ** 2 / mse)
