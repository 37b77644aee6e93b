"""MosaicSlice augmentation: recombining the two figures of terracotta tiles.

Intra mixing rearranges the two figures of one tile in the eight
flip/order compositions and softens the junction.  Inter mixing brings a
figure in from a second tile after sepia colour normalization, offsets its
placement by the median centre distance and refines the pasted boundary.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .edges import canny, gaussian_blur, smooth, sobel_float
from .imgcore import Rect, check_image, crop, hflip, resize, round_half_away, to_grayscale, to_uint8

SEPIA = np.array([
    [0.393, 0.769, 0.189],
    [0.349, 0.686, 0.168],
    [0.272, 0.534, 0.131],
])
CODES = ("AB", "AB'", "A'B", "A'B'", "BA", "BA'", "B'A", "B'A'")
PARTNERS_PER_TILE = 3


@dataclass(frozen=True)
class TileFigures:
    tile: np.ndarray
    figure_a: Rect
    figure_b: Rect

    def __post_init__(self):
        tile = check_image(self.tile)
        object.__setattr__(self, "tile", tile)
        object.__setattr__(self, "figure_a", Rect(*self.figure_a))
        object.__setattr__(self, "figure_b", Rect(*self.figure_b))
        h, w = tile.shape[:2]
        for name, r in (("figure_a", self.figure_a), ("figure_b", self.figure_b)):
            if not r.inside(w, h):
                raise ValueError(f"{name} rect outside image: {tuple(r)}")
        if self.figure_a.overlaps(self.figure_b):
            raise ValueError("figure rects overlap")

    @classmethod
    def split(cls, tile: np.ndarray) -> "TileFigures":
        """Figures taken as the left and right halves of the tile."""
        tile = check_image(tile)
        h, w = tile.shape[:2]
        if w < 2:
            raise ValueError("tile too narrow to split")
        half = w // 2
        return cls(tile, Rect(0, 0, half, h), Rect(half, 0, w - half, h))


def read_rects(path: str | Path) -> tuple[Rect, Rect]:
    """Parse a ``.rects`` sidecar with lines ``A x y w h`` and ``B x y w h``."""
    found = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 5 or parts[0] not in ("A", "B"):
            raise ValueError(f"{path}:{lineno}: expected 'A|B x y w h'")
        try:
            found[parts[0]] = Rect(*(int(v) for v in parts[1:]))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-integer rect value") from None
    if set(found) != {"A", "B"}:
        raise ValueError(f"{path}: both A and B rects are required")
    return found["A"], found["B"]


def load_figures(tile: np.ndarray, sidecar: str | Path | None = None) -> TileFigures:
    if sidecar is not None and Path(sidecar).exists():
        a, b = read_rects(sidecar)
        return TileFigures(tile, a, b)
    return TileFigures.split(tile)


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from arbitrary printable parts."""
    text = "\x1f".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.sha256(text).digest()[:8], "little")


def _require_color(img: np.ndarray, what: str) -> np.ndarray:
    img = check_image(img)
    if img.ndim != 3:
        raise ValueError(f"{what} requires color")
    return img


def sepia(img: np.ndarray) -> np.ndarray:
    img = _require_color(img, "sepia")
    return to_uint8(img.astype(np.float64) @ SEPIA.T)


def inverse_sepia(img: np.ndarray, method: str = "gain") -> np.ndarray:
    """Undo the sepia tone's brightness change.

    ``gain`` divides each channel by the sepia row sum, which inverts the
    filter exactly on neutral tones and stays well conditioned on bytes.
    ``pinv`` applies the Moore-Penrose pseudo-inverse of the sepia matrix;
    that matrix has condition number ~1.7e4, so byte rounding noise is
    amplified and most results clamp.
    """
    img = _require_color(img, "inverse_sepia")
    if method == "gain":
        out = img.astype(np.float64) / SEPIA.sum(axis=1)
    elif method == "pinv":
        out = img.astype(np.float64) @ np.linalg.pinv(SEPIA).T
    else:
        raise ValueError(f"unknown inverse_sepia method {method!r}")
    return to_uint8(out)


def average_blend(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = check_image(a, "a"), check_image(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return to_uint8((a.astype(np.float64) + b.astype(np.float64)) / 2.0)


def center_distance(a: Rect, b: Rect) -> float:
    (ax, ay), (bx, by) = Rect(*a).center, Rect(*b).center
    return math.hypot(bx - ax, by - ay)


def median_blur(img: np.ndarray, ksize: int = 3) -> np.ndarray:
    img = check_image(img)
    if ksize < 3 or ksize % 2 == 0:
        raise ValueError(f"ksize must be odd and >= 3, got {ksize}")
    size = (ksize, ksize) if img.ndim == 2 else (ksize, ksize, 1)
    return ndimage.median_filter(img, size=size, mode="nearest")


def motion_kernel(length: int, angle: float) -> np.ndarray:
    """Normalized line kernel of ``length`` samples at ``angle`` degrees."""
    if length < 1:
        raise ValueError(f"motion length must be >= 1, got {length}")
    size = length if length % 2 else length + 1
    c = size // 2
    k = np.zeros((size, size))
    theta = math.radians(angle)
    for t in np.linspace(-(length - 1) / 2.0, (length - 1) / 2.0, 4 * length):
        x = int(round_half_away(c + t * math.cos(theta)))
        y = int(round_half_away(c - t * math.sin(theta)))
        k[y, x] = 1.0
    return k / k.sum()


def _blur_full(img: np.ndarray, mode: str, sigma: float, length: int, angle: float) -> np.ndarray:
    if mode == "gaussian":
        return gaussian_blur(img, sigma)
    if mode == "motion":
        k = motion_kernel(length, angle)
        planes = img[:, :, None] if img.ndim == 2 else img
        out = np.stack([ndimage.correlate(planes[:, :, c].astype(np.float64), k, mode="nearest")
                        for c in range(planes.shape[2])], axis=-1)
        out = to_uint8(out)
        return out[:, :, 0] if img.ndim == 2 else out
    raise ValueError(f"unknown blur mode {mode!r}")


def seam_blur(img: np.ndarray, seam: Rect, mode: str = "gaussian", sigma: float = 2.0,
              length: int = 9, angle: float = 0.0) -> np.ndarray:
    """Blur only the samples inside ``seam``; everything else is copied."""
    img = check_image(img)
    seam = Rect(*seam)
    out = img.copy()
    if seam.w <= 0 or seam.h <= 0:
        return out
    h, w = img.shape[:2]
    if not seam.inside(w, h):
        raise ValueError(f"seam outside image: {tuple(seam)}")
    blurred = _blur_full(img, mode, sigma, length, angle)
    sl = (slice(seam.y, seam.y + seam.h), slice(seam.x, seam.x + seam.w))
    out[sl] = blurred[sl]
    return out


def parse_code(code: str) -> tuple[tuple[str, bool], tuple[str, bool]]:
    """``"A'B"`` -> ``(("A", True), ("B", False))``."""
    if code not in CODES:
        raise ValueError(f"unknown composition {code!r}")
    first = (code[0], code[1] == "'")
    rest = code[2:] if first[1] else code[1:]
    return first, (rest[0], rest.endswith("'"))


def _figure(tile: np.ndarray, rect: Rect, flipped: bool, slot: Rect) -> np.ndarray:
    fig = crop(tile, rect)
    if flipped:
        fig = hflip(fig)
    if (fig.shape[1], fig.shape[0]) != (slot.w, slot.h):
        fig = resize(fig, slot.w, slot.h, "bicubic")
    return fig


def _paste(canvas: np.ndarray, fig: np.ndarray, at: Rect) -> None:
    canvas[at.y:at.y + at.h, at.x:at.x + at.w] = fig


def junction(slot_a: Rect, slot_b: Rect, seam_width: int, width: int, height: int) -> Rect:
    """Strip of ``seam_width`` samples centred between two figure slots."""
    if seam_width <= 0:
        return Rect(0, 0, 0, 0)
    left, right = sorted((slot_a, slot_b), key=lambda r: r.x)
    if left.x + left.w <= right.x:
        mid = (left.x + left.w + right.x) // 2
        y0 = min(slot_a.y, slot_b.y)
        y1 = max(slot_a.y + slot_a.h, slot_b.y + slot_b.h)
        x0 = max(0, mid - seam_width // 2)
        x1 = min(width, x0 + seam_width)
        return Rect(x0, y0, x1 - x0, y1 - y0)
    top, bottom = sorted((slot_a, slot_b), key=lambda r: r.y)
    mid = (top.y + top.h + bottom.y) // 2
    x0 = min(slot_a.x, slot_b.x)
    x1 = max(slot_a.x + slot_a.w, slot_b.x + slot_b.w)
    y0 = max(0, mid - seam_width // 2)
    y1 = min(height, y0 + seam_width)
    return Rect(x0, y0, x1 - x0, y1 - y0)


def compose(t: TileFigures, code: str) -> np.ndarray:
    """Place the two figures of ``code`` into the tile's A and B slots, unblended."""
    (f1, flip1), (f2, flip2) = parse_code(code)
    rects = {"A": t.figure_a, "B": t.figure_b}
    canvas = t.tile.copy()
    _paste(canvas, _figure(t.tile, rects[f1], flip1, t.figure_a), t.figure_a)
    _paste(canvas, _figure(t.tile, rects[f2], flip2, t.figure_b), t.figure_b)
    return canvas


def intra_mosaicslice(t: TileFigures, seam_width: int = 8, mode: str = "gaussian",
                      sigma: float = 2.0, length: int = 9, angle: float = 0.0) -> list[np.ndarray]:
    """The eight compositions, in the order of `CODES`."""
    h, w = t.tile.shape[:2]
    seam = junction(t.figure_a, t.figure_b, seam_width, w, h)
    return [seam_blur(compose(t, code), seam, mode, sigma, length, angle) for code in CODES]


def median_offset(distances: list[float]) -> float:
    """Median of the distances; for an even count the two middle values are
    resolved by the mode of the rounded distances, falling back to the lower."""
    vals = sorted(distances)
    n = len(vals)
    if n == 0:
        raise ValueError("no distances")
    if n % 2:
        return vals[n // 2]
    lo, hi = vals[n // 2 - 1], vals[n // 2]
    if lo == hi:
        return lo
    counts = Counter(int(round_half_away(v)) for v in vals)
    best = max(counts.values())
    modes = {m for m, c in counts.items() if c == best}
    if int(round_half_away(hi)) in modes and int(round_half_away(lo)) not in modes:
        return hi
    return lo


def harris_response(gray: np.ndarray, k: float = 0.04, sigma: float = 1.0) -> np.ndarray:
    gx, gy = sobel_float(gray)
    sxx = smooth(gx * gx, sigma)
    syy = smooth(gy * gy, sigma)
    sxy = smooth(gx * gy, sigma)
    return sxx * syy - sxy * sxy - k * (sxx + syy) ** 2


def _outline(rect: Rect, width: int, height: int, half: int = 1) -> np.ndarray:
    """Boolean band of ``2*half+1`` samples straddling the rect boundary."""
    band = np.zeros((height, width), dtype=bool)
    x0, y0 = rect.x, rect.y
    x1, y1 = rect.x + rect.w - 1, rect.y + rect.h - 1
    ys = slice(max(0, y0 - half), min(height, y1 + half + 1))
    xs = slice(max(0, x0 - half), min(width, x1 + half + 1))
    for x in (x0, x1):
        band[ys, max(0, x - half):min(width, x + half + 1)] = True
    for y in (y0, y1):
        band[max(0, y - half):min(height, y + half + 1), xs] = True
    return band


def _strongest(response: np.ndarray, band: np.ndarray) -> tuple[int, int] | None:
    if not band.any():
        return None
    masked = np.where(band, response, -np.inf)
    y, x = np.unravel_index(int(np.argmax(masked)), masked.shape)
    return int(x), int(y)


@dataclass
class InterMix:
    image: np.ndarray
    code: str
    offset: float
    shift: tuple[int, int]
    warnings: list[str] = field(default_factory=list)


def _scale_rect(r: Rect, sx: float, sy: float, width: int, height: int) -> Rect:
    x = min(int(round_half_away(r.x * sx)), width - 1)
    y = min(int(round_half_away(r.y * sy)), height - 1)
    w = max(1, min(int(round_half_away(r.w * sx)), width - x))
    h = max(1, min(int(round_half_away(r.h * sy)), height - y))
    return Rect(x, y, w, h)


def _place(canvas: np.ndarray, fig1: np.ndarray, slot1: Rect, fig2: np.ndarray, at: Rect,
           ksize: int) -> np.ndarray:
    """Paste both figures into a sepia canvas, refine the outlines, restore brightness.

    Only outline samples next to a sample the paste changed are median
    filtered, and never those on a Canny edge.
    """
    h, w = canvas.shape[:2]
    out = canvas.copy()
    _paste(out, fig1, slot1)
    _paste(out, fig2, at)
    band = _outline(slot1, w, h) | _outline(at, w, h)
    changed = ndimage.binary_dilation((out != canvas).any(axis=-1), structure=np.ones((3, 3), dtype=bool))
    edges = canny(to_grayscale(out)) > 0
    refine = band & changed & ~edges
    out = np.where(refine[:, :, None], median_blur(out, ksize), out)
    return inverse_sepia(out)


def inter_mix(a: TileFigures, b: TileFigures, seed: int, code: str = "AB",
              ksize: int = 3) -> InterMix:
    """Mix figure A of tile ``a`` with figure B of tile ``b``.

    Both tiles are sepia toned and averaged into a canvas; the figures named
    by ``code`` are pasted into the A and B slots of ``a`` (the second one
    displaced by the median centre distance in a seeded direction), the
    pasted outlines are median filtered except on Canny edges, and the
    brightness is restored by `inverse_sepia`.
    """
    ta = _require_color(a.tile, "inter_mosaicslice")
    tb = _require_color(b.tile, "inter_mosaicslice")
    h, w = ta.shape[:2]
    sx, sy = w / tb.shape[1], h / tb.shape[0]
    if tb.shape != ta.shape:
        tb = resize(tb, w, h, "bicubic")
    b_rects = {"A": _scale_rect(b.figure_a, sx, sy, w, h), "B": _scale_rect(b.figure_b, sx, sy, w, h)}

    sa, sb = sepia(ta), sepia(tb)
    canvas = average_blend(sa, sb)
    sources = {"A": (sa, a.figure_a), "B": (sb, b_rects["B"])}

    distances = [center_distance(a.figure_a, b_rects["A"]), center_distance(a.figure_b, b_rects["B"])]
    offset = median_offset(distances)
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2.0 * math.pi)

    (f1, flip1), (f2, flip2) = parse_code(code)
    slot1, slot2 = a.figure_a, a.figure_b
    fig1 = _figure(sources[f1][0], sources[f1][1], flip1, slot1)
    fig2 = _figure(sources[f2][0], sources[f2][1], flip2, slot2)
    dx = int(round_half_away(offset * math.cos(theta)))
    dy = int(round_half_away(offset * math.sin(theta)))
    placed = Rect(min(max(slot2.x + dx, 0), w - slot2.w), min(max(slot2.y + dy, 0), h - slot2.h),
                  slot2.w, slot2.h)
    image = _place(canvas, fig1, slot1, fig2, placed, ksize)

    # the zero-shift composite is the reference for measuring how far the figure moved
    reference = image if placed == slot2 else _place(canvas, fig1, slot1, fig2, slot2, ksize)
    warnings = []
    src = _strongest(harris_response(to_grayscale(reference).astype(np.float64)), _outline(slot2, w, h))
    dst = _strongest(harris_response(to_grayscale(image).astype(np.float64)), _outline(placed, w, h))
    shift = (placed.x - slot2.x, placed.y - slot2.y)
    applied = math.hypot(*shift)
    if (placed.x, placed.y) != (slot2.x + dx, slot2.y + dy):
        warnings.append(f"offset {offset:.2f} clamped to tile bounds, applied {applied:.2f}")
    if src is not None and dst is not None:
        measured = math.hypot(dst[0] - src[0], dst[1] - src[1])
        if abs(measured - applied) > max(0.1 * applied, 1.0):
            warnings.append(f"harris distance {measured:.2f} differs from applied shift {applied:.2f} by more than 10%")
    return InterMix(image, code, offset, shift, warnings)


def inter_mosaicslice(a: TileFigures, b: TileFigures, seed: int, code: str = "AB") -> np.ndarray:
    return inter_mix(a, b, seed, code).image


def inter_partners(n_tiles: int, index: int, seed: int, k: int = PARTNERS_PER_TILE) -> list[int]:
    """Seeded partner choice for tile ``index``: ``k`` others without replacement,
    cycling through all others when fewer than ``k`` exist."""
    if n_tiles < 2:
        raise ValueError("inter mixing needs at least two tiles")
    others = [j for j in range(n_tiles) if j != index]
    rng = np.random.default_rng(derive_seed(seed, "partners", index))
    if len(others) >= k:
        return [int(j) for j in rng.choice(others, size=k, replace=False)]
    order = [others[j] for j in rng.permutation(len(others))]
    return [order[i % len(order)] for i in range(k)]
