"""Raster image primitives shared by every pipeline stage.

Images are plain ``numpy.ndarray`` objects of dtype ``uint8``: ``(H, W)`` for
single channel and ``(H, W, 3)`` for colour, channel order RGB.  Every function
here returns a new array and never mutates its input.
"""

from __future__ import annotations

import io
import os
import tempfile
from pathlib import Path
from typing import NamedTuple

import numpy as np
from PIL import Image

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
RESIZE_MODES = ("nearest", "bilinear", "bicubic")


class Rect(NamedTuple):
    """Axis-aligned pixel rectangle with a top-left origin."""

    x: int
    y: int
    w: int
    h: int

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def inside(self, width: int, height: int) -> bool:
        return (self.w >= 1 and self.h >= 1 and self.x >= 0 and self.y >= 0
                and self.x + self.w <= width and self.y + self.h <= height)

    def intersect(self, other: "Rect") -> "Rect | None":
        x0, y0 = max(self.x, other.x), max(self.y, other.y)
        x1 = min(self.x + self.w, other.x + other.w)
        y1 = min(self.y + self.h, other.y + other.h)
        if x1 <= x0 or y1 <= y0:
            return None
        return Rect(x0, y0, x1 - x0, y1 - y0)

    def overlaps(self, other: "Rect") -> bool:
        return self.intersect(other) is not None


def round_half_away(values) -> np.ndarray:
    """Round half away from zero, the single rounding rule of the package."""
    values = np.asarray(values, dtype=np.float64)
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def to_uint8(values) -> np.ndarray:
    """Round and clamp floating samples into bytes."""
    return np.clip(round_half_away(values), 0, 255).astype(np.uint8)


def check_image(img: np.ndarray, name: str = "image") -> np.ndarray:
    img = np.asarray(img)
    if img.dtype != np.uint8:
        raise ValueError(f"{name} must be uint8, got {img.dtype}")
    if img.ndim == 2 or (img.ndim == 3 and img.shape[2] in (1, 3)):
        if img.shape[0] < 1 or img.shape[1] < 1:
            raise ValueError(f"{name} is empty")
        if img.ndim == 3 and img.shape[2] == 1:
            img = img[:, :, 0]
        return img
    raise ValueError(f"{name} must have shape (H, W) or (H, W, 3), got {img.shape}")


def channels(img: np.ndarray) -> int:
    return 1 if img.ndim == 2 else img.shape[2]


def from_bgr(img: np.ndarray) -> np.ndarray:
    """Normalize a BGR-ordered colour array to the internal RGB order."""
    img = check_image(img)
    return img if img.ndim == 2 else np.ascontiguousarray(img[:, :, ::-1])


def to_grayscale(img: np.ndarray) -> np.ndarray:
    """BT.601 luma; single-channel input passes through unchanged."""
    img = check_image(img)
    if img.ndim == 2:
        return img.copy()
    rgb = img.astype(np.float64)
    luma = LUMA_WEIGHTS[0] * rgb[..., 0] + LUMA_WEIGHTS[1] * rgb[..., 1] + LUMA_WEIGHTS[2] * rgb[..., 2]
    return to_uint8(luma)


def hflip(img: np.ndarray) -> np.ndarray:
    img = check_image(img)
    return np.ascontiguousarray(img[:, ::-1])


def crop(img: np.ndarray, r: Rect) -> np.ndarray:
    img = check_image(img)
    r = Rect(*r)
    if not r.inside(img.shape[1], img.shape[0]):
        raise ValueError(f"rect outside image: {tuple(r)} vs {img.shape[1]}x{img.shape[0]}")
    return img[r.y:r.y + r.h, r.x:r.x + r.w].copy()


def _cubic_kernel(t: np.ndarray, a: float = -0.5) -> np.ndarray:
    t = np.abs(t)
    t2, t3 = t * t, t * t * t
    near = (a + 2) * t3 - (a + 3) * t2 + 1
    far = a * t3 - 5 * a * t2 + 8 * a * t - 4 * a
    return np.where(t <= 1, near, np.where(t < 2, far, 0.0))


def _axis_taps(n_in: int, n_out: int, mode: str) -> tuple[np.ndarray, np.ndarray]:
    """Source indices and weights, shape (n_out, taps), for one axis."""
    dst = np.arange(n_out)
    if mode == "nearest":
        idx = (dst * n_in) // n_out
        return idx[:, None], np.ones((n_out, 1))
    src = (dst + 0.5) * (n_in / n_out) - 0.5
    if mode == "bilinear":
        base = np.floor(src).astype(np.int64)
        offsets = np.arange(0, 2)
        weights = 1.0 - np.abs(src[:, None] - (base[:, None] + offsets))
    else:
        base = np.floor(src).astype(np.int64)
        offsets = np.arange(-1, 3)
        weights = _cubic_kernel(src[:, None] - (base[:, None] + offsets))
    idx = np.clip(base[:, None] + offsets, 0, n_in - 1)
    weights = weights / weights.sum(axis=1, keepdims=True)
    return idx, weights


def resize(img: np.ndarray, new_w: int, new_h: int, mode: str = "bicubic") -> np.ndarray:
    """Separable resampling with half-pixel centres and clamp-to-border.

    Bicubic uses the Keys kernel with a = -0.5.  No antialiasing is applied
    when shrinking.
    """
    img = check_image(img)
    if mode not in RESIZE_MODES:
        raise ValueError(f"unknown resize mode {mode!r}")
    if new_w < 1 or new_h < 1:
        raise ValueError("empty target")
    h, w = img.shape[:2]
    if (new_w, new_h) == (w, h):
        return img.copy()

    src = img.astype(np.float64)
    if src.ndim == 2:
        src = src[:, :, None]
    # the tap loops accumulate in a fixed order, which keeps results byte-stable
    ridx, rw = _axis_taps(h, new_h, mode)
    rows = np.zeros((new_h, w, src.shape[2]))
    for k in range(ridx.shape[1]):
        rows += rw[:, k, None, None] * src[ridx[:, k]]
    cidx, cw = _axis_taps(w, new_w, mode)
    out = np.zeros((new_h, new_w, src.shape[2]))
    for k in range(cidx.shape[1]):
        out += cw[None, :, k, None] * rows[:, cidx[:, k]]
    out = to_uint8(out)
    return out[:, :, 0] if img.ndim == 2 else out


def load_image(path: str | os.PathLike, bgr: bool = False) -> np.ndarray:
    """Read an 8-bit PNG/JPEG as gray ``(H, W)`` or RGB ``(H, W, 3)``.

    ``bgr=True`` declares that the file stores its colour planes in BGR order.
    """
    with Image.open(path) as im:
        gray = im.mode in ("1", "L", "LA")
        arr = np.asarray(im.convert("L" if gray else "RGB"))
    arr = np.ascontiguousarray(arr, dtype=np.uint8)
    return from_bgr(arr) if bgr else arr


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_image(img: np.ndarray, fmt: str = "PNG") -> bytes:
    img = check_image(img)
    buf = io.BytesIO()
    kwargs = {"quality": 95} if fmt.upper() in ("JPEG", "JPG") else {}
    Image.fromarray(img).save(buf, format="JPEG" if fmt.upper() == "JPG" else fmt.upper(), **kwargs)
    return buf.getvalue()


def save_image(path: str | os.PathLike, img: np.ndarray) -> None:
    """Write PNG or JPEG (picked by suffix) via temp file + rename."""
    suffix = Path(path).suffix.lower()
    fmt = "JPEG" if suffix in (".jpg", ".jpeg") else "PNG"
    atomic_write_bytes(path, encode_image(img, fmt))
