"""Blur, Sobel gradients and Canny edge detection.

The float kernels (`smooth`, `sobel_float`, `canny_stack`) operate on the last
two axes of an array so that a whole stack of patches can be processed in one
call; every sample depends only on its own image, so stacking never changes a
result.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from .imgcore import check_image, to_uint8

CANNY_SIGMA = 1.4
CANNY_LOW = 50.0
CANNY_HIGH = 150.0

_TIE_EPS = 1e-9

# NMS bin -> (dy, dx) of the neighbour in the gradient direction
_NMS_OFFSETS = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}


def gaussian_kernel(sigma: float) -> np.ndarray:
    if not sigma > 0:
        raise ValueError(f"invalid sigma: {sigma}")
    radius = math.ceil(3 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2 * sigma * sigma))
    return k / k.sum()


def smooth(arr: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian over the last two axes with clamp-to-border."""
    k = gaussian_kernel(sigma)
    out = ndimage.correlate1d(np.asarray(arr, dtype=np.float64), k, axis=-1, mode="nearest")
    return ndimage.correlate1d(out, k, axis=-2, mode="nearest")


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian blur of a gray or colour image, rounded back to bytes."""
    img = check_image(img)
    if not sigma > 0:
        raise ValueError(f"invalid sigma: {sigma}")
    if img.ndim == 2:
        return to_uint8(smooth(img, sigma))
    planes = np.moveaxis(img, -1, 0)
    return to_uint8(np.moveaxis(smooth(planes, sigma), 0, -1))


def sobel_float(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(arr, dtype=np.float64)
    diff = np.array([-1.0, 0.0, 1.0])
    tri = np.array([1.0, 2.0, 1.0])
    gx = ndimage.correlate1d(ndimage.correlate1d(arr, diff, axis=-1, mode="nearest"),
                             tri, axis=-2, mode="nearest")
    gy = ndimage.correlate1d(ndimage.correlate1d(arr, diff, axis=-2, mode="nearest"),
                             tri, axis=-1, mode="nearest")
    return gx, gy


def sobel(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel gradients (gx along columns, gy along rows) as float grids."""
    img = check_image(img)
    if img.ndim != 2:
        raise ValueError("sobel expects a single-channel image")
    if img.shape[0] < 3 or img.shape[1] < 3:
        raise ValueError("image too small")
    return sobel_float(img)


def _direction_bins(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    # 0 horizontal gradient, 1 = 45 deg, 2 = vertical, 3 = 135 deg; boundaries go to
    # the bin closer to horizontal
    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    bins = np.full(angle.shape, 2, dtype=np.int8)
    bins[(angle > 22.5) & (angle <= 67.5)] = 1
    bins[(angle >= 112.5) & (angle < 157.5)] = 3
    bins[(angle <= 22.5) | (angle >= 157.5)] = 0
    return bins


def non_max_suppression(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Thin ridges of ``mag`` along the quantized gradient direction.

    A sample survives when it is > its backward neighbour and >= its forward
    neighbour, so a plateau two samples wide keeps exactly one of them.
    Differences below a relative 1e-9 count as ties; otherwise float noise
    from the separable filters would pick plateau samples at random.
    """
    bins = _direction_bins(gx, gy)
    pad = [(0, 0)] * (mag.ndim - 2) + [(1, 1), (1, 1)]
    padded = np.pad(mag, pad, mode="edge")
    h, w = mag.shape[-2:]
    keep = np.zeros(mag.shape, dtype=bool)
    for b, (dy, dx) in _NMS_OFFSETS.items():
        fwd = padded[..., 1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
        bwd = padded[..., 1 - dy:1 - dy + h, 1 - dx:1 - dx + w]
        tol = _TIE_EPS * np.maximum(mag, 1.0)
        keep |= (bins == b) & (mag - bwd > tol) & (mag - fwd >= -tol)
    return keep


def hysteresis(weak: np.ndarray, strong: np.ndarray) -> np.ndarray:
    """Keep 8-connected components of ``weak`` that contain a strong sample."""
    structure = np.zeros((3,) * weak.ndim, dtype=bool)
    structure[(1,) * (weak.ndim - 2)] = True
    labels, count = ndimage.label(weak, structure=structure)
    if count == 0:
        return np.zeros(weak.shape, dtype=bool)
    alive = np.zeros(count + 1, dtype=bool)
    alive[np.unique(labels[strong & weak])] = True
    alive[0] = False
    return alive[labels]


def canny_stack(arr: np.ndarray, low: float = CANNY_LOW, high: float = CANNY_HIGH,
                sigma: float = CANNY_SIGMA) -> np.ndarray:
    """Boolean Canny edges for a gray image or a stack ``(..., H, W)`` of them."""
    smoothed = smooth(arr, sigma)
    gx, gy = sobel_float(smoothed)
    mag = np.hypot(gx, gy)
    thin = non_max_suppression(mag, gx, gy)
    weak = thin & (mag >= low)
    strong = weak & (mag >= high)
    return hysteresis(weak, strong)


def canny(img: np.ndarray, low: float = CANNY_LOW, high: float = CANNY_HIGH) -> np.ndarray:
    """Canny edge map with values in {0, 255}.

    Smoothing sigma is fixed at 1.4 and hysteresis uses 8-connectivity.
    """
    img = check_image(img)
    if img.ndim != 2:
        raise ValueError("canny expects a single-channel image")
    if low >= high:
        raise ValueError(f"thresholds inverted: low={low} high={high}")
    return canny_stack(img, low, high).astype(np.uint8) * 255
