"""Numeric kernels for generator losses, layer-wise updates and feature mixing.

Feature grids are float arrays of shape ``(H, W)`` or ``(H, W, C)``; every
kernel rejects non-finite input.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np


def as_grid(g, name: str = "grid") -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    if g.ndim not in (2, 3):
        raise ValueError(f"{name} must be (H, W) or (H, W, C), got shape {g.shape}")
    if not np.isfinite(g).all():
        raise ValueError(f"{name} contains NaN or Inf")
    return g


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")


def _scores(values: Sequence[float], name: str) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError(f"{name} batch is empty")
    if not np.isfinite(v).all():
        raise ValueError(f"{name} batch contains NaN or Inf")
    return v


def wasserstein_loss(real: Sequence[float], fake: Sequence[float]) -> float:
    """Mean critic score on real samples minus mean score on generated ones."""
    return float(_scores(real, "real").mean() - _scores(fake, "fake").mean())


def js_loss(real: Sequence[float], fake: Sequence[float]) -> float:
    """``0.5 * mean(ln D(x)) + 0.5 * mean(ln(1 - D(G(z))))`` over probabilities."""
    r, f = _scores(real, "real"), _scores(fake, "fake")
    for name, v in (("real", r), ("fake", f)):
        if ((v <= 0) | (v >= 1)).any():
            raise ValueError(f"not a probability: {name} values must lie in (0, 1)")
    return float(0.5 * np.log(r).mean() + 0.5 * np.log1p(-f).mean())


def combined_loss(w: float, js: float, lam: float) -> float:
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    return lam * w + (1.0 - lam) * js


def equalized_update(params, grads, lr: float, alpha_i: float) -> np.ndarray:
    """One descent step with a layer-specific learning-rate coefficient."""
    p, g = as_grid(params, "params"), as_grid(grads, "grads")
    _same_shape(p, g)
    if not lr > 0:
        raise ValueError(f"lr must be positive, got {lr}")
    if not alpha_i >= 0:
        raise ValueError(f"alpha_i must be nonnegative, got {alpha_i}")
    return p - alpha_i * lr * g


@dataclass(frozen=True)
class SplineCurve:
    """Piecewise cubic; segment i is
    ``a0 + a1*(x-x_i) + a2*(x-x_i)**2 + a3*(x-x_i)**3`` on ``[x_i, x_{i+1}]``."""

    knots: np.ndarray
    coeffs: np.ndarray  # (n_segments, 4) as a0..a3

    def segment_index(self, x) -> np.ndarray:
        idx = np.searchsorted(self.knots, x, side="right") - 1
        return np.clip(idx, 0, len(self.knots) - 2)

    def segment_value(self, i: int, x, deriv: int = 0):
        a0, a1, a2, a3 = self.coeffs[i]
        d = np.asarray(x, dtype=np.float64) - self.knots[i]
        if deriv == 0:
            return a0 + d * (a1 + d * (a2 + d * a3))
        if deriv == 1:
            return a1 + d * (2 * a2 + 3 * a3 * d)
        if deriv == 2:
            return 2 * a2 + 6 * a3 * d
        raise ValueError("deriv must be 0, 1 or 2")

    def __call__(self, x, deriv: int = 0):
        x = np.asarray(x, dtype=np.float64)
        idx = self.segment_index(x)
        a = self.coeffs[idx]
        d = x - self.knots[idx]
        if deriv == 0:
            return a[..., 0] + d * (a[..., 1] + d * (a[..., 2] + d * a[..., 3]))
        if deriv == 1:
            return a[..., 1] + d * (2 * a[..., 2] + 3 * a[..., 3] * d)
        if deriv == 2:
            return 2 * a[..., 2] + 6 * a[..., 3] * d
        raise ValueError("deriv must be 0, 1 or 2")


def _thomas(sub: np.ndarray, diag: np.ndarray, sup: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    n = len(diag)
    c = np.zeros(n)
    d = np.zeros(n)
    c[0] = sup[0] / diag[0] if n > 1 else 0.0
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - sub[i] * c[i - 1]
        c[i] = sup[i] / m if i < n - 1 else 0.0
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m
    out = np.zeros(n)
    out[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        out[i] = d[i] - c[i] * out[i + 1]
    return out


def cubic_spline_fit(points: Sequence[tuple[float, float]]) -> SplineCurve:
    """Natural cubic spline (zero end curvature) through ``points``."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError("need at least two (x, y) points")
    if not np.isfinite(pts).all():
        raise ValueError("points contain NaN or Inf")
    x, y = pts[:, 0], pts[:, 1]
    h = np.diff(x)
    if (h <= 0).any():
        raise ValueError("x values must be strictly increasing")

    n = len(x)
    m = np.zeros(n)  # second derivatives at the knots
    if n > 2:
        slopes = np.diff(y) / h
        rhs = 6.0 * np.diff(slopes)
        diag = 2.0 * (h[:-1] + h[1:])
        sub = np.concatenate([[0.0], h[1:-1]])
        sup = np.concatenate([h[1:-1], [0.0]])
        m[1:-1] = _thomas(sub, diag, sup, rhs)

    a0 = y[:-1]
    a1 = (y[1:] - y[:-1]) / h - h * (2.0 * m[:-1] + m[1:]) / 6.0
    a2 = m[:-1] / 2.0
    a3 = (m[1:] - m[:-1]) / (6.0 * h)
    return SplineCurve(x.copy(), np.stack([a0, a1, a2, a3], axis=1))


@lru_cache(maxsize=1)
def _fade_curve() -> SplineCurve:
    return cubic_spline_fit([(0.0, 0.0), (0.5, 0.5), (1.0, 1.0)])


def fade_weight(t: float) -> float:
    """Mixing weight of the high-resolution grid at fade progress ``t``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    return float(np.clip(_fade_curve()(t), 0.0, 1.0))


def spline_blend(lo, hi, t: float) -> np.ndarray:
    lo, hi = as_grid(lo, "lo"), as_grid(hi, "hi")
    _same_shape(lo, hi)
    w = fade_weight(t)
    return (1.0 - w) * lo + w * hi


def convex_blend(prev, conv, alpha: float) -> np.ndarray:
    prev, conv = as_grid(prev, "prev"), as_grid(conv, "conv")
    _same_shape(prev, conv)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return alpha * prev + (1.0 - alpha) * conv


def nn_upsample(g, factor: int) -> np.ndarray:
    """Nearest-neighbour upsampling: ``out[y, x] = g[y // factor, x // factor]``."""
    g = as_grid(g)
    if int(factor) != factor or factor < 1:
        raise ValueError(f"factor must be an integer >= 1, got {factor}")
    factor = int(factor)
    return np.repeat(np.repeat(g, factor, axis=0), factor, axis=1)


def feature_correct(prev, upsampled) -> np.ndarray:
    prev, upsampled = as_grid(prev, "prev"), as_grid(upsampled, "upsampled")
    _same_shape(prev, upsampled)
    return prev + upsampled
