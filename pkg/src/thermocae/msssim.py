"""Differentiable structural similarity, single- and multi-scale.

Used as the training objective (one minus MS-SSIM) and available as an
anomaly score. Local statistics use an 11x11 Gaussian window over the
"valid" region only (no padding), applied separably; scales are linked by
2x2 mean pooling, and the luminance term enters at the coarsest scale only.
All constants are the canonical literature defaults.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor

# first four canonical scale weights; renormalized to sum 1 in SsimParams
_CANONICAL_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363)


@dataclass(frozen=True)
class SsimParams:
    window: int = 11
    sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0
    n_scales: int = 4
    raw_scale_weights: tuple[float, ...] = _CANONICAL_WEIGHTS

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2

    @property
    def scale_weights(self) -> tuple[float, ...]:
        w = self.raw_scale_weights[: self.n_scales]
        if len(w) != self.n_scales or any(v <= 0 for v in w):
            raise ValueError(f"need {self.n_scales} positive scale weights, got {w}")
        s = sum(w)
        return tuple(v / s for v in w)

    @property
    def min_side(self) -> int:
        """Smallest image side that supports n_scales scales."""
        return (self.window - 1) * 2 ** (self.n_scales - 1) + 1


_window_cache: dict[tuple[int, float], np.ndarray] = {}


def gaussian_window(window: int = 11, sigma: float = 1.5) -> np.ndarray:
    """1-D Gaussian taps, normalized to sum exactly 1."""
    key = (window, sigma)
    if key not in _window_cache:
        i = np.arange(window, dtype=np.float64)
        g = np.exp(-((i - (window - 1) / 2.0) ** 2) / (2.0 * sigma * sigma))
        _window_cache[key] = g / g.sum()
    return _window_cache[key]


def _blur(x: Tensor, g: np.ndarray) -> Tensor:
    """Separable valid-region Gaussian filtering of (N,1,H,W)."""
    k = g.shape[0]
    gv = Tensor(g.reshape(1, 1, k, 1))
    gh = Tensor(g.reshape(1, 1, 1, k))
    return T.correlate2d(T.correlate2d(x, gv), gh)


def _check_pair(x: Tensor, y: Tensor) -> None:
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if x.ndim != 4 or x.shape[1] != 1:
        raise ValueError(f"expected (N,1,H,W) image batches, got {x.shape}")


def _ssim_terms(x: Tensor, y: Tensor, params: SsimParams) -> tuple[Tensor, Tensor]:
    """Luminance and contrast-structure maps over the valid region."""
    g = gaussian_window(params.window, params.sigma)
    mu_x = _blur(x, g)
    mu_y = _blur(y, g)
    xx = _blur(x * x, g)
    yy = _blur(y * y, g)
    xy = _blur(x * y, g)
    var_x = xx - mu_x * mu_x
    var_y = yy - mu_y * mu_y
    cov = xy - mu_x * mu_y
    c1, c2 = params.c1, params.c2
    lum = (2.0 * (mu_x * mu_y) + c1) / (mu_x * mu_x + mu_y * mu_y + c1)
    cs = (2.0 * cov + c2) / (var_x + var_y + c2)
    return lum, cs


def ssim(x: Tensor, y: Tensor, params: SsimParams = SsimParams()) -> Tensor:
    """Single-scale SSIM per image; returns a (N,) tensor."""
    _check_pair(x, y)
    if min(x.shape[2], x.shape[3]) < params.window:
        raise ValueError(
            f"image sides must be >= window {params.window}, got {x.shape[2]}x{x.shape[3]}"
        )
    lum, cs = _ssim_terms(x, y, params)
    return (lum * cs).mean(axis=(1, 2, 3))


def ms_ssim(x: Tensor, y: Tensor, params: SsimParams = SsimParams()) -> Tensor:
    """Multi-scale SSIM per image; returns a (N,) tensor.

    Product over scales of the mean contrast-structure term raised to the
    scale weight; the coarsest scale uses the full luminance-weighted index.
    Terms are clamped at zero before exponentiation so fractional powers
    stay real.
    """
    _check_pair(x, y)
    if min(x.shape[2], x.shape[3]) < params.min_side:
        raise ValueError(
            f"ms_ssim with {params.n_scales} scales and window {params.window} needs "
            f"image sides >= {params.min_side}, got {x.shape[2]}x{x.shape[3]}"
        )
    weights = params.scale_weights
    result = None
    for s, w in enumerate(weights):
        lum, cs = _ssim_terms(x, y, params)
        if s < params.n_scales - 1:
            term = T.pos_pow(cs.mean(axis=(1, 2, 3)), w)
            x = T.avg_pool2(x)
            y = T.avg_pool2(y)
        else:
            term = T.pos_pow((lum * cs).mean(axis=(1, 2, 3)), w)
        result = term if result is None else result * term
    return result


def msssim_loss(x: Tensor, x_hat: Tensor, params: SsimParams = SsimParams()) -> Tensor:
    """Training objective: one minus the batch-mean MS-SSIM (scalar tensor)."""
    return 1.0 - ms_ssim(x, x_hat, params).mean()
