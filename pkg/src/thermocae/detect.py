"""Anomaly maps, scalar scores, ROC curves, and heatmap export.

A reconstruction residual |x - x_hat| becomes a scalar score either as the
maximum after k x k box smoothing (default; robust to the thin edge residue
a good reconstruction leaves behind) or as the plain mean. Scores sweep
into an ROC curve whose trapezoidal AUC matches the tie-corrected pairwise
statistic.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .imageio import write_pgm, write_ppm


def anomaly_map(x: np.ndarray, x_hat: np.ndarray) -> np.ndarray:
    """Pointwise absolute difference between input and reconstruction."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_hat.shape}")
    return np.abs(x - x_hat)


def box_smooth(image: np.ndarray, k: int) -> np.ndarray:
    """k x k box mean; windows are clipped at borders and normalized by the
    number of in-image pixels, so a constant image stays constant."""
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    if k < 1 or k % 2 == 0:
        raise ValueError(f"box size must be odd and >= 1, got {k}")
    if k > min(h, w):
        raise ValueError(f"box size {k} exceeds image {h}x{w}")
    r = k // 2

    # summed-area table with a zero border; clipped window bounds per pixel
    ys, xs = np.mgrid[0:h, 0:w]
    y0 = np.clip(ys - r, 0, h)
    y1 = np.clip(ys + r + 1, 0, h)
    x0 = np.clip(xs - r, 0, w)
    x1 = np.clip(xs + r + 1, 0, w)
    s = np.zeros((h + 1, w + 1))
    np.cumsum(np.cumsum(img, axis=0), axis=1, out=s[1:, 1:])
    sums = s[y1, x1] - s[y0, x1] - s[y1, x0] + s[y0, x0]
    counts = (y1 - y0) * (x1 - x0)
    return sums / counts


def anomaly_score(amap: np.ndarray, method: str = "smoothed_max", smooth_k: int = 5) -> float:
    """Reduce an anomaly map to a scalar; higher means more anomalous."""
    amap = np.asarray(amap, dtype=np.float64)
    if amap.size == 0:
        raise ValueError("anomaly map is empty")
    if method == "smoothed_max":
        return float(box_smooth(amap, smooth_k).max())
    if method == "mean":
        return float(amap.mean())
    raise ValueError(f"unknown score method '{method}'")


@dataclass
class RocCurve:
    points: list[tuple[float, float]]  # (fpr, tpr) from (0,0) to (1,1)
    thresholds: list[float]  # score >= threshold classifies as anomalous
    auc: float

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write("threshold,fpr,tpr\n")
            for thr, (fpr, tpr) in zip(self.thresholds, self.points):
                f.write(f"{thr!r},{fpr:.9f},{tpr:.9f}\n")


def roc_points(scores: Sequence[float], labels: Sequence[int]) -> RocCurve:
    """Threshold sweep over every distinct score; AUC by trapezoid.

    Labels are 1 for anomalous, 0 for normal; classification is
    score >= threshold means anomalous. Both classes must be present.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-D sequences")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both classes present")

    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    l_sorted = labels[order]

    points = [(0.0, 0.0)]
    thresholds = [float("inf")]
    tp = fp = 0
    i = 0
    n = len(s_sorted)
    while i < n:
        j = i
        while j < n and s_sorted[j] == s_sorted[i]:  # tie group moves together
            tp += int(l_sorted[j] == 1)
            fp += int(l_sorted[j] == 0)
            j += 1
        points.append((fp / n_neg, tp / n_pos))
        thresholds.append(float(s_sorted[i]))
        i = j
    # the final group always lands on (1, 1)
    auc = 0.0
    for (x0, y0), (x1, y1) in zip(points[:-1], points[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2.0
    return RocCurve(points=points, thresholds=thresholds, auc=auc)


# ---------------------------------------------------------------------------
# visualization

_IRON_STOPS = (
    (0.00, (0, 0, 0)),
    (0.15, (32, 0, 82)),
    (0.35, (120, 12, 117)),
    (0.55, (196, 59, 73)),
    (0.75, (240, 130, 27)),
    (0.90, (252, 205, 63)),
    (1.00, (255, 255, 255)),
)


def iron_colormap() -> np.ndarray:
    """Fixed 256-entry RGB table, dark-to-hot, interpolated from anchors."""
    pos = np.array([p for p, _ in _IRON_STOPS])
    rgb = np.array([c for _, c in _IRON_STOPS], dtype=np.float64)
    t = np.linspace(0.0, 1.0, 256)
    table = np.stack([np.interp(t, pos, rgb[:, c]) for c in range(3)], axis=1)
    return np.round(table).astype(np.uint8)


_IRON_TABLE = iron_colormap()


def export_heatmap(image: np.ndarray, path, colormap: str = "gray") -> None:
    """Write a min-max normalized 8-bit heatmap (PGM for gray, PPM for iron).

    A constant image (degenerate normalization) maps to 0 everywhere.
    """
    img = np.asarray(image, dtype=np.float64)
    lo, hi = float(img.min()), float(img.max())
    if hi > lo:
        levels = np.round((img - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        levels = np.zeros(img.shape, dtype=np.uint8)
    path = Path(path)
    if colormap == "gray":
        write_pgm(path, levels, maxval=255)
    elif colormap == "iron":
        write_ppm(path, _IRON_TABLE[levels], maxval=255)
    else:
        raise ValueError(f"unknown colormap '{colormap}'")
