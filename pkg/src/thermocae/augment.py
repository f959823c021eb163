"""Image augmentation: pad, rotate, perspective, crop, photometrics, resize.

The geometric stages are composed into one homography and the image is
resampled exactly once with bilinear interpolation, which avoids compounding
interpolation blur. Homographies use continuous image coordinates: pixel
(row i, col j) has its center at (x, y) = (j + 0.5, i + 0.5) and an image of
size W x H spans [0, W] x [0, H]. Matrices map OUTPUT coordinates back to
SOURCE coordinates (inverse warping).

Stage parameters and defaults: pad to 150% of the original, rotation within
[-45, 45] degrees about the padded-image center, perspective corner
displacements up to 10% of each dimension, crop window between 44% and 100%
of the original side with its center uniform over the allowed area,
brightness/contrast within +/-10% around mid-gray, resize to 128x128.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .imageio import read_pgm, write_pgm
from .rng import Rng, mix


@dataclass(frozen=True)
class AugmentParams:
    pad_factor: float = 1.5
    rotation_deg: tuple[float, float] = (-45.0, 45.0)
    perspective_scale: tuple[float, float] = (0.0, 0.1)
    crop_fraction: tuple[float, float] = (0.44, 1.0)
    brightness_delta: tuple[float, float] = (-0.10, 0.10)
    contrast_delta: tuple[float, float] = (-0.10, 0.10)
    out_size: int = 128
    enable_rotation: bool = True
    enable_perspective: bool = True
    enable_crop: bool = True
    enable_brightness_contrast: bool = True

    def __post_init__(self):
        for name in ("rotation_deg", "perspective_scale", "crop_fraction",
                     "brightness_delta", "contrast_delta"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range ({lo}, {hi}) is not well-ordered")
        if self.out_size < 8:
            raise ValueError(f"out_size must be >= 8, got {self.out_size}")
        if self.pad_factor < 1.0:
            raise ValueError(f"pad_factor must be >= 1, got {self.pad_factor}")

    def disable(self, stage: str) -> "AugmentParams":
        flag = f"enable_{stage}"
        if not hasattr(self, flag):
            raise ValueError(f"unknown augmentation stage '{stage}'")
        return replace(self, **{flag: False})


STAGES = ("rotation", "perspective", "crop", "brightness_contrast")


@dataclass(frozen=True)
class SampledAug:
    """One concrete draw of the augmentation chain.

    corner_shift holds eight inward displacement coefficients
    (tl.x, tl.y, tr.x, tr.y, br.x, br.y, bl.x, bl.y), each a fraction of the
    padded width or height. crop_center_u/v place the window center within
    its allowed interval (0 = leftmost/topmost, 1 = rightmost/bottommost).
    """

    angle_deg: float = 0.0
    corner_shift: tuple[float, ...] = (0.0,) * 8
    crop_fraction: float = 1.0
    crop_center_u: float = 0.5
    crop_center_v: float = 0.5
    brightness: float = 0.0
    contrast: float = 0.0


def sample_aug(params: AugmentParams, rng: Rng) -> SampledAug:
    """Uniform draw from each enabled stage; disabled stages stay identity."""
    angle = rng.uniform(*params.rotation_deg) if params.enable_rotation else 0.0
    if params.enable_perspective:
        lo, hi = params.perspective_scale
        corners = tuple(rng.uniform(lo, hi) for _ in range(8))
    else:
        corners = (0.0,) * 8
    if params.enable_crop:
        frac = rng.uniform(*params.crop_fraction)
        cu, cv = rng.random(), rng.random()
    else:
        frac, cu, cv = 1.0, 0.5, 0.5
    if params.enable_brightness_contrast:
        b = rng.uniform(*params.brightness_delta)
        c = rng.uniform(*params.contrast_delta)
    else:
        b, c = 0.0, 0.0
    return SampledAug(angle, corners, frac, cu, cv, b, c)


class Homography:
    """3x3 projective map, normalized so m[2][2] == 1 when possible."""

    __slots__ = ("m",)

    def __init__(self, m: np.ndarray):
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (3, 3):
            raise ValueError(f"homography must be 3x3, got {m.shape}")
        if abs(np.linalg.det(m)) <= 1e-12:
            raise ValueError("homography is not invertible")
        if abs(m[2, 2]) > 1e-12:
            m = m / m[2, 2]
        self.m = m

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.m))

    def compose(self, other: "Homography") -> "Homography":
        """self applied after other (matrix product self.m @ other.m)."""
        return Homography(self.m @ other.m)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map (n,2) points through the homography."""
        pts = np.asarray(points, dtype=np.float64)
        ones = np.ones((pts.shape[0], 1))
        q = np.hstack([pts, ones]) @ self.m.T
        return q[:, :2] / q[:, 2:3]

    @staticmethod
    def identity() -> "Homography":
        return Homography(np.eye(3))


def _translate(tx: float, ty: float) -> np.ndarray:
    m = np.eye(3)
    m[0, 2], m[1, 2] = tx, ty
    return m


def _scale(sx: float, sy: float) -> np.ndarray:
    return np.diag([sx, sy, 1.0])


def _rotate_about(angle_deg: float, cx: float, cy: float) -> np.ndarray:
    a = np.deg2rad(angle_deg)
    c, s = np.cos(a), np.sin(a)
    r = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return _translate(cx, cy) @ r @ _translate(-cx, -cy)


def solve_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """3x3 matrix mapping four source points onto four destination points."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    a = np.zeros((8, 8))
    rhs = np.zeros(8)
    for i in range(4):
        x, y = src[i]
        u, v = dst[i]
        a[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        a[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        rhs[2 * i], rhs[2 * i + 1] = u, v
    h = np.linalg.solve(a, rhs)
    return np.array([[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], 1.0]])


def build_homography(
    img_w: int, img_h: int, aug: SampledAug, params: AugmentParams
) -> Homography:
    """Single output-to-source map for the full geometric chain."""
    if img_w <= 0 or img_h <= 0:
        raise ValueError(f"image dimensions must be positive, got {img_w}x{img_h}")
    w0, h0 = float(img_w), float(img_h)
    w1, h1 = params.pad_factor * w0, params.pad_factor * h0

    m_pad = _translate((w1 - w0) / 2.0, (h1 - h0) / 2.0)
    m_rot = _rotate_about(aug.angle_deg, w1 / 2.0, h1 / 2.0)

    d = aug.corner_shift
    src_corners = np.array([[0, 0], [w1, 0], [w1, h1], [0, h1]], dtype=np.float64)
    dst_corners = np.array(
        [
            [d[0] * w1, d[1] * h1],
            [w1 - d[2] * w1, d[3] * h1],
            [w1 - d[4] * w1, h1 - d[5] * h1],
            [d[6] * w1, h1 - d[7] * h1],
        ]
    )
    m_persp = solve_homography(src_corners, dst_corners)

    # crop window: side = fraction of the original (pre-pad) image, center
    # uniform over positions keeping the window inside the padded canvas
    cw, ch = aug.crop_fraction * w0, aug.crop_fraction * h0
    cx = cw / 2.0 + aug.crop_center_u * (w1 - cw)
    cy = ch / 2.0 + aug.crop_center_v * (h1 - ch)
    out = float(params.out_size)
    m_crop_resize = _scale(out / cw, out / ch) @ _translate(-(cx - cw / 2.0), -(cy - ch / 2.0))

    forward = m_crop_resize @ m_persp @ m_rot @ m_pad
    return Homography(np.linalg.inv(forward))


def warp_bilinear(
    image: np.ndarray, h: Homography, out_w: int, out_h: int, fill: float = 0.0
) -> np.ndarray:
    """Inverse-map warp with bilinear interpolation; out-of-bounds -> fill."""
    img = np.asarray(image, dtype=np.float64)
    ih, iw = img.shape
    ys, xs = np.meshgrid(
        np.arange(out_h, dtype=np.float64) + 0.5,
        np.arange(out_w, dtype=np.float64) + 0.5,
        indexing="ij",
    )
    m = h.m
    denom = m[2, 0] * xs + m[2, 1] * ys + m[2, 2]
    flat = np.abs(denom) < 1e-12
    denom = np.where(flat, 1.0, denom)
    sx = (m[0, 0] * xs + m[0, 1] * ys + m[0, 2]) / denom - 0.5
    sy = (m[1, 0] * xs + m[1, 1] * ys + m[1, 2]) / denom - 0.5

    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0
    x0i = x0.astype(np.int64)
    y0i = y0.astype(np.int64)

    def tap(yi, xi):
        inside = (xi >= 0) & (xi < iw) & (yi >= 0) & (yi < ih)
        vals = img[np.clip(yi, 0, ih - 1), np.clip(xi, 0, iw - 1)]
        return np.where(inside, vals, fill)

    v00 = tap(y0i, x0i)
    v01 = tap(y0i, x0i + 1)
    v10 = tap(y0i + 1, x0i)
    v11 = tap(y0i + 1, x0i + 1)
    out = (
        (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01)
        + fy * ((1.0 - fx) * v10 + fx * v11)
    )
    return np.where(flat, fill, out)


def adjust_brightness_contrast(image: np.ndarray, b: float, c: float) -> np.ndarray:
    """Contrast pivots at mid-gray; output clamped to [0, 1]."""
    return np.clip((np.asarray(image, dtype=np.float64) - 0.5) * (1.0 + c) + 0.5 + b, 0.0, 1.0)


def augment_one(original: np.ndarray, params: AugmentParams, rng: Rng) -> np.ndarray:
    """Full chain applied to one image; output is out_size x out_size in [0,1]."""
    img = np.asarray(original, dtype=np.float64)
    if img.size == 0:
        raise ValueError("cannot augment an empty image")
    aug = sample_aug(params, rng)
    h, w = img.shape
    try:
        hom = build_homography(w, h, aug, params)
    except ValueError:
        aug = sample_aug(params, rng)  # degenerate draw: resample once
        hom = build_homography(w, h, aug, params)
    warped = warp_bilinear(img, hom, params.out_size, params.out_size, fill=0.0)
    return adjust_brightness_contrast(warped, aug.brightness, aug.contrast)


def resize_plain(image: np.ndarray, params: AugmentParams) -> np.ndarray:
    """Identity chain: plain bilinear resize to out_size x out_size."""
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    hom = build_homography(w, h, SampledAug(), params)
    return warp_bilinear(img, hom, params.out_size, params.out_size, fill=0.0)


# ---------------------------------------------------------------------------
# dataset assembly

_KEY_ITEM = 0x11E3
_KEY_SPLIT = 0x5713


@dataclass
class AugDataset:
    train: np.ndarray
    val: np.ndarray
    records: list[dict] = field(default_factory=list)


def build_dataset(
    originals: list[np.ndarray], n_total: int, params: AugmentParams, seed: int
) -> AugDataset:
    """Originals (resized only) plus augmented draws, split 90/10.

    The total count includes the originals; sources for synthetic draws are
    chosen uniformly. Each item derives its own rng stream from (seed, index)
    so generation is order-independent; the split is a seeded permutation.
    """
    if not originals:
        raise ValueError("build_dataset needs at least one original image")
    if n_total < len(originals):
        raise ValueError(f"n_total {n_total} is smaller than the {len(originals)} originals")

    size = params.out_size
    images = np.empty((n_total, size, size), dtype=np.float64)
    records: list[dict] = []
    for i, img in enumerate(originals):
        images[i] = resize_plain(img, params)
        records.append({"index": i, "kind": "original", "source": i})
    for i in range(len(originals), n_total):
        rng = Rng(mix(seed, _KEY_ITEM, i))
        src = rng.randint(len(originals))
        aug = sample_aug(params, rng)
        h, w = originals[src].shape
        try:
            hom = build_homography(w, h, aug, params)
        except ValueError:
            aug = sample_aug(params, rng)
            hom = build_homography(w, h, aug, params)
        warped = warp_bilinear(originals[src], hom, size, size, fill=0.0)
        images[i] = adjust_brightness_contrast(warped, aug.brightness, aug.contrast)
        records.append(
            {
                "index": i,
                "kind": "augmented",
                "source": src,
                "angle_deg": aug.angle_deg,
                "corner_shift": list(aug.corner_shift),
                "crop_fraction": aug.crop_fraction,
                "crop_center": [aug.crop_center_u, aug.crop_center_v],
                "brightness": aug.brightness,
                "contrast": aug.contrast,
            }
        )

    n_val = n_total // 10
    perm = Rng(mix(seed, _KEY_SPLIT)).permutation(n_total)
    train_idx = sorted(perm[n_val:])
    val_idx = sorted(perm[:n_val])
    for i in train_idx:
        records[i]["split"] = "train"
    for i in val_idx:
        records[i]["split"] = "val"
    return AugDataset(train=images[train_idx], val=images[val_idx], records=records)


def save_dataset(ds: AugDataset, out_dir) -> None:
    """Persist as 16-bit PGM files plus a JSON-lines manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_split = {"train": ds.train, "val": ds.val}
    counters = {"train": 0, "val": 0}
    with open(out_dir / "manifest.jsonl", "w", encoding="utf-8") as mf:
        for rec in ds.records:
            split = rec["split"]
            img = by_split[split][counters[split]]
            counters[split] += 1
            name = f"{split}_{rec['index']:05d}.pgm"
            write_pgm(out_dir / name, np.round(img * 65535.0).astype(np.uint16), maxval=65535)
            mf.write(json.dumps({"file": name, **rec}, sort_keys=True) + "\n")


def load_dataset(data_dir) -> AugDataset:
    """Load a persisted dataset; pixel values are re-normalized to [0, 1]."""
    data_dir = Path(data_dir)
    manifest = data_dir / "manifest.jsonl"
    if not manifest.exists():
        raise FileNotFoundError(f"no dataset manifest at {manifest}")
    train, val, records = [], [], []
    with open(manifest, "r", encoding="utf-8") as mf:
        for line in mf:
            rec = json.loads(line)
            counts, maxval = read_pgm(data_dir / rec["file"])
            img = counts.astype(np.float64) / maxval
            (train if rec["split"] == "train" else val).append(img)
            records.append(rec)
    return AugDataset(train=np.array(train), val=np.array(val), records=records)
