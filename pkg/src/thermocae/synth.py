"""Deterministic synthetic thermal scenes of a power-conversion board.

Stands in for an unavailable camera dataset. A fixed layout of Gaussian
heat sources (transformer, switching devices, capacitors, rectifier) warms
with the load current; first-order lag dynamics connect load steps; frames
are rendered through a viewpoint homography into a 160x120, 14-bit camera
with Gaussian count noise. A compact heater hotspot can be injected as the
fault analog; its power is I^2 * R, so the fault signature scales exactly
quadratically in heater current.

Scene units are millimetres (1 scene pixel = 1 mm). Temperature maps to
counts as round(clamp((T + 10) / 150, 0, 1) * 16383).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .augment import Homography, _rotate_about, _scale, _translate, solve_homography, warp_bilinear
from .imageio import read_pgm, write_pgm
from .rng import Rng, mix

COUNTS_MAX = 16383  # 14-bit sensor
TEMP_MIN_C = -10.0
TEMP_SPAN_C = 150.0


@dataclass(frozen=True)
class HeatSource:
    x: float
    y: float
    sigma: float
    linear_c_per_a: float  # a_k: degC per ampere
    quad_c_per_a2: float  # b_k: degC per ampere squared


# fixed converter-board layout; coefficients are calibrated so the hottest
# normal pixel at full load (4 A) sits close to 56 degC
DEFAULT_SOURCES = (
    HeatSource(55.0, 62.0, 9.0, 5.5, 0.85),   # transformer
    HeatSource(88.0, 40.0, 5.0, 4.5, 0.55),   # switching device
    HeatSource(88.0, 80.0, 5.0, 4.2, 0.50),   # switching device
    HeatSource(120.0, 60.0, 6.0, 3.5, 0.45),  # rectifier
    HeatSource(35.0, 30.0, 4.0, 2.0, 0.15),   # electrolytic capacitor
    HeatSource(35.0, 92.0, 4.0, 1.8, 0.12),   # electrolytic capacitor
)


@dataclass(frozen=True)
class SceneConfig:
    frame_w: int = 160
    frame_h: int = 120
    ambient_c: float = 20.0
    tau_s: float = 30.0
    noise_counts: float = 20.0
    sources: tuple[HeatSource, ...] = DEFAULT_SOURCES

    def temperature_to_counts(self, temp_c: np.ndarray) -> np.ndarray:
        norm = np.clip((temp_c - TEMP_MIN_C) / TEMP_SPAN_C, 0.0, 1.0)
        return norm * COUNTS_MAX


@dataclass(frozen=True)
class FaultSpec:
    """Heater analog: a compact hotspot with power I^2 * R."""

    heater_current_a: float
    resistance_ohm: float = 25.0
    footprint_mm: tuple[float, float] = (12.0, 13.0)
    position: tuple[float, float] = (104.0, 78.0)
    # coupling calibrated so 0.15 A (0.5625 W) alone reaches 100 degC peak
    coupling_c_per_w: float = (100.0 - 20.0) / (0.15**2 * 25.0)

    @property
    def power_w(self) -> float:
        return self.heater_current_a**2 * self.resistance_ohm


@dataclass(frozen=True)
class LoadPattern:
    step_s: float
    duration_s: float
    frame_period_s: float
    current_range: tuple[float, float] = (0.0, 4.0)

    def __post_init__(self):
        n = self.duration_s / self.step_s
        if abs(n - round(n)) > 1e-9:
            raise ValueError(
                f"duration {self.duration_s}s is not divisible by step {self.step_s}s"
            )


TRAIN_PATTERN = LoadPattern(step_s=60.0, duration_s=1800.0, frame_period_s=3.0)
TEST_PATTERN = LoadPattern(step_s=10.0, duration_s=180.0, frame_period_s=1.0)


def load_pattern(kind: str, seed: int) -> list[tuple[float, float]]:
    """Step start times and currents for the given phase.

    Training: a new current every 60 s over 1800 s. Testing: every 10 s
    over 180 s. Currents are uniform over [0, 4] A.
    """
    pattern = {"train": TRAIN_PATTERN, "test": TEST_PATTERN}.get(kind)
    if pattern is None:
        raise ValueError(f"unknown pattern kind '{kind}'")
    rng = Rng(mix(seed, 0x10AD))
    lo, hi = pattern.current_range
    n = int(round(pattern.duration_s / pattern.step_s))
    return [(i * pattern.step_s, rng.uniform(lo, hi)) for i in range(n)]


def _grid(scene: SceneConfig) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0 : scene.frame_h, 0 : scene.frame_w]
    return xs.astype(np.float64) + 0.5, ys.astype(np.float64) + 0.5


def steady_state_field(
    scene: SceneConfig, current_a: float, fault: Optional[FaultSpec] = None
) -> np.ndarray:
    """Equilibrium temperature image (degC) on the canonical scene grid."""
    if not 0.0 <= current_a <= 4.0:
        raise ValueError(f"load current must be in [0, 4] A, got {current_a}")
    xs, ys = _grid(scene)
    temp = np.full((scene.frame_h, scene.frame_w), scene.ambient_c)
    for s in scene.sources:
        rise = s.linear_c_per_a * current_a + s.quad_c_per_a2 * current_a**2
        temp += rise * np.exp(-((xs - s.x) ** 2 + (ys - s.y) ** 2) / (2.0 * s.sigma**2))
    if fault is not None:
        if fault.heater_current_a < 0:
            raise ValueError("heater current must be >= 0")
        fw, fh = fault.footprint_mm
        sx, sy = fw / 2.3548, fh / 2.3548  # footprint read as FWHM
        fx, fy = fault.position
        footprint = np.exp(
            -((xs - fx) ** 2 / (2.0 * sx**2) + (ys - fy) ** 2 / (2.0 * sy**2))
        )
        temp += fault.coupling_c_per_w * fault.power_w * footprint
    return temp


def step_response(
    prev: np.ndarray, target: np.ndarray, dt_s: float, tau_s: float
) -> np.ndarray:
    """First-order lag toward the target field."""
    if dt_s <= 0:
        raise ValueError(f"dt must be positive, got {dt_s}")
    decay = np.exp(-dt_s / tau_s)
    return target + (prev - target) * decay


@dataclass(frozen=True)
class ViewpointPolicy:
    rotation_deg: tuple[float, float]
    scale: tuple[float, float]
    translate_frac: tuple[float, float]
    perspective: tuple[float, float]


# training frames are near-canonical; augmentation supplies the variation
TRAIN_VIEWPOINTS = ViewpointPolicy(
    rotation_deg=(-5.0, 5.0),
    scale=(0.95, 1.05),
    translate_frac=(-0.02, 0.02),
    perspective=(0.0, 0.01),
)
TEST_VIEWPOINTS = ViewpointPolicy(
    rotation_deg=(-30.0, 30.0),
    scale=(0.7, 1.3),
    translate_frac=(-0.1, 0.1),
    perspective=(0.0, 0.05),
)


def sample_viewpoint(scene: SceneConfig, policy: ViewpointPolicy, rng: Rng) -> Homography:
    """Camera pose analog: frame-to-scene map with rotation, zoom, shift, tilt."""
    w, h = float(scene.frame_w), float(scene.frame_h)
    angle = rng.uniform(*policy.rotation_deg)
    scale = rng.uniform(*policy.scale)
    tx = rng.uniform(*policy.translate_frac) * w
    ty = rng.uniform(*policy.translate_frac) * h
    d = [rng.uniform(*policy.perspective) for _ in range(8)]
    cx, cy = w / 2.0, h / 2.0
    m = _translate(tx, ty) @ _translate(cx, cy) @ _scale(scale, scale) @ _translate(-cx, -cy)
    m = m @ _rotate_about(angle, cx, cy)
    src = np.array([[0, 0], [w, 0], [w, h], [0, h]], dtype=np.float64)
    dst = np.array(
        [
            [d[0] * w, d[1] * h],
            [w - d[2] * w, d[3] * h],
            [w - d[4] * w, h - d[5] * h],
            [d[6] * w, h - d[7] * h],
        ]
    )
    m = solve_homography(src, dst) @ m
    return Homography(np.linalg.inv(m))


@dataclass
class ThermalFrame:
    counts: np.ndarray  # uint16, (frame_h, frame_w), 14-bit range
    t_s: float
    current_a: float
    fault: bool
    viewpoint: np.ndarray  # 3x3 frame-to-scene map

    def to_unit(self) -> np.ndarray:
        """Counts normalized to [0, 1] for the detection pipeline."""
        return self.counts.astype(np.float64) / COUNTS_MAX


def render_frame(
    scene: SceneConfig,
    field: np.ndarray,
    viewpoint: Homography,
    rng: Rng,
    *,
    t_s: float = 0.0,
    current_a: float = 0.0,
    fault: bool = False,
    noise_counts: Optional[float] = None,
) -> ThermalFrame:
    """Warp the scene into the camera, add count noise, quantize to 14 bits."""
    warped = warp_bilinear(
        field, viewpoint, scene.frame_w, scene.frame_h, fill=scene.ambient_c
    )
    counts = scene.temperature_to_counts(warped)
    sigma = scene.noise_counts if noise_counts is None else noise_counts
    if sigma > 0:
        counts = counts + sigma * rng.normals(counts.size).reshape(counts.shape)
    counts = np.clip(np.round(counts), 0, COUNTS_MAX).astype(np.uint16)
    return ThermalFrame(counts, t_s, current_a, fault, viewpoint.m.copy())


_KEY_VIEW = 0x71EE
_KEY_NOISE = 0x4015


def generate_split(
    scene: SceneConfig,
    kind: str,
    fault: Optional[FaultSpec] = None,
    viewpoints: Optional[ViewpointPolicy] = None,
    seed: int = 0,
) -> list[ThermalFrame]:
    """Simulate one capture session and return its frames.

    Training: 600 frames (3 s period over 1800 s), near-canonical viewpoints.
    Testing: 180 frames (1 s period over 180 s), aggressive viewpoints.
    The field starts at ambient and follows the lag dynamics through the
    load steps; a fault, when present, is active for the whole session.
    """
    pattern = {"train": TRAIN_PATTERN, "test": TEST_PATTERN}.get(kind)
    if pattern is None:
        raise ValueError(f"unknown split kind '{kind}'")
    if viewpoints is None:
        viewpoints = TRAIN_VIEWPOINTS if kind == "train" else TEST_VIEWPOINTS
    steps = load_pattern(kind, seed)

    # steady-state targets are reused across frames of the same step
    targets = [steady_state_field(scene, current, fault) for _, current in steps]
    field = np.full((scene.frame_h, scene.frame_w), scene.ambient_c)

    frames: list[ThermalFrame] = []
    dt = pattern.frame_period_s
    n_frames = int(round(pattern.duration_s / dt))
    for i in range(n_frames):
        t = (i + 1) * dt
        # the step active during (t - dt, t]
        step_idx = min(int(np.ceil(t / pattern.step_s)) - 1, len(steps) - 1)
        field = step_response(field, targets[step_idx], dt, scene.tau_s)
        vp = sample_viewpoint(scene, viewpoints, Rng(mix(seed, _KEY_VIEW, i)))
        frames.append(
            render_frame(
                scene,
                field,
                vp,
                Rng(mix(seed, _KEY_NOISE, i)),
                t_s=t,
                current_a=steps[step_idx][1],
                fault=fault is not None,
            )
        )
    return frames


def save_frames(frames: list[ThermalFrame], out_dir, heater_current_a: float = 0.0) -> None:
    """Write frames as 16-bit PGM (maxval 16383) plus a JSON-lines manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "manifest.jsonl", "w", encoding="utf-8") as mf:
        for i, fr in enumerate(frames):
            name = f"frame_{i:05d}.pgm"
            write_pgm(out_dir / name, fr.counts, maxval=COUNTS_MAX)
            mf.write(
                json.dumps(
                    {
                        "file": name,
                        "t_s": fr.t_s,
                        "current_a": fr.current_a,
                        "label": "anomalous" if fr.fault else "normal",
                        "heater_current_a": heater_current_a if fr.fault else 0.0,
                        "viewpoint": fr.viewpoint.tolist(),
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def load_frames(data_dir) -> list[ThermalFrame]:
    data_dir = Path(data_dir)
    manifest = data_dir / "manifest.jsonl"
    if not manifest.exists():
        raise FileNotFoundError(f"no frame manifest at {manifest}")
    frames = []
    with open(manifest, "r", encoding="utf-8") as mf:
        for line in mf:
            rec = json.loads(line)
            counts, _ = read_pgm(data_dir / rec["file"])
            frames.append(
                ThermalFrame(
                    counts=counts,
                    t_s=rec["t_s"],
                    current_a=rec["current_a"],
                    fault=rec["label"] == "anomalous",
                    viewpoint=np.array(rec["viewpoint"]),
                )
            )
    return frames
