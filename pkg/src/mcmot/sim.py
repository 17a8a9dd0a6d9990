"""Seeded synthetic multi-camera scenarios: ground-truth identities with
constant-velocity trajectories, noisy detections, and identity-consistent
noisy embeddings.

All randomness comes from numpy's Philox bit generator (a named 64-bit
counter-based PRNG), so a fixed seed reproduces streams bit-for-bit across
runs and platforms. Draw order is fixed: ground embeddings first, then per
camera (sorted) per frame per identity, then false positives.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import BoundingBox, Detection


class ConfigError(ValueError):
    """Invalid or unsatisfiable scenario/pipeline configuration."""


@dataclass(frozen=True)
class Occlusion:
    """Region of one camera that blocks detections during [frame_start, frame_end]."""

    camera: int
    frame_start: int
    frame_end: int
    region: tuple[float, float, float, float]  # tlbr

    def blocks(self, camera: int, frame: int, box: BoundingBox) -> bool:
        if camera != self.camera or not self.frame_start <= frame <= self.frame_end:
            return False
        cx, cy = box.x + box.w / 2.0, box.y + box.h / 2.0
        x1, y1, x2, y2 = self.region
        return x1 <= cx <= x2 and y1 <= cy <= y2


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario knobs.

    embedding_noise_sigma is the RMS norm of the additive Gaussian noise
    vector (per-component std sigma/sqrt(D)), so sigma compares directly with
    identity_min_separation on the unit sphere. box_jitter_sigma perturbs the
    emitted detection boxes; camera_motion_sigma adds a shared per-frame
    random-walk offset to all boxes of a camera (moving-camera mode).
    """

    seed: int = 0
    cameras: int = 3
    identities: int = 10
    frames: int = 300
    image_size: tuple[int, int] = (1920, 1080)
    embedding_dim: int = 512
    embedding_noise_sigma: float = 0.0
    identity_min_separation: float = 1.0
    miss_prob: float = 0.0
    false_positive_rate: float = 0.0
    occlusions: tuple[Occlusion, ...] = ()
    box_jitter_sigma: float = 0.0
    camera_motion_sigma: float = 0.0
    speed_max: float = 3.0
    box_width_range: tuple[float, float] = (70.0, 110.0)
    box_height_range: tuple[float, float] = (120.0, 200.0)
    fp_size_range: tuple[float, float] = (15.0, 55.0)

    def __post_init__(self) -> None:
        if self.identities < 1 or self.cameras < 1 or self.frames < 1:
            raise ConfigError("cameras, identities and frames must be >= 1")
        if self.identity_min_separation <= 0:
            raise ConfigError("identity_min_separation must be > 0")
        if not 0.0 <= self.miss_prob <= 1.0:
            raise ConfigError("miss_prob must be in [0, 1]")
        if (
            self.box_width_range[1] >= self.image_size[0]
            or self.box_height_range[1] >= self.image_size[1]
        ):
            raise ConfigError("object boxes must fit inside the image")


@dataclass(eq=False)
class GroundTruth:
    """Per-camera per-frame identity boxes plus one unit embedding per identity."""

    embeddings: np.ndarray  # (identities, D), unit rows
    boxes: dict[int, list[list[tuple[int, BoundingBox]]]] = field(default_factory=dict)

    @property
    def identity_count(self) -> int:
        return self.embeddings.shape[0]

    def frames_of(self, camera: int) -> dict[int, list[tuple[int, BoundingBox]]]:
        return {f: entries for f, entries in enumerate(self.boxes[camera])}


def _sample_ground_embeddings(rng: np.random.Generator, cfg: ScenarioConfig) -> np.ndarray:
    """Uniform unit-sphere samples, rejected until pairwise separation holds."""
    accepted: list[np.ndarray] = []
    attempts = 0
    max_attempts = 1000 * cfg.identities
    while len(accepted) < cfg.identities:
        if attempts >= max_attempts:
            raise ConfigError(
                f"cannot place {cfg.identities} identities at pairwise separation "
                f">= {cfg.identity_min_separation} in dimension {cfg.embedding_dim}"
            )
        attempts += 1
        v = rng.normal(size=cfg.embedding_dim)
        v /= np.linalg.norm(v)
        if all(
            np.linalg.norm(v - u) >= cfg.identity_min_separation for u in accepted
        ):
            accepted.append(v)
    return np.asarray(accepted)


def _sample_trajectory(
    rng: np.random.Generator, cfg: ScenarioConfig
) -> tuple[float, float, float, float, float, float]:
    """(x0, y0, vx, vy, w, h) with the whole constant-velocity path in bounds."""
    img_w, img_h = cfg.image_size
    w = rng.uniform(*cfg.box_width_range)
    h = rng.uniform(*cfg.box_height_range)
    span = max(cfg.frames - 1, 1)

    def axis(extent: float) -> tuple[float, float]:
        vcap = max(0.0, min(cfg.speed_max, (extent - 1e-6) / span))
        v = rng.uniform(-vcap, vcap)
        lo = max(0.0, -v * span)
        hi = min(extent, extent - v * span)
        return rng.uniform(lo, hi), v

    x0, vx = axis(img_w - w)
    y0, vy = axis(img_h - h)
    return x0, y0, vx, vy, w, h


def _noisy_embedding(rng: np.random.Generator, ground: np.ndarray, sigma: float) -> np.ndarray:
    if sigma == 0.0:
        return ground.copy()
    noise = rng.normal(scale=sigma / np.sqrt(ground.shape[0]), size=ground.shape[0])
    e = ground + noise
    return e / np.linalg.norm(e)


def generate(cfg: ScenarioConfig) -> tuple[GroundTruth, dict[int, list[Detection]]]:
    """Build the ground truth and one detection stream per camera.

    Deterministic given cfg.seed. Every emitted box lies within the image;
    with zero noise, every detection's embedding equals its identity's ground
    embedding exactly.
    """
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    img_w, img_h = cfg.image_size
    ground = _sample_ground_embeddings(rng, cfg)
    truth = GroundTruth(embeddings=ground)
    streams: dict[int, list[Detection]] = {}

    for camera in range(cfg.cameras):
        trajectories = [_sample_trajectory(rng, cfg) for _ in range(cfg.identities)]
        if cfg.camera_motion_sigma > 0:
            steps = rng.normal(scale=cfg.camera_motion_sigma, size=(cfg.frames, 2))
            drift = np.cumsum(steps, axis=0)
        else:
            drift = np.zeros((cfg.frames, 2))

        frames: list[list[tuple[int, BoundingBox]]] = []
        dets: list[Detection] = []
        for f in range(cfg.frames):
            entries: list[tuple[int, BoundingBox]] = []
            raw = []
            for identity, (x0, y0, vx, vy, w, h) in enumerate(trajectories):
                raw.append((identity, x0 + vx * f, y0 + vy * f, w, h))
            # Shared camera offset, clamped so every box stays in bounds.
            dx, dy = drift[f]
            if raw and (dx or dy):
                dx = float(np.clip(dx, -min(r[1] for r in raw), img_w - max(r[1] + r[3] for r in raw)))
                dy = float(np.clip(dy, -min(r[2] for r in raw), img_h - max(r[2] + r[4] for r in raw)))
            for identity, x, y, w, h in raw:
                box = BoundingBox(x + dx, y + dy, w, h)
                entries.append((identity, box))
                if any(o.blocks(camera, f, box) for o in cfg.occlusions):
                    continue
                if cfg.miss_prob > 0 and rng.random() < cfg.miss_prob:
                    continue
                dets.append(
                    Detection(
                        frame=f,
                        box=_jitter_box(rng, box, cfg.box_jitter_sigma, img_w, img_h),
                        confidence=float(rng.uniform(0.5, 1.0)),
                        class_id=0,
                        embedding=_noisy_embedding(
                            rng, ground[identity], cfg.embedding_noise_sigma
                        ),
                    )
                )
            if cfg.false_positive_rate > 0:
                for _ in range(rng.poisson(cfg.false_positive_rate)):
                    fw = rng.uniform(*cfg.fp_size_range)
                    fh = rng.uniform(*cfg.fp_size_range)
                    fx = rng.uniform(0.0, img_w - fw)
                    fy = rng.uniform(0.0, img_h - fh)
                    e = rng.normal(size=cfg.embedding_dim)
                    dets.append(
                        Detection(
                            frame=f,
                            box=BoundingBox(fx, fy, fw, fh),
                            confidence=float(rng.uniform(0.5, 1.0)),
                            class_id=0,
                            embedding=e / np.linalg.norm(e),
                        )
                    )
            frames.append(entries)
        truth.boxes[camera] = frames
        streams[camera] = dets
    return truth, streams


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    doc = dataclasses.asdict(cfg)
    doc["image_size"] = list(cfg.image_size)
    doc["box_width_range"] = list(cfg.box_width_range)
    doc["box_height_range"] = list(cfg.box_height_range)
    doc["fp_size_range"] = list(cfg.fp_size_range)
    doc["occlusions"] = [
        {
            "camera": o.camera,
            "frame_start": o.frame_start,
            "frame_end": o.frame_end,
            "region": list(o.region),
        }
        for o in cfg.occlusions
    ]
    return doc


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    """Strict parse of a scenario config document; unknown keys are rejected."""
    if not isinstance(doc, dict):
        raise ConfigError("scenario config must be a JSON object")
    doc = dict(doc)
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown scenario config key {unknown[0]!r}")
    if "occlusions" in doc:
        try:
            doc["occlusions"] = tuple(
                Occlusion(
                    camera=int(o["camera"]),
                    frame_start=int(o["frame_start"]),
                    frame_end=int(o["frame_end"]),
                    region=tuple(float(v) for v in o["region"]),
                )
                for o in doc["occlusions"]
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed occlusion entry: {exc}") from exc
    for key in ("image_size", "box_width_range", "box_height_range", "fp_size_range"):
        if key in doc:
            doc[key] = tuple(doc[key])
    return ScenarioConfig(**doc)


def _jitter_box(
    rng: np.random.Generator, box: BoundingBox, sigma: float, img_w: float, img_h: float
) -> BoundingBox:
    if sigma == 0.0:
        return box
    x = box.x + rng.normal(scale=sigma)
    y = box.y + rng.normal(scale=sigma)
    w = max(1.0, box.w + rng.normal(scale=sigma / 2.0))
    h = max(1.0, box.h + rng.normal(scale=sigma / 2.0))
    w = min(w, img_w)
    h = min(h, img_h)
    return BoundingBox(float(np.clip(x, 0.0, img_w - w)), float(np.clip(y, 0.0, img_h - h)), w, h)
