"""Deterministic synthetic scenarios: ground truth plus corrupted detections.

Objects follow constant-velocity (optionally turning) trajectories;
detections are the true boxes with Gaussian position noise, dropped
inside per-object occlusion windows, mixed with Poisson-count false
positives carrying low confidences. Embeddings are drawn around one
mean vector per identity (or per group, to model lookalike objects).

All randomness comes from an explicitly specified generator so the
same config reproduces byte-identical files anywhere; see SplitMix64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Box3D, wrap_angle
from .io_formats import Detection, LabelRecord

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 sequence generator.

    State advances by the 64-bit odd constant 0x9E3779B97F4A7C15; each
    output is the new state mixed by xor-shift-multiply:

        z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
        z ^= z >> 27; z *= 0x94D049BB133111EB
        z ^= z >> 31

    (all arithmetic mod 2^64). Floats take the top 53 bits of an
    output, normals use the Box-Muller transform on two floats, and
    Poisson counts use Knuth's product-of-uniforms method.
    """

    def __init__(self, seed: int):
        self._state = seed & _MASK64
        self._spare_normal: float | None = None

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        if self._spare_normal is not None:
            z = self._spare_normal
            self._spare_normal = None
        else:
            u1 = ((self.next_u64() >> 11) + 1) * (1.0 / (1 << 53))  # (0, 1]
            u2 = self.random()
            r = math.sqrt(-2.0 * math.log(u1))
            z = r * math.cos(2.0 * math.pi * u2)
            self._spare_normal = r * math.sin(2.0 * math.pi * u2)
        return mu + sigma * z

    def poisson(self, lam: float) -> int:
        if lam <= 0.0:
            return 0
        limit = math.exp(-lam)
        k, p = 0, 1.0
        while True:
            p *= self.random()
            if p <= limit:
                return k
            k += 1


@dataclass
class ObjectSpec:
    """Explicit initial conditions for one simulated object."""

    x: float
    y: float
    vx: float
    vy: float
    group: int | None = None  # objects in one group share an embedding mean


@dataclass
class ScenarioConfig:
    num_objects: int = 10
    num_frames: int = 100
    extent: float = 80.0  # world square is [-extent/2, extent/2]^2
    speed_min: float = 0.3  # meters per frame
    speed_max: float = 1.0
    turn_rate: float = 0.0  # radians per frame applied to every velocity
    # (object_index, start_frame, num_frames): detections dropped inside.
    occlusions: list[tuple[int, int, int]] = field(default_factory=list)
    fp_rate: float = 0.0  # expected false positives per frame
    # 0 scatters false positives uniformly; > 0 drops them around a
    # random object with this sigma (ghost / double detections).
    fp_near_sigma: float = 0.0
    pos_noise: float = 0.0  # detection position sigma, meters
    tp_score_mean: float = 1.0
    tp_score_sigma: float = 0.0
    fp_score_low: float = 0.3
    fp_score_high: float = 0.6
    embedding_dim: int = 0  # 0 disables embeddings
    embedding_noise: float = 0.1
    box_l: float = 4.0
    box_w: float = 1.8
    box_h: float = 1.5
    object_type: str = "Car"
    # Overrides random placement when given; num_objects then follows it.
    objects: list[ObjectSpec] | None = None
    seed: int = 0

    def __post_init__(self):
        for name in ("fp_rate", "pos_noise", "tp_score_sigma", "embedding_noise"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.objects is not None:
            self.num_objects = len(self.objects)


def _clip01(v: float) -> float:
    return min(1.0, max(0.0, v))


def _occluded(cfg: ScenarioConfig, obj: int, frame: int) -> bool:
    for index, start, length in cfg.occlusions:
        if index == obj and start <= frame < start + length:
            return True
    return False


def generate(cfg: ScenarioConfig) -> tuple[list[LabelRecord], list[Detection]]:
    """Produce ground-truth labels and detection records for a scenario."""
    rng = SplitMix64(cfg.seed)
    half = 0.4 * cfg.extent  # spawn inside 80% of the world
    z0 = 0.5 * cfg.box_h

    if cfg.objects is not None:
        specs = list(cfg.objects)
    else:
        specs = []
        for _ in range(cfg.num_objects):
            x = rng.uniform(-half, half)
            y = rng.uniform(-half, half)
            speed = rng.uniform(cfg.speed_min, cfg.speed_max)
            angle = rng.uniform(-math.pi, math.pi)
            specs.append(
                ObjectSpec(x=x, y=y, vx=speed * math.cos(angle), vy=speed * math.sin(angle))
            )

    means: list[np.ndarray] = []
    if cfg.embedding_dim > 0:
        group_means: dict[int, np.ndarray] = {}
        for i, spec in enumerate(specs):
            key = spec.group if spec.group is not None else -(i + 1)
            if key not in group_means:
                group_means[key] = np.array(
                    [rng.normal() for _ in range(cfg.embedding_dim)]
                )
            means.append(group_means[key])

    # Per-object pose advanced frame by frame; turn_rate bends every path.
    states = [
        [spec.x, spec.y, math.hypot(spec.vx, spec.vy), math.atan2(spec.vy, spec.vx)]
        for spec in specs
    ]

    labels: list[LabelRecord] = []
    detections: list[Detection] = []
    for frame in range(cfg.num_frames):
        for i, state in enumerate(states):
            x, y, speed, angle = state
            heading = wrap_angle(angle)
            gt_box = Box3D(x, y, z0, cfg.box_l, cfg.box_w, cfg.box_h, heading)
            labels.append(LabelRecord(frame, i, cfg.object_type, gt_box))
            state[0] = x + speed * math.cos(angle)
            state[1] = y + speed * math.sin(angle)
            state[3] = angle + cfg.turn_rate

            if _occluded(cfg, i, frame):
                continue
            det_box = Box3D(
                x + rng.normal(0.0, cfg.pos_noise) if cfg.pos_noise else x,
                y + rng.normal(0.0, cfg.pos_noise) if cfg.pos_noise else y,
                z0 + rng.normal(0.0, cfg.pos_noise) if cfg.pos_noise else z0,
                cfg.box_l,
                cfg.box_w,
                cfg.box_h,
                heading,
            )
            score = (
                _clip01(rng.normal(cfg.tp_score_mean, cfg.tp_score_sigma))
                if cfg.tp_score_sigma
                else _clip01(cfg.tp_score_mean)
            )
            embedding = None
            if cfg.embedding_dim > 0:
                embedding = means[i] + np.array(
                    [rng.normal(0.0, cfg.embedding_noise) for _ in range(cfg.embedding_dim)]
                )
            detections.append(Detection(frame, det_box, score, embedding))

        for _ in range(rng.poisson(cfg.fp_rate)):
            if cfg.fp_near_sigma > 0.0 and states:
                anchor = states[int(rng.random() * len(states)) % len(states)]
                fx = anchor[0] + rng.normal(0.0, cfg.fp_near_sigma)
                fy = anchor[1] + rng.normal(0.0, cfg.fp_near_sigma)
            else:
                fx = rng.uniform(-0.5 * cfg.extent, 0.5 * cfg.extent)
                fy = rng.uniform(-0.5 * cfg.extent, 0.5 * cfg.extent)
            fp_box = Box3D(
                fx,
                fy,
                z0,
                cfg.box_l,
                cfg.box_w,
                cfg.box_h,
                rng.uniform(-math.pi, math.pi),
            )
            score = _clip01(rng.uniform(cfg.fp_score_low, cfg.fp_score_high))
            embedding = None
            if cfg.embedding_dim > 0:
                embedding = np.array([rng.normal() for _ in range(cfg.embedding_dim)])
            detections.append(Detection(frame, fp_box, score, embedding))

    return labels, detections


def crossing_objects(
    num_pairs: int, span: float = 40.0, lane_gap: float = 8.0, speed: float = 0.8
) -> list[ObjectSpec]:
    """Pairs of lookalike objects driving toward each other on shared lanes.

    Each pair shares an embedding group, so appearance alone cannot
    tell its members apart; their paths meet mid-sequence.
    """
    specs = []
    y0 = -0.5 * (num_pairs - 1) * lane_gap
    for j in range(num_pairs):
        y = y0 + j * lane_gap
        specs.append(ObjectSpec(x=-0.5 * span, y=y, vx=speed, vy=0.0, group=j))
        specs.append(ObjectSpec(x=0.5 * span, y=y, vx=-speed, vy=0.0, group=j))
    return specs


def scenario_template(name: str, seed: int = 0) -> ScenarioConfig:
    """Named scenarios used by the experiment harness.

    clean     ideal detections, for sanity checks
    crossing  lookalike pairs with head-on crossings and occlusions
    clutter   noisy confidences plus uniform false positives
    """
    if name == "clean":
        return ScenarioConfig(num_objects=10, num_frames=100, seed=seed)
    if name == "crossing":
        specs = crossing_objects(num_pairs=5)
        num_frames = 60
        cross = num_frames // 2
        occlusions = [(2 * j + 1, cross - 1, 2) for j in range(5)]
        return ScenarioConfig(
            num_frames=num_frames,
            objects=specs,
            occlusions=occlusions,
            embedding_dim=16,
            embedding_noise=0.05,
            pos_noise=0.05,
            seed=seed,
        )
    if name == "clutter":
        # Ghost detections near objects plus short per-object dropouts:
        # an associator that trusts every input is forced into bad
        # matches exactly when the true detection is missing.
        occlusions = [(i, 18 + 5 * i, 2) for i in range(8)]
        return ScenarioConfig(
            num_objects=8,
            num_frames=80,
            extent=60.0,
            fp_rate=2.0,
            fp_near_sigma=2.0,
            occlusions=occlusions,
            pos_noise=0.1,
            tp_score_mean=0.97,
            tp_score_sigma=0.015,
            fp_score_low=0.86,
            fp_score_high=0.99,
            seed=seed,
        )
    raise ValueError(f"unknown scenario template: {name!r}")
