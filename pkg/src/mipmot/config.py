"""Run configuration: one JSON file drives every module.

Keys and defaults (unknown keys are rejected by name):

    theta_cls           0.85   detection confidence filter
    theta_hit           0      matches needed beyond one to confirm
    theta_miss          2      consecutive misses tolerated before deletion
    default_start_prob  0.5    start probability when absent from input
    default_end_prob    0.5    end probability for tracks
    beta_over_alpha     10.0   motion-over-appearance fusion ratio
    use_dis             true   enable the normalized-distance motion term
    use_iou             true   enable the 3D IoU motion term
    w_cls               100.0  selection penalty weight
    w_aff               22.0   match reward weight
    w_se                1.0    start/end reward weight
    associator          "mip"  "mip" or "hungarian"
    ha_gate             null   optional affinity gate for the baseline
    confidence_smoothing 0.0   0 = track confidence is the last matched
                               detection score; >0 blends exponentially
    eval_iou_threshold  0.5    BEV IoU acceptance threshold for scoring
    object_type         "Car"  class written to result files
    kalman_p0_diag      [...]  10 initial covariance diagonal entries
    kalman_r_diag       [...]  7 measurement covariance diagonal entries
    kalman_q_scale      0.01   process covariance scale

Command-line flags override file values; file values override the
defaults above.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from typing import Optional

from .affinity import AffinityWeights
from .motion import DEFAULT_P0_DIAG, DEFAULT_R_DIAG, DEFAULT_Q_SCALE, KalmanConfig
from .tracker import TrackerConfig


@dataclass
class RunConfig:
    theta_cls: float = 0.85
    theta_hit: int = 0
    theta_miss: int = 2
    default_start_prob: float = 0.5
    default_end_prob: float = 0.5
    beta_over_alpha: float = 10.0
    use_dis: bool = True
    use_iou: bool = True
    w_cls: float = 100.0
    w_aff: float = 22.0
    w_se: float = 1.0
    associator: str = "mip"
    ha_gate: Optional[float] = None
    confidence_smoothing: float = 0.0
    eval_iou_threshold: float = 0.5
    object_type: str = "Car"
    kalman_p0_diag: list[float] = field(default_factory=lambda: list(DEFAULT_P0_DIAG))
    kalman_r_diag: list[float] = field(default_factory=lambda: list(DEFAULT_R_DIAG))
    kalman_q_scale: float = DEFAULT_Q_SCALE

    @classmethod
    def field_names(cls) -> set[str]:
        return {f.name for f in dataclasses.fields(cls)}

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        unknown = set(data) - cls.field_names()
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(os.fspath(path), "r", encoding="utf-8") as f:
            data = json.load(f)
        if not isinstance(data, dict):
            raise ValueError("config file must hold a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def save(self, path) -> None:
        with open(os.fspath(path), "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    def override(self, **kwargs) -> "RunConfig":
        """New config with non-None keyword values replacing fields."""
        updates = {k: v for k, v in kwargs.items() if v is not None}
        unknown = set(updates) - self.field_names()
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return dataclasses.replace(self, **updates)

    def tracker_config(self) -> TrackerConfig:
        return TrackerConfig(
            theta_cls=self.theta_cls,
            theta_hit=self.theta_hit,
            theta_miss=self.theta_miss,
            default_start_prob=self.default_start_prob,
            default_end_prob=self.default_end_prob,
            weights=AffinityWeights.from_ratio(self.beta_over_alpha),
            use_dis=self.use_dis,
            use_iou=self.use_iou,
            w_cls=self.w_cls,
            w_aff=self.w_aff,
            w_se=self.w_se,
            associator=self.associator,
            ha_gate=self.ha_gate,
            confidence_smoothing=self.confidence_smoothing,
            kalman=KalmanConfig.from_diagonals(
                p0_diag=self.kalman_p0_diag,
                r_diag=self.kalman_r_diag,
                q_scale=self.kalman_q_scale,
            ),
        )
