"""Proximity quantization and the music/light directive mapping.

Per dimension, the distance to the target digit is quantized onto the
integer scale {1, 2, 3}: 3 means nearest, 1 farthest, with boundaries
belonging to the closer class. The directive mapping inverts intensity:
the nearer a value is to its target, the quieter its musical pattern and
the dimmer its light, so the piece falls quiet as learning succeeds.
Neither volume nor brightness reaches zero; presence stays perceivable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..util import require
from .agent import DIM, RitualTarget

DEFAULT_T_HI = 0.5   # distance at or below -> proximity 3
DEFAULT_T_LO = 2.0   # distance at or below (but above t_hi) -> proximity 2


@dataclass
class ProximityReport:
    time: float
    values: np.ndarray  # (10,) ints in {1, 2, 3}

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=int)
        require(self.values.shape == (DIM,), f"need {DIM} proximity values")
        if np.any(self.values < 1) or np.any(self.values > 3):
            raise ValueError("proximity values must be in {1, 2, 3}")

    def to_json(self) -> dict:
        return {"time": self.time, "values": [int(v) for v in self.values]}


def proximity(position: np.ndarray, target: RitualTarget,
              t_hi: float = DEFAULT_T_HI, t_lo: float = DEFAULT_T_LO,
              time: float = 0.0) -> ProximityReport:
    require(0 < t_hi < t_lo, "thresholds must satisfy 0 < t_hi < t_lo")
    position = np.asarray(position, dtype=float)
    d = np.abs(position - target.digits)
    values = np.where(d <= t_hi, 3, np.where(d <= t_lo, 2, 1))
    return ProximityReport(time=time, values=values)


@dataclass
class DirectiveConfig:
    v_min: float = 0.1
    v_max: float = 1.0
    b_min: float = 0.05
    b_max: float = 1.0

    def __post_init__(self):
        require(0 <= self.v_min < self.v_max, "need 0 <= v_min < v_max")
        require(0 <= self.b_min < self.b_max, "need 0 <= b_min < b_max")


@dataclass
class AVDirective:
    """Per-pattern playback levels derived from one proximity report."""

    pattern_id: np.ndarray   # (10,) = 0..9
    volume: np.ndarray       # (10,) in [v_min, v_max]
    brightness: np.ndarray   # (10,) in [b_min, b_max]
    pulse_rate: np.ndarray   # (10,) Hz

    def to_json(self) -> dict:
        return {
            "pattern_id": [int(i) for i in self.pattern_id],
            "volume": [float(v) for v in self.volume],
            "brightness": [float(b) for b in self.brightness],
            "pulse_rate": [float(p) for p in self.pulse_rate],
        }


def direct(report: ProximityReport, config: DirectiveConfig | None = None,
           pulse_rates: np.ndarray | None = None) -> AVDirective:
    """Map proximity {1,2,3} to volume/brightness, strictly decreasing in
    proximity: value 3 (nearest) plays at the configured minimum, value 1 at
    the maximum."""
    cfg = config or DirectiveConfig()
    p = report.values.astype(float)
    frac = (3.0 - p) / 2.0   # 3 -> 0, 2 -> 0.5, 1 -> 1
    volume = cfg.v_min + frac * (cfg.v_max - cfg.v_min)
    brightness = cfg.b_min + frac * (cfg.b_max - cfg.b_min)
    rates = (np.ones(DIM) if pulse_rates is None
             else np.asarray(pulse_rates, dtype=float))
    require(rates.shape == (DIM,), f"need {DIM} pulse rates")
    return AVDirective(pattern_id=np.arange(DIM), volume=volume,
                       brightness=brightness, pulse_rate=rates)
