"""Musical pattern bank: ten looping arpeggios and ten light pulse shapes.

Patterns are note-event lists in beats; light shapes are (beat, level)
envelope points. The default bank ships as package data and carries ten
piano arpeggios built on a rising chord sequence.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..util import require

BANK_SIZE = 10


@dataclass(frozen=True)
class NoteEvent:
    pitch: int       # MIDI note number
    onset: float     # beats within the loop
    duration: float  # beats


@dataclass
class Pattern:
    events: list[NoteEvent]
    loop_beats: float

    def __post_init__(self):
        require(self.loop_beats > 0, "loop_beats must be positive")
        for ev in self.events:
            require(0.0 <= ev.onset < self.loop_beats,
                    "note onset outside the loop")
            require(ev.duration > 0, "note duration must be positive")


@dataclass
class LightShape:
    points: list[tuple[float, float]]  # (beat within loop, level 0..1)
    loop_beats: float

    def __post_init__(self):
        require(self.loop_beats > 0, "loop_beats must be positive")
        for beat, level in self.points:
            require(0.0 <= beat < self.loop_beats, "pulse beat outside the loop")
            require(0.0 <= level <= 1.0, "pulse level must be in [0, 1]")


@dataclass
class PatternBank:
    patterns: list[Pattern]
    lights: list[LightShape]
    tempo: float  # BPM

    def __post_init__(self):
        require(len(self.patterns) == BANK_SIZE,
                f"bank must hold exactly {BANK_SIZE} musical patterns")
        require(len(self.lights) == BANK_SIZE,
                f"bank must hold exactly {BANK_SIZE} light shapes")
        require(self.tempo > 0, "tempo must be positive")

    @property
    def seconds_per_beat(self) -> float:
        return 60.0 / self.tempo

    def pulse_rate(self, index: int) -> float:
        """Light pulses per second for one shape at the bank tempo."""
        shape = self.lights[index]
        return len(shape.points) / shape.loop_beats / self.seconds_per_beat

    def pulse_rates(self):
        import numpy as np
        return np.array([self.pulse_rate(i) for i in range(BANK_SIZE)])

    def to_json(self) -> dict:
        return {
            "tempo": self.tempo,
            "patterns": [
                {
                    "loop_beats": p.loop_beats,
                    "events": [
                        {"pitch": e.pitch, "onset": e.onset, "duration": e.duration}
                        for e in p.events
                    ],
                }
                for p in self.patterns
            ],
            "lights": [
                {
                    "loop_beats": s.loop_beats,
                    "points": [[b, lv] for b, lv in s.points],
                }
                for s in self.lights
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PatternBank":
        try:
            patterns = [
                Pattern(
                    events=[NoteEvent(int(e["pitch"]), float(e["onset"]),
                                      float(e["duration"]))
                            for e in p["events"]],
                    loop_beats=float(p["loop_beats"]),
                )
                for p in obj["patterns"]
            ]
            lights = [
                LightShape(points=[(float(b), float(lv)) for b, lv in s["points"]],
                           loop_beats=float(s["loop_beats"]))
                for s in obj["lights"]
            ]
            return cls(patterns=patterns, lights=lights, tempo=float(obj["tempo"]))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed pattern bank: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "PatternBank":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)


def default_bank() -> PatternBank:
    """The packaged bank of ten piano arpeggios and pulse shapes."""
    data = resources.files("myoritual.data").joinpath("default_patterns.json")
    return PatternBank.from_json(json.loads(data.read_text(encoding="utf-8")))
