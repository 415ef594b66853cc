"""Feedback network of twenty digital oscillators.

Each oscillator's instantaneous frequency is its (slewed) base pitch plus a
frequency modulation term: the gain-matrix-weighted, soft-saturated outputs
of all oscillators from one sample earlier. The one-sample delay makes the
recursion computable; tanh saturation on the feedback path and on the master
bus keeps every output sample strictly inside [-1, 1] for any reachable
state. Pitches come from a small configurable set, glissandi move within
a microtonal range around it.

Control arrives as ControlAction values applied between rendered blocks;
amplitude and frequency moves are slewed (default 50 ms full range) so
control never clicks. All state lives in the network object, so rendering a
stream in any block split is sample-exact identical.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .signals import write_wav
from .util import require

NUM_OSCILLATORS = 20
DEFAULT_G_MAX = 0.8
DEFAULT_MOD_DEPTH = 30.0       # Hz of deviation per unit feedback drive
DEFAULT_SLEW_TIME = 0.050
DEFAULT_SAMPLE_RATE = 48000.0
DEFAULT_BLOCK = 256
MAX_CHANNELS = 8

# Seven-pitch home set (Hz): a low fundamental with near-just intervals,
# cycled across the twenty oscillators.
DEFAULT_PITCHES = (55.0, 61.875, 66.0, 73.333, 82.5, 88.0, 97.778)
DEFAULT_GLISS_RANGE_SEMITONES = 1.0


def spread_pitches(pitches: Sequence[float] = DEFAULT_PITCHES,
                   n: int = NUM_OSCILLATORS) -> np.ndarray:
    """Assign a base pitch to each oscillator by cycling the pitch set
    through octaves."""
    out = np.empty(n)
    n_p = len(pitches)
    for i in range(n):
        octave = i // n_p
        out[i] = pitches[i % n_p] * (2 ** (octave % 3))
    return out


@dataclass
class ControlAction:
    """A sparse, bounded update to the network.

    Indices must be in 0..19. Glissandi are (target Hz, rate Hz/s); targets
    get clamped into the pitch range extended by the glissando span.
    feedback_scale multiplies the whole gain matrix; feedback_delta adds to
    individual entries; both clip into [0, g_max]. Diffusion rows are
    clipped non-negative and renormalized if they sum above 1.
    """

    activate: set[int] = field(default_factory=set)
    mute: set[int] = field(default_factory=set)
    volume_targets: dict[int, float] = field(default_factory=dict)
    phase_offsets: dict[int, float] = field(default_factory=dict)
    glissandi: dict[int, tuple[float, float]] = field(default_factory=dict)
    gliss_semitones: dict[int, tuple[float, float]] = field(default_factory=dict)
    feedback_scale: float | None = None
    feedback_delta: dict[tuple[int, int], float] = field(default_factory=dict)
    diffusion_update: np.ndarray | None = None

    def indices(self):
        for i in self.activate | self.mute:
            yield i
        yield from self.volume_targets
        yield from self.phase_offsets
        yield from self.glissandi
        yield from self.gliss_semitones
        for i, j in self.feedback_delta:
            yield i
            yield j

    def to_json(self) -> dict:
        return {
            "activate": sorted(self.activate),
            "mute": sorted(self.mute),
            "volume_targets": {str(k): v for k, v in sorted(self.volume_targets.items())},
            "phase_offsets": {str(k): v for k, v in sorted(self.phase_offsets.items())},
            "glissandi": {str(k): list(v) for k, v in sorted(self.glissandi.items())},
            "gliss_semitones": {str(k): list(v) for k, v in sorted(self.gliss_semitones.items())},
            "feedback_scale": self.feedback_scale,
            "feedback_delta": {f"{i},{j}": v for (i, j), v in sorted(self.feedback_delta.items())},
            "diffusion_update": (None if self.diffusion_update is None
                                 else np.asarray(self.diffusion_update).tolist()),
        }


@dataclass
class OscState:
    """Read-only view of one oscillator (for snapshots and tests)."""

    index: int
    base_freq: float
    phase: float
    amp: float
    active: bool
    gliss_target: float
    gliss_rate: float


class OscillatorNetwork:
    """State machine holding exactly twenty oscillators and their couplings."""

    def __init__(self, sample_rate: float = DEFAULT_SAMPLE_RATE,
                 n_channels: int = 2,
                 pitches: Sequence[float] = DEFAULT_PITCHES,
                 g_max: float = DEFAULT_G_MAX,
                 mod_depth: float = DEFAULT_MOD_DEPTH,
                 slew_time: float = DEFAULT_SLEW_TIME,
                 master_gain: float = 0.8,
                 gliss_range_semitones: float = DEFAULT_GLISS_RANGE_SEMITONES,
                 feedback_init: float = 0.0,
                 seed: int = 0):
        require(sample_rate > 0, "sample_rate must be positive")
        require(1 <= n_channels <= MAX_CHANNELS,
                f"n_channels must be in 1..{MAX_CHANNELS}")
        require(0.0 <= feedback_init <= g_max, "feedback_init outside [0, g_max]")
        require(0.0 <= master_gain <= 1.0, "master_gain must be in [0, 1]")
        self.sample_rate = sample_rate
        self.n_channels = n_channels
        self.g_max = g_max
        self.mod_depth = mod_depth
        self.slew_time = slew_time
        self.master_gain = master_gain
        self.seed = seed
        self.gliss_range = gliss_range_semitones

        self.home_pitch = spread_pitches(pitches)
        span = 2.0 ** (gliss_range_semitones / 12.0)
        self._freq_lo = float(self.home_pitch.min() / span)
        self._freq_hi = float(self.home_pitch.max() * span)

        rng = np.random.default_rng(seed)
        n = NUM_OSCILLATORS
        self.phase = rng.uniform(0.0, 2.0 * np.pi, n)
        self.freq = self.home_pitch.copy()
        self.freq_target = self.home_pitch.copy()
        self.gliss_rate = np.zeros(n)
        self.amp = np.zeros(n)
        self.amp_target = np.zeros(n)
        self.volume = np.full(n, 0.8)
        self.active = np.zeros(n, dtype=bool)
        self.feedback_gain = np.full((n, n), feedback_init)
        np.fill_diagonal(self.feedback_gain, 0.0)
        self.diffusion = self._default_diffusion()
        self._y_prev = np.zeros(n)

    def _default_diffusion(self) -> np.ndarray:
        """Alternate oscillators across channels with a slight center bias."""
        d = np.zeros((NUM_OSCILLATORS, self.n_channels))
        for i in range(NUM_OSCILLATORS):
            main = i % self.n_channels
            d[i, main] = 0.7
            if self.n_channels > 1:
                d[i, (main + 1) % self.n_channels] = 0.3
            else:
                d[i, main] = 1.0
        return d

    # -- control --------------------------------------------------------------

    def apply(self, action: ControlAction) -> None:
        for i in action.indices():
            if not (0 <= i < NUM_OSCILLATORS):
                raise IndexError(f"oscillator index {i} out of range")

        for i in action.mute:
            self.active[i] = False
        for i in action.activate:
            self.active[i] = True
        for i, v in action.volume_targets.items():
            self.volume[i] = float(np.clip(v, 0.0, 1.0))
        for i, dp in action.phase_offsets.items():
            self.phase[i] = (self.phase[i] + dp) % (2.0 * np.pi)
        for i, (target, rate) in action.glissandi.items():
            self._set_gliss(i, target, rate)
        for i, (semis, rate) in action.gliss_semitones.items():
            self._set_gliss(i, self.home_pitch[i] * 2.0 ** (semis / 12.0), rate)
        if action.feedback_scale is not None:
            self.feedback_gain = np.clip(
                self.feedback_gain * action.feedback_scale, 0.0, self.g_max)
        for (i, j), delta in action.feedback_delta.items():
            self.feedback_gain[i, j] = float(
                np.clip(self.feedback_gain[i, j] + delta, 0.0, self.g_max))
        if action.diffusion_update is not None:
            d = np.asarray(action.diffusion_update, dtype=float)
            require(d.shape == (NUM_OSCILLATORS, self.n_channels),
                    f"diffusion must be {(NUM_OSCILLATORS, self.n_channels)}")
            d = np.clip(d, 0.0, None)
            sums = d.sum(axis=1, keepdims=True)
            over = sums > 1.0
            d = np.where(over, d / np.where(sums > 0, sums, 1.0), d)
            self.diffusion = d
        self.amp_target = np.where(self.active, self.volume, 0.0)

    def _set_gliss(self, i: int, target: float, rate: float) -> None:
        self.freq_target[i] = float(np.clip(target, self._freq_lo, self._freq_hi))
        self.gliss_rate[i] = abs(float(rate))

    def set_gain(self, i: int, j: int, value: float) -> None:
        """Install one feedback gain; out-of-bound values are rejected."""
        if not (0 <= i < NUM_OSCILLATORS and 0 <= j < NUM_OSCILLATORS):
            raise IndexError("gain index out of range")
        if not (0.0 <= value <= self.g_max):
            raise ValueError(f"gain must be in [0, {self.g_max}]")
        self.feedback_gain[i, j] = value

    def randomize_feedback(self, level: float, seed: int) -> None:
        require(0.0 <= level <= self.g_max, "level outside [0, g_max]")
        rng = np.random.default_rng(seed)
        g = rng.uniform(0.0, level, (NUM_OSCILLATORS, NUM_OSCILLATORS))
        np.fill_diagonal(g, 0.0)
        self.feedback_gain = g

    # -- audio ------------------------------------------------------------------

    def render(self, n_samples: int) -> np.ndarray:
        """Render the next n_samples; returns (n_samples, n_channels) float64.

        Phases, slews and the feedback sample are carried in the network, so
        render(a) then render(b) equals render(a+b) sample-exactly.
        """
        require(n_samples > 0, "n_samples must be positive")
        fs = self.sample_rate
        two_pi = 2.0 * np.pi
        amp_step = 1.0 / max(self.slew_time * fs, 1.0)
        freq_step = self.gliss_rate / fs

        amp = self.amp
        amp_target = self.amp_target
        freq = self.freq
        freq_target = self.freq_target
        phase = self.phase
        g = self.feedback_gain
        diff = self.diffusion
        y_prev = self._y_prev
        mod_depth = self.mod_depth

        mix = np.empty((n_samples, self.n_channels))
        for k in range(n_samples):
            np.add(amp, np.clip(amp_target - amp, -amp_step, amp_step), out=amp)
            np.add(freq, np.clip(freq_target - freq, -freq_step, freq_step), out=freq)
            inst = freq + mod_depth * (g @ y_prev)
            np.mod(phase + two_pi * inst / fs, two_pi, out=phase)
            out_osc = amp * np.sin(phase)
            np.tanh(out_osc, out=y_prev)
            mix[k] = out_osc @ diff
        self._y_prev = y_prev
        return np.tanh(self.master_gain * mix)

    def run_blocks(self, callback: Callable[[np.ndarray], None],
                   n_blocks: int, block_size: int = DEFAULT_BLOCK) -> None:
        """Live-output stand-in: render fixed-size blocks into a callback."""
        for _ in range(n_blocks):
            callback(self.render(block_size))

    def render_to_wav(self, path: str | Path, duration: float) -> np.ndarray:
        audio = self.render(int(round(duration * self.sample_rate)))
        write_wav(path, audio, self.sample_rate)
        return audio

    # -- introspection ------------------------------------------------------------

    def states(self) -> list[OscState]:
        return [OscState(i, float(self.freq[i]), float(self.phase[i]),
                         float(self.amp[i]), bool(self.active[i]),
                         float(self.freq_target[i]), float(self.gliss_rate[i]))
                for i in range(NUM_OSCILLATORS)]

    def snapshot(self) -> dict:
        return {
            "oscillators": [
                {"index": i, "freq": float(self.freq[i]),
                 "amp": float(self.amp[i]), "active": bool(self.active[i])}
                for i in range(NUM_OSCILLATORS)
            ],
            "feedback_gain": self.feedback_gain.tolist(),
            "master_gain": self.master_gain,
            "g_max": self.g_max,
            "n_channels": self.n_channels,
        }

    def snapshot_json(self) -> str:
        return json.dumps(self.snapshot())
