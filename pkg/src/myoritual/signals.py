"""Biosignal ingest, synthetic EMG/MMG generators, and band-limiting.

Two sensor families are modeled. EMG (electrical muscle activity) is
synthesized as band-limited noise amplitude-modulated by a contraction
envelope. MMG (mechanical muscle vibration) is synthesized by integrating a
damped second-order oscillator excited by impulses, which doubles as the
ground-truth generator for the regime estimator.

Analysis band defaults to 1-40 Hz. The band-limiting filter is a causal
Butterworth bandpass realized as second-order sections so it can run
sample-streaming; filtering a stream in arbitrary block splits is
sample-exact equal to filtering it in one block.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy import signal as sps
from scipy.io import wavfile
from scipy.linalg import expm

from .util import require

DEFAULT_BAND = (1.0, 40.0)
DEFAULT_EMG_RATE = 1000.0
DEFAULT_MMG_RATE = 4000.0
DEFAULT_BLOCK = 1024

# Prototype order of the Butterworth bandpass. Order 8 is the smallest that
# attenuates >= 40 dB one octave outside the band edges (order 4 reaches only
# ~25 dB there).
BANDPASS_ORDER = 8


class SignalKind(str, Enum):
    EMG = "EMG"
    MMG = "MMG"


@dataclass
class SignalFrame:
    """A timestamped block of one biosignal channel at a fixed sample rate.

    Samples are dimensionless normalized amplitudes in [-1, 1]. Consecutive
    frames on one channel must be contiguous in time.
    """

    channel_id: int
    kind: SignalKind
    sample_rate: float
    start_time: float
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        require(self.sample_rate > 0, "sample_rate must be positive")
        require(self.start_time >= 0, "start_time must be non-negative")
        require(self.samples.ndim == 1 and self.samples.size > 0,
                "samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples contain non-finite values")
        peak = np.abs(self.samples).max()
        if peak > 1.0 + 1e-9:
            raise ValueError(f"samples exceed [-1, 1] (peak {peak:.4g})")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def end_time(self) -> float:
        return self.start_time + self.duration


@dataclass(frozen=True)
class ContractionEvent:
    onset: float
    peak_level: float
    rise_time: float
    decay_time: float


@dataclass
class ContractionProfile:
    """Ground-truth description of muscle contractions for the generators.

    The envelope of each event rises linearly from the onset to ``peak_level``
    over ``rise_time`` and decays linearly back to zero over ``decay_time``.
    Overlapping events combine by maximum; ``noise_floor`` is a lower bound on
    the envelope everywhere.
    """

    events: list[ContractionEvent] = field(default_factory=list)
    noise_floor: float = 0.0

    def __post_init__(self):
        require(0.0 <= self.noise_floor <= 1.0, "noise_floor must be in [0, 1]")
        last = -np.inf
        for ev in self.events:
            require(ev.onset > last, "event onsets must be strictly increasing")
            require(ev.rise_time > 0 and ev.decay_time > 0,
                    "rise_time and decay_time must be positive")
            require(0.0 <= ev.peak_level <= 1.0, "peak_level must be in [0, 1]")
            last = ev.onset

    def envelope(self, t: np.ndarray) -> np.ndarray:
        """Evaluate the contraction envelope at times ``t`` (seconds)."""
        t = np.asarray(t, dtype=float)
        env = np.full(t.shape, self.noise_floor)
        for ev in self.events:
            rel = t - ev.onset
            rise = rel / ev.rise_time
            fall = 1.0 - (rel - ev.rise_time) / ev.decay_time
            shape = np.clip(np.minimum(rise, fall), 0.0, 1.0) * ev.peak_level
            env = np.maximum(env, shape)
        return env

    def to_json(self) -> dict:
        return {
            "noise_floor": self.noise_floor,
            "events": [
                {
                    "onset": ev.onset,
                    "peak_level": ev.peak_level,
                    "rise_time": ev.rise_time,
                    "decay_time": ev.decay_time,
                }
                for ev in self.events
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ContractionProfile":
        events = [
            ContractionEvent(
                onset=float(e["onset"]),
                peak_level=float(e["peak_level"]),
                rise_time=float(e["rise_time"]),
                decay_time=float(e["decay_time"]),
            )
            for e in obj.get("events", [])
        ]
        return cls(events=events, noise_floor=float(obj.get("noise_floor", 0.0)))

    @classmethod
    def load(cls, path: str | Path) -> "ContractionProfile":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=2)


def _chunk(samples: np.ndarray, sample_rate: float, kind: SignalKind,
           channel_id: int, block: int) -> Iterator[SignalFrame]:
    n = samples.size
    for i in range(0, n, block):
        yield SignalFrame(
            channel_id=channel_id,
            kind=kind,
            sample_rate=sample_rate,
            start_time=i / sample_rate,
            samples=samples[i:i + block],
        )


def load_recording(path: str | Path, kind: SignalKind,
                   gain: float | None = None,
                   block: int = DEFAULT_BLOCK) -> Iterator[SignalFrame]:
    """Stream a PCM WAV recording as normalized SignalFrames.

    Each file channel becomes its own frame stream (channel_id = column
    index). Without an explicit ``gain``, every channel is rescaled so its
    absolute peak is 1; with ``gain``, samples are multiplied by it and
    clipped to [-1, 1].
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"recording not found: {path}")
    try:
        rate, data = wavfile.read(str(path))
    except Exception as exc:
        raise ValueError(f"unreadable recording {path}: {exc}") from exc
    if data.size == 0:
        raise ValueError(f"zero-length recording: {path}")
    if data.dtype == np.uint8:
        raise ValueError(f"unsupported bit depth (8-bit PCM): {path}")
    if data.dtype == np.int16:
        samples = data.astype(float) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(float) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(float)
    else:
        raise ValueError(f"unsupported sample format {data.dtype}: {path}")
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[1] > 4:
        raise ValueError(f"more than 4 channels ({samples.shape[1]}): {path}")

    for ch in range(samples.shape[1]):
        col = samples[:, ch]
        if gain is None:
            peak = np.abs(col).max()
            if peak > 0:
                col = col / peak
        else:
            col = np.clip(col * gain, -1.0, 1.0)
        yield from _chunk(col, float(rate), kind, ch, block)


def synth_emg(profile: ContractionProfile, duration: float, sample_rate: float = DEFAULT_EMG_RATE,
              seed: int = 0, channel_id: int = 0,
              noise_band: tuple[float, float] = (20.0, 450.0),
              block: int = DEFAULT_BLOCK) -> Iterator[SignalFrame]:
    """Synthesize surrogate EMG: band-limited noise modulated by the profile.

    Deterministic given (profile, seed). The windowed RMS of the output
    tracks the contraction envelope up to a global normalization that keeps
    samples inside [-1, 1].
    """
    require(duration > 0, "duration must be positive")
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    env = profile.envelope(t)
    if not np.any(env > 0):
        yield from _chunk(np.zeros(n), sample_rate, SignalKind.EMG, channel_id, block)
        return
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(n)
    lo = min(noise_band[0], 0.4 * sample_rate / 2)
    hi = min(noise_band[1], 0.9 * sample_rate / 2)
    sos = sps.butter(4, [lo, hi], btype="bandpass", output="sos", fs=sample_rate)
    noise = sps.sosfiltfilt(sos, noise)
    noise /= np.sqrt(np.mean(noise ** 2))
    out = env * noise
    peak = np.abs(out).max()
    if peak > 1.0:
        out = out / peak
    yield from _chunk(out, sample_rate, SignalKind.EMG, channel_id, block)


def second_order_transition(zeta: float, omega: float, sample_rate: float) -> np.ndarray:
    """One-sample state transition matrix of x'' + 2*zeta*omega*x' + omega^2*x = 0."""
    a = np.array([[0.0, 1.0], [-omega * omega, -2.0 * zeta * omega]])
    return expm(a / sample_rate)


def synth_mmg(zeta: float, omega: float, profile: ContractionProfile,
              duration: float, sample_rate: float = DEFAULT_MMG_RATE,
              seed: int = 0, channel_id: int = 0,
              block: int = DEFAULT_BLOCK) -> Iterator[SignalFrame]:
    """Synthesize MMG as the exact sampled response of a damped oscillator.

    Each profile event injects a velocity impulse of size ``peak_level`` at
    its onset; between impulses the state evolves by the exact discrete
    transition of the continuous model, so the sampled output obeys the
    corresponding second-order autoregression to machine precision. Output is
    normalized to peak <= 1. ``noise_floor`` adds white measurement noise of
    that RMS relative to the normalized peak.
    """
    require(zeta >= 0, "zeta must be non-negative")
    require(omega > 0, "omega must be positive")
    if omega >= np.pi * sample_rate:
        raise ValueError("omega must be below Nyquist")
    require(duration > 0, "duration must be positive")

    n = int(round(duration * sample_rate))
    phi = second_order_transition(zeta, omega, sample_rate)
    impulses: dict[int, float] = {}
    for ev in profile.events:
        k = int(round(ev.onset * sample_rate))
        if 0 <= k < n:
            impulses[k] = impulses.get(k, 0.0) + ev.peak_level

    x = np.zeros(n)
    state = np.zeros(2)
    for i in range(n):
        if i in impulses:
            state[1] += impulses[i]
        x[i] = state[0]
        state = phi @ state

    peak = np.abs(x).max()
    if peak > 0:
        x = x / peak
    if profile.noise_floor > 0:
        rng = np.random.default_rng(seed)
        x = x + profile.noise_floor * rng.standard_normal(n)
        peak = np.abs(x).max()
        if peak > 1.0:
            x = x / peak
    yield from _chunk(x, sample_rate, SignalKind.MMG, channel_id, block)


class BandpassFilter:
    """Causal streaming Butterworth bandpass for one channel.

    Cascade of second-order sections; state is carried across process()
    calls, so block splits do not change the output. Group delay at the
    band's geometric center is exposed in seconds for documentation of the
    analysis latency.
    """

    def __init__(self, sample_rate: float, lo: float = DEFAULT_BAND[0],
                 hi: float = DEFAULT_BAND[1], order: int = BANDPASS_ORDER):
        require(0 < lo < hi, "band edges must satisfy 0 < lo < hi")
        if hi >= sample_rate / 2:
            raise ValueError("hi must be below Nyquist")
        self.sample_rate = sample_rate
        self.lo = lo
        self.hi = hi
        self.order = order
        self.sos = sps.butter(order, [lo, hi], btype="bandpass",
                              output="sos", fs=sample_rate)
        self._zi = np.zeros((self.sos.shape[0], 2))
        # per-section group delay at the band center, summed (the full
        # transfer function is too ill-conditioned to evaluate directly)
        fc = np.array([np.sqrt(lo * hi)])
        total = 0.0
        for section in self.sos:
            _, gd = sps.group_delay((section[:3], section[3:]), w=fc,
                                    fs=sample_rate)
            total += float(gd[0])
        self.group_delay = total / sample_rate

    def process(self, samples: np.ndarray) -> np.ndarray:
        out, self._zi = sps.sosfilt(self.sos, np.asarray(samples, dtype=float),
                                    zi=self._zi)
        return out

    def reset(self) -> None:
        self._zi = np.zeros((self.sos.shape[0], 2))


def bandpass(frames: Iterable[SignalFrame], lo: float = DEFAULT_BAND[0],
             hi: float = DEFAULT_BAND[1],
             order: int = BANDPASS_ORDER) -> Iterator[SignalFrame]:
    """Band-limit a (possibly interleaved multi-channel) frame stream.

    One filter instance is kept per (kind, channel_id); timestamps are
    preserved. Outputs are clipped only by the filter's unity passband, never
    rescaled.
    """
    filters: dict[tuple[SignalKind, int], BandpassFilter] = {}
    for frame in frames:
        key = (frame.kind, frame.channel_id)
        if key not in filters:
            filters[key] = BandpassFilter(frame.sample_rate, lo, hi, order)
        filt = filters[key]
        if filt.sample_rate != frame.sample_rate:
            raise ValueError("inconsistent sample rate within one channel")
        out = filt.process(frame.samples)
        # |H| <= 1 for Butterworth, but numerical state can overshoot by eps
        out = np.clip(out, -1.0, 1.0)
        yield SignalFrame(frame.channel_id, frame.kind, frame.sample_rate,
                          frame.start_time, out)


def frames_to_array(frames: Iterable[SignalFrame]) -> tuple[np.ndarray, float]:
    """Concatenate a single-channel frame stream; returns (samples, rate)."""
    parts = []
    rate = None
    end = None
    for f in frames:
        if rate is None:
            rate = f.sample_rate
        if end is not None and abs(f.start_time - end) >= 1.0 / rate:
            raise ValueError("frames are not contiguous")
        parts.append(f.samples)
        end = f.end_time
    if rate is None:
        raise ValueError("empty frame stream")
    return np.concatenate(parts), rate


def write_wav(path: str | Path, samples: np.ndarray, sample_rate: float) -> None:
    """Write float32 PCM WAV; samples clipped to [-1, 1]."""
    data = np.clip(np.asarray(samples), -1.0, 1.0).astype(np.float32)
    wavfile.write(str(path), int(sample_rate), data)
