"""Movement descriptors extracted from band-limited biosignals.

Per channel: trailing-window RMS envelope, its rate of change, and the
amplitude-weighted spectral centroid over the analysis band. Across
channels: aggregate expressive descriptors (effort, abruptness, relaxation
rate, and complexity = number of simultaneously active channels), normalized
against per-channel calibration maxima captured in a calibration pass.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .signals import DEFAULT_BAND, SignalFrame, SignalKind
from .util import clip01, require

DEFAULT_WINDOW = 0.200
DEFAULT_HOP = 0.025
SILENCE_RMS = 1e-4
ACTIVITY_FRACTION = 0.1


class CalibrationError(RuntimeError):
    """Raised when aggregate features are requested without usable maxima."""


@dataclass
class FeatureSeries:
    """A regularly sampled feature time series (rate = 1/hop)."""

    times: np.ndarray
    values: np.ndarray
    hop: float
    valid: np.ndarray | None = None  # None means every point is valid

    def __len__(self) -> int:
        return len(self.times)


def envelope(samples: np.ndarray, sample_rate: float,
             window: float = DEFAULT_WINDOW, hop: float = DEFAULT_HOP,
             start_time: float = 0.0) -> FeatureSeries:
    """Trailing-window RMS envelope, emitted every ``hop`` seconds.

    The value at time t is the RMS of samples in [t - window, t]; emission
    starts at the first full window.
    """
    require(window >= hop > 0, "need window >= hop > 0")
    x = np.asarray(samples, dtype=float)
    win_n = int(round(window * sample_rate))
    hop_n = int(round(hop * sample_rate))
    if win_n < 2:
        raise ValueError("window shorter than 2 sample periods")
    csum = np.concatenate([[0.0], np.cumsum(x * x)])
    ends = np.arange(win_n, x.size + 1, hop_n)
    rms = np.sqrt((csum[ends] - csum[ends - win_n]) / win_n)
    times = start_time + ends / sample_rate
    return FeatureSeries(times=times, values=rms, hop=hop)


def change_rate(env: FeatureSeries) -> FeatureSeries:
    """Signed rate of change of an envelope series (1/s).

    Centered first difference at interior points, one-sided at the ends;
    exact for linear input.
    """
    require(len(env) >= 2, "need at least 2 envelope points")
    rate = np.gradient(env.values, env.hop)
    return FeatureSeries(times=env.times.copy(), values=rate, hop=env.hop)


def spectral_centroid(samples: np.ndarray, sample_rate: float,
                      window: float = DEFAULT_WINDOW, hop: float = DEFAULT_HOP,
                      band: tuple[float, float] = DEFAULT_BAND,
                      silence_rms: float = SILENCE_RMS,
                      start_time: float = 0.0) -> FeatureSeries:
    """Amplitude-weighted mean frequency over the analysis band.

    Windows quieter than ``silence_rms`` are flagged absent (valid=False,
    value NaN) rather than reported as 0. Hann-windowed, 4x zero-padded FFT.
    """
    x = np.asarray(samples, dtype=float)
    win_n = int(round(window * sample_rate))
    hop_n = int(round(hop * sample_rate))
    if win_n < 4:
        raise ValueError("window shorter than 4 sample periods")
    nfft = 4 * win_n
    hann = np.hanning(win_n)
    freqs = np.fft.rfftfreq(nfft, d=1.0 / sample_rate)
    in_band = (freqs >= band[0]) & (freqs <= band[1])
    fb = freqs[in_band]

    ends = np.arange(win_n, x.size + 1, hop_n)
    vals = np.full(ends.size, np.nan)
    valid = np.zeros(ends.size, dtype=bool)
    for i, e in enumerate(ends):
        frame = x[e - win_n:e]
        if np.sqrt(np.mean(frame * frame)) < silence_rms:
            continue
        mag = np.abs(np.fft.rfft(frame * hann, n=nfft))[in_band]
        total = mag.sum()
        if total <= 0:
            continue
        vals[i] = float((fb * mag).sum() / total)
        valid[i] = True
    times = start_time + ends / sample_rate
    return FeatureSeries(times=times, values=vals, hop=hop, valid=valid)


def _channel_key(kind: SignalKind, channel_id: int) -> str:
    return f"{kind.value}:{channel_id}"


@dataclass
class Calibration:
    """Per-channel maxima captured during an operator-triggered pass."""

    env_max: dict[str, float] = field(default_factory=dict)
    rate_max: dict[str, float] = field(default_factory=dict)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"env_max": self.env_max, "rate_max": self.rate_max},
                      fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str | Path) -> "Calibration":
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
        return cls(env_max=dict(obj["env_max"]), rate_max=dict(obj["rate_max"]))

    @classmethod
    def from_series(cls, env_by_channel: dict[str, FeatureSeries]) -> "Calibration":
        cal = cls()
        for key, env in env_by_channel.items():
            cal.env_max[key] = float(np.max(env.values)) if len(env) else 0.0
            rate = change_rate(env) if len(env) >= 2 else None
            cal.rate_max[key] = float(np.max(np.abs(rate.values))) if rate is not None else 0.0
        return cal


@dataclass
class ChannelFeatures:
    channel_id: int
    kind: SignalKind
    envelope: float
    change_rate: float
    spectral_centroid: float | None
    damping_ratio: float | None = None

    def to_json(self) -> dict:
        return {
            "channel_id": self.channel_id,
            "kind": self.kind.value,
            "envelope": self.envelope,
            "change_rate": self.change_rate,
            "spectral_centroid": self.spectral_centroid,
            "damping_ratio": self.damping_ratio,
        }


@dataclass
class FeatureVector:
    """One analysis instant: per-channel descriptors plus aggregates."""

    time: float
    channels: list[ChannelFeatures]
    effort: float = 0.0
    abruptness: float = 0.0
    relaxation_rate: float = 0.0
    complexity: int = 0
    regime: dict | None = None

    def to_json(self) -> dict:
        obj = {
            "time": self.time,
            "channels": [c.to_json() for c in self.channels],
            "effort": self.effort,
            "abruptness": self.abruptness,
            "relaxation_rate": self.relaxation_rate,
            "complexity": self.complexity,
        }
        if self.regime is not None:
            obj["regime"] = self.regime
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureVector":
        chans = [
            ChannelFeatures(
                channel_id=int(c["channel_id"]),
                kind=SignalKind(c["kind"]),
                envelope=float(c["envelope"]),
                change_rate=float(c["change_rate"]),
                spectral_centroid=(None if c.get("spectral_centroid") is None
                                   else float(c["spectral_centroid"])),
                damping_ratio=(None if c.get("damping_ratio") is None
                               else float(c["damping_ratio"])),
            )
            for c in obj["channels"]
        ]
        return cls(
            time=float(obj["time"]),
            channels=chans,
            effort=float(obj["effort"]),
            abruptness=float(obj["abruptness"]),
            relaxation_rate=float(obj["relaxation_rate"]),
            complexity=int(obj["complexity"]),
            regime=obj.get("regime"),
        )


def aggregate_nuance(channels: list[ChannelFeatures], calibration: Calibration,
                     activity_fraction: float = ACTIVITY_FRACTION,
                     ) -> tuple[float, float, float, int]:
    """Reduce per-channel features to (effort, abruptness, relaxation, complexity).

    effort: mean of envelope / per-channel calibration max, clipped to [0,1].
    abruptness: largest positive change rate over its calibration max.
    relaxation_rate: largest negative change-rate magnitude over its max.
    complexity: count of channels whose envelope exceeds the activity
    threshold (activity_fraction x calibration max).
    """
    require(len(channels) >= 1, "need at least one channel")
    efforts, abrupt, relax = [], [], []
    complexity = 0
    for ch in channels:
        key = _channel_key(ch.kind, ch.channel_id)
        env_max = calibration.env_max.get(key, 0.0)
        rate_max = calibration.rate_max.get(key, 0.0)
        if env_max <= 0.0 or rate_max <= 0.0:
            raise CalibrationError(
                f"calibration max missing or zero for channel {key}; "
                "run a calibration pass before aggregating nuances")
        efforts.append(ch.envelope / env_max)
        abrupt.append(max(ch.change_rate, 0.0) / rate_max)
        relax.append(max(-ch.change_rate, 0.0) / rate_max)
        if ch.envelope > activity_fraction * env_max:
            complexity += 1
    return (
        float(clip01(np.mean(efforts))),
        float(clip01(np.max(abrupt))),
        float(clip01(np.max(relax))),
        complexity,
    )


class FeaturePipeline:
    """Streaming multi-channel feature extraction on a shared hop grid.

    Buffers incoming frames per channel, and emits one FeatureVector per hop
    once every registered channel has data covering that instant. Emission of
    row k waits for row k+1's envelope so the change rate can use the same
    centered difference as the offline function (one hop of latency). Regime
    estimates pushed via merge_regime() are attached to their channel by
    nearest timestamp within one hop.

    With calibration=None the aggregate fields stay zero (calibration pass).
    """

    def __init__(self, channels: list[tuple[SignalKind, int, float]],
                 window: float = DEFAULT_WINDOW, hop: float = DEFAULT_HOP,
                 band: tuple[float, float] = DEFAULT_BAND,
                 silence_rms: float = SILENCE_RMS,
                 activity_fraction: float = ACTIVITY_FRACTION,
                 calibration: Calibration | None = None):
        require(window >= hop > 0, "need window >= hop > 0")
        self.window = window
        self.hop = hop
        self.band = band
        self.silence_rms = silence_rms
        self.activity_fraction = activity_fraction
        self.calibration = calibration
        self._channels = list(channels)
        self._buffers: dict[str, np.ndarray] = {}
        self._rates: dict[str, float] = {}
        self._env_hist: dict[str, list[float]] = {}
        self._cent_hist: dict[str, list[float | None]] = {}
        self._regime_hist: dict[str, list[tuple[float, dict]]] = {}
        for kind, cid, rate in self._channels:
            key = _channel_key(kind, cid)
            self._buffers[key] = np.zeros(0)
            self._rates[key] = rate
            self._env_hist[key] = []
            self._cent_hist[key] = []
            self._regime_hist[key] = []
        self._next_k = self._first_k()  # hop index computed next
        self._emitted = 0  # rows already emitted

    def push(self, frame: SignalFrame) -> list[FeatureVector]:
        key = _channel_key(frame.kind, frame.channel_id)
        if key not in self._buffers:
            raise ValueError(f"unregistered channel {key}")
        self._buffers[key] = np.concatenate([self._buffers[key], frame.samples])
        return self._drain(final=False)

    def flush(self) -> list[FeatureVector]:
        """Emit remaining rows of a finite stream (last row one-sided)."""
        return self._drain(final=True)

    # -- internals ---------------------------------------------------------

    def _ready(self, k: int) -> bool:
        t = k * self.hop
        for key, rate in self._rates.items():
            if self._buffers[key].size < int(round(t * rate)):
                return False
        return True

    def _compute_row(self, k: int) -> None:
        t = k * self.hop
        nfft_pad = 4
        for key, rate in self._rates.items():
            end = int(round(t * rate))
            win_n = int(round(self.window * rate))
            frame = self._buffers[key][end - win_n:end]
            rms = float(np.sqrt(np.mean(frame * frame)))
            self._env_hist[key].append(rms)
            if rms < self.silence_rms:
                self._cent_hist[key].append(None)
            else:
                nfft = nfft_pad * win_n
                freqs = np.fft.rfftfreq(nfft, d=1.0 / rate)
                in_band = (freqs >= self.band[0]) & (freqs <= self.band[1])
                mag = np.abs(np.fft.rfft(frame * np.hanning(win_n), n=nfft))[in_band]
                total = mag.sum()
                self._cent_hist[key].append(
                    float((freqs[in_band] * mag).sum() / total) if total > 0 else None)

    def _rate_at(self, key: str, idx: int, final: bool) -> float:
        env = self._env_hist[key]
        h = self.hop
        if len(env) == 1:
            return 0.0
        if idx == 0:
            return (env[1] - env[0]) / h
        if idx == len(env) - 1:
            return (env[idx] - env[idx - 1]) / h
        return (env[idx + 1] - env[idx - 1]) / (2 * h)

    def _nearest_regime(self, key: str, t: float) -> dict | None:
        hist = self._regime_hist[key]
        best = None
        best_dt = self.hop + 1e-9
        for rt, obj in reversed(hist):
            dt = abs(rt - t)
            if dt < best_dt:
                best, best_dt = obj, dt
            if rt < t - self.hop:
                break
        return best

    def _drain(self, final: bool) -> list[FeatureVector]:
        while self._ready(self._next_k):
            self._compute_row(self._next_k)
            self._next_k += 1
        out: list[FeatureVector] = []
        n_rows = min(len(h) for h in self._env_hist.values()) if self._env_hist else 0
        # row i is emittable when row i+1 exists (centered diff) or stream ended
        last = n_rows if final else max(n_rows - 1, 0)
        first_k = self._first_k()
        while self._emitted < last:
            i = self._emitted
            t = (first_k + i) * self.hop
            chans = []
            for kind, cid, _rate in self._channels:
                key = _channel_key(kind, cid)
                reg = self._nearest_regime(key, t)
                chans.append(ChannelFeatures(
                    channel_id=cid, kind=kind,
                    envelope=self._env_hist[key][i],
                    change_rate=self._rate_at(key, i, final),
                    spectral_centroid=self._cent_hist[key][i],
                    damping_ratio=(reg.get("zeta") if reg and reg.get("valid") else None),
                ))
            fv = FeatureVector(time=t, channels=chans)
            if self.calibration is not None:
                (fv.effort, fv.abruptness, fv.relaxation_rate,
                 fv.complexity) = aggregate_nuance(
                    chans, self.calibration, self.activity_fraction)
            regs = {}
            for kind, cid, _rate in self._channels:
                key = _channel_key(kind, cid)
                reg = self._nearest_regime(key, t)
                if reg is not None:
                    regs[key] = reg
            if regs:
                fv.regime = regs
            out.append(fv)
            self._emitted += 1
        return out

    def _first_k(self) -> int:
        return int(np.ceil(self.window / self.hop - 1e-9))

    def merge_regime(self, kind: SignalKind, channel_id: int,
                     estimates: Iterable) -> None:
        key = _channel_key(kind, channel_id)
        for est in estimates:
            self._regime_hist[key].append((est.time, est.to_json()))


def write_jsonl(rows: Iterable[FeatureVector], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row.to_json()) + "\n")


def read_jsonl(path: str | Path) -> Iterator[FeatureVector]:
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield FeatureVector.from_json(json.loads(line))
