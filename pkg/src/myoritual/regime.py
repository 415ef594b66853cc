"""Online estimation of damped second-order dynamics from MMG streams.

Instead of tracking gesture trajectories, muscle activity is characterized
by the movement regime it excites: the damping ratio, natural frequency and
drive level of an underlying oscillator. The sampled signal is modeled as an
order-2 autoregression x[n] = a1*x[n-1] + a2*x[n-2] (+ drive), whose
coefficients are tracked by recursive least squares with exponential
forgetting; the discrete pole pair is mapped back to continuous (zeta,
omega) by the matched-z inverse, which is exact for noiseless data from the
model itself.

Updates are gated two ways: near-zero regressors are skipped entirely
(prevents covariance windup while the muscle is quiet), and once warmed up,
samples whose prediction residual is an extreme outlier versus the recent
residual level are skipped (the autoregression does not hold across
excitation impulses).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .signals import SignalFrame
from .util import require

DEFAULT_FORGETTING = 0.995
DEFAULT_DECIMATED_RATE = 200.0
VALIDITY_RESIDUAL_RATIO = 0.5

REASON_ILL_CONDITIONED = "ill-conditioned"
REASON_NON_PHYSICAL = "non-physical"
REASON_RESIDUAL = "residual-ceiling"

_P0_SCALE = 1e8
_OUTLIER_GATE = 8.0
_WARMUP_UPDATES = 30
_LEVEL_FLOOR = 1e-6


@dataclass
class RegimeEstimate:
    """Estimated oscillator parameters for one analysis instant."""

    time: float
    zeta: float
    omega: float
    excitation: float
    residual_rms: float
    valid: bool
    reason: str | None = None

    def to_json(self) -> dict:
        return {
            "time": self.time,
            "zeta": self.zeta,
            "omega": self.omega,
            "excitation": self.excitation,
            "residual_rms": self.residual_rms,
            "valid": self.valid,
            "reason": self.reason,
        }


def poles_to_continuous(a1: float, a2: float, sample_rate: float
                        ) -> tuple[float, float] | None:
    """Map AR(2) coefficients to (zeta, omega) via log of the discrete poles.

    Returns None when the poles have no physical damped-oscillator
    counterpart (non-positive real poles, or negative damping).
    """
    disc = a1 * a1 + 4.0 * a2
    t = 1.0 / sample_rate
    if disc < 0.0:
        r2 = -a2
        if r2 <= 0.0:
            return None
        r = np.sqrt(r2)
        theta = np.arctan2(np.sqrt(-disc) / 2.0, a1 / 2.0)
        sigma = np.log(r) / t
        omega_d = theta / t
        omega = float(np.hypot(sigma, omega_d))
        if omega <= 0.0:
            return None
        zeta = float(-sigma / omega)
    else:
        sq = np.sqrt(disc)
        p1 = (a1 + sq) / 2.0
        p2 = (a1 - sq) / 2.0
        if p1 <= 0.0 or p2 <= 0.0:
            return None
        s1 = np.log(p1) / t
        s2 = np.log(p2) / t
        prod = s1 * s2
        if prod <= 0.0:
            return None
        omega = float(np.sqrt(prod))
        zeta = float(-(s1 + s2) / (2.0 * omega))
    if zeta < 0.0 or not np.isfinite(zeta) or not np.isfinite(omega):
        return None
    return zeta, omega


class RlsAr2:
    """Recursive least squares for x[n] = a1*x[n-1] + a2*x[n-2]."""

    def __init__(self, forgetting: float = DEFAULT_FORGETTING):
        require(0.0 < forgetting <= 1.0, "forgetting must be in (0, 1]")
        self.lam = forgetting
        self.theta = np.zeros(2)
        self._p: np.ndarray | None = None
        self._scale: float | None = None
        self._res_ms: float | None = None
        self.n_updates = 0

    def seed_scale(self, rms: float) -> None:
        """Initialize the prior covariance from the signal level.

        Scaling the covariance with the squared signal level makes the
        estimate exactly invariant to input amplitude.
        """
        self._scale = max(rms, _LEVEL_FLOOR)
        self._p = np.eye(2) * _P0_SCALE / (self._scale * self._scale)

    @property
    def primed(self) -> bool:
        return self._p is not None

    def update(self, x: float, x1: float, x2: float) -> float | None:
        """One RLS step; returns the post-fit residual or None if gated."""
        if self._p is None:
            raise RuntimeError("seed_scale() must be called first")
        phi = np.array([x1, x2])
        if phi @ phi < (_LEVEL_FLOOR * self._scale) ** 2:
            return None
        err = x - phi @ self.theta
        if (self.n_updates > _WARMUP_UPDATES and self._res_ms is not None
                and err * err > _OUTLIER_GATE ** 2 * max(
                    self._res_ms, (1e-12 * self._scale) ** 2)):
            return None
        p_phi = self._p @ phi
        gain = p_phi / (self.lam + phi @ p_phi)
        self.theta = self.theta + gain * err
        self._p = (self._p - np.outer(gain, p_phi)) / self.lam
        post = x - phi @ self.theta
        sq = post * post
        self._res_ms = sq if self._res_ms is None else 0.99 * self._res_ms + 0.01 * sq
        self.n_updates += 1
        return float(post)


class RegimeTracker:
    """Streaming regime estimation for one MMG channel.

    Incoming samples are decimated by plain striding (the stream is assumed
    band-limited well below the decimated Nyquist), fed through gated RLS,
    and one RegimeEstimate is emitted per hop. Estimates are invalid when the
    window is too quiet to condition the regression, when the pole map has no
    physical solution, or when the residual exceeds the validity ceiling
    relative to signal level.
    """

    def __init__(self, sample_rate: float, window: float = 0.2,
                 hop: float = 0.025, forgetting: float = DEFAULT_FORGETTING,
                 decimate_to: float = DEFAULT_DECIMATED_RATE,
                 validity_ratio: float = VALIDITY_RESIDUAL_RATIO,
                 min_level: float = 1e-4):
        require(sample_rate > 0, "sample_rate must be positive")
        self.sample_rate = sample_rate
        self.factor = max(1, int(round(sample_rate / decimate_to)))
        self.dec_rate = sample_rate / self.factor
        self.window = window
        self.hop = hop
        self.validity_ratio = validity_ratio
        self.min_level = min_level
        self.rls = RlsAr2(forgetting)
        self._win_n = max(4, int(round(window * self.dec_rate)))
        self._x = np.zeros(0)      # decimated samples
        self._resid: list[float | None] = []
        self._phase = 0            # raw-sample phase within decimation stride
        self._n_dec = 0            # decimated samples consumed by RLS
        self._next_emit = 1        # hop index of next estimate

    def push(self, frame: SignalFrame) -> list[RegimeEstimate]:
        samples = frame.samples
        idx = np.arange((-self._phase) % self.factor, samples.size, self.factor)
        self._phase = (self._phase + samples.size) % self.factor
        if idx.size:
            self._x = np.concatenate([self._x, samples[idx]])
        return self._drain()

    def flush(self) -> list[RegimeEstimate]:
        return self._drain()

    def _drain(self) -> list[RegimeEstimate]:
        # Estimates fire exactly when the consumption count crosses their hop
        # boundary, so arbitrary frame splits produce identical output.
        out: list[RegimeEstimate] = []
        while True:
            out.extend(self._emit_due())
            if self._n_dec >= self._x.size:
                break
            if not self.rls.primed:
                if self._x.size >= self._win_n:
                    rms = float(np.sqrt(np.mean(self._x[:self._win_n] ** 2)))
                    self.rls.seed_scale(max(rms, self.min_level))
                else:
                    break
            i = self._n_dec
            if i >= 2:
                res = self.rls.update(self._x[i], self._x[i - 1], self._x[i - 2])
                self._resid.append(res)
            else:
                self._resid.append(None)
            self._n_dec += 1
        return out

    def _emit_due(self) -> list[RegimeEstimate]:
        out: list[RegimeEstimate] = []
        while True:
            t = self._next_emit * self.hop
            needed = int(round(t * self.dec_rate))
            if needed > self._n_dec:
                break
            if t >= self.window:
                out.append(self._estimate_at(t, needed))
            self._next_emit += 1
        return out

    def _estimate_at(self, t: float, end: int) -> RegimeEstimate:
        lo = max(0, end - self._win_n)
        seg = self._x[lo:end]
        sig_rms = float(np.sqrt(np.mean(seg ** 2))) if seg.size else 0.0
        res = [r for r in self._resid[lo:end] if r is not None]
        res_rms = float(np.sqrt(np.mean(np.square(res)))) if res else 0.0

        if sig_rms < self.min_level or self.rls.n_updates < 4:
            return RegimeEstimate(t, 0.0, 0.0, res_rms, res_rms, False,
                                  REASON_ILL_CONDITIONED)
        mapped = poles_to_continuous(self.rls.theta[0], self.rls.theta[1],
                                     self.dec_rate)
        if mapped is None:
            return RegimeEstimate(t, 0.0, 0.0, res_rms, res_rms, False,
                                  REASON_NON_PHYSICAL)
        zeta, omega = mapped
        if res_rms > self.validity_ratio * sig_rms:
            return RegimeEstimate(t, zeta, omega, res_rms, res_rms, False,
                                  REASON_RESIDUAL)
        return RegimeEstimate(t, zeta, omega, res_rms, res_rms, True)


def estimate_stream(frames: Iterable[SignalFrame], window: float = 0.2,
                    forgetting: float = DEFAULT_FORGETTING,
                    **kwargs) -> Iterator[RegimeEstimate]:
    """Run a RegimeTracker over a finite single-channel frame stream."""
    tracker: RegimeTracker | None = None
    for frame in frames:
        if tracker is None:
            tracker = RegimeTracker(frame.sample_rate, window=window,
                                    forgetting=forgetting, **kwargs)
        yield from tracker.push(frame)
    if tracker is not None:
        yield from tracker.flush()


def damping_from_decay(env_values: np.ndarray, peak_index: int,
                       hop: float) -> float:
    """Decay constant (1/s) from the log-envelope slope after a peak.

    Cross-check path for the RLS damping estimate: for an envelope
    e^(-t/tau) the returned constant is 1/tau. Raises on segments that do
    not decay.
    """
    env = np.asarray(env_values, dtype=float)
    require(0 <= peak_index < env.size, "peak_index out of range")
    tail = env[peak_index:]
    if tail.size < 6:
        raise ValueError("need at least 5 points after the peak")
    if np.any(tail <= 0):
        # truncate at the first non-positive value; log undefined beyond
        stop = int(np.argmax(tail <= 0))
        tail = tail[:stop]
        if tail.size < 6:
            raise ValueError("decay segment too short before reaching zero")
    t = np.arange(tail.size) * hop
    slope = float(np.polyfit(t, np.log(tail), 1)[0])
    if slope >= 0:
        raise ValueError("segment does not decay")
    return -slope
