import json

import numpy as np
import pytest

from myoritual import features as feat
from myoritual.features import (Calibration, CalibrationError, ChannelFeatures,
                                FeaturePipeline, FeatureVector, aggregate_nuance,
                                change_rate, envelope, spectral_centroid)
from myoritual.signals import SignalFrame, SignalKind

FS = 1000.0


def _cf(env, rate, cid=0, kind=SignalKind.EMG):
    return ChannelFeatures(channel_id=cid, kind=kind, envelope=env,
                           change_rate=rate, spectral_centroid=None)


def _cal(env_max=1.0, rate_max=10.0, keys=("EMG:0",)):
    return Calibration(env_max={k: env_max for k in keys},
                       rate_max={k: rate_max for k in keys})


# ---------------------------------------------------------------------------
# envelope
# ---------------------------------------------------------------------------

def test_envelope_of_sine_is_rms():
    t = np.arange(int(4 * FS)) / FS
    x = np.sin(2 * np.pi * 10 * t)
    env = envelope(x, FS, window=1.0, hop=0.1)
    assert np.all(np.abs(env.values - 1 / np.sqrt(2)) < 0.01 / np.sqrt(2))


def test_envelope_of_zeros_is_zero():
    env = envelope(np.zeros(2000), FS)
    assert np.all(env.values == 0.0)


def test_envelope_step_rises_within_window():
    x = np.concatenate([np.zeros(1000), np.ones(2000)])
    env = envelope(x, FS, window=0.2, hop=0.01)
    after = env.values[env.times >= 1.0 + 0.2]
    assert np.all(np.diff(env.values[(env.times > 1.0) & (env.times <= 1.2)]) >= -1e-12)
    assert after[0] >= 0.95


def test_envelope_rejects_tiny_window():
    with pytest.raises(ValueError, match="2 sample periods"):
        envelope(np.zeros(100), FS, window=0.001, hop=0.001)


# ---------------------------------------------------------------------------
# change_rate
# ---------------------------------------------------------------------------

def test_change_rate_constant_is_zero():
    env = feat.FeatureSeries(times=np.arange(10) * 0.1,
                             values=np.full(10, 0.7), hop=0.1)
    assert np.all(change_rate(env).values == 0.0)


def test_change_rate_linear_ramp_exact():
    k = 2.5
    times = np.arange(20) * 0.05
    env = feat.FeatureSeries(times=times, values=k * times, hop=0.05)
    rate = change_rate(env)
    assert np.all(np.abs(rate.values[1:-1] - k) < 1e-9)


def test_change_rate_sign_change_at_apex():
    values = np.concatenate([np.linspace(0, 1, 10), np.linspace(1, 0, 10)[1:]])
    env = feat.FeatureSeries(times=np.arange(values.size) * 0.1,
                             values=values, hop=0.1)
    rate = change_rate(env).values
    apex = np.argmax(values)
    assert rate[apex - 1] > 0 > rate[apex + 1]


# ---------------------------------------------------------------------------
# spectral centroid
# ---------------------------------------------------------------------------

def test_centroid_pure_tone():
    t = np.arange(int(4 * FS)) / FS
    x = np.sin(2 * np.pi * 10 * t)
    c = spectral_centroid(x, FS)
    assert np.all(np.abs(c.values[c.valid] - 10.0) < 0.5)


def test_centroid_two_tones_symmetric():
    # 1 s window so the 5 Hz line resolves clear of the 1 Hz band edge
    t = np.arange(int(6 * FS)) / FS
    x = 0.5 * np.sin(2 * np.pi * 5 * t) + 0.5 * np.sin(2 * np.pi * 15 * t)
    c = spectral_centroid(x, FS, window=1.0)
    assert np.all(np.abs(c.values[c.valid] - 10.0) < 0.5)


def test_centroid_silence_flagged_absent():
    c = spectral_centroid(np.zeros(2000), FS)
    assert not np.any(c.valid)
    assert np.all(np.isnan(c.values))


# ---------------------------------------------------------------------------
# aggregate nuance
# ---------------------------------------------------------------------------

def test_aggregate_all_silent():
    out = aggregate_nuance([_cf(0.0, 0.0)], _cal())
    assert out == (0.0, 0.0, 0.0, 0)


def test_aggregate_complexity_counts_active():
    cal = _cal(keys=("EMG:0", "EMG:1"))
    chans = [_cf(0.5, 0.0, cid=0), _cf(0.01, 0.0, cid=1)]
    _, _, _, complexity = aggregate_nuance(chans, cal)
    assert complexity == 1


def test_aggregate_at_calibration_max_static():
    effort, abrupt, relax, complexity = aggregate_nuance([_cf(1.0, 0.0)], _cal())
    assert effort == 1.0 and abrupt == 0.0 and relax == 0.0 and complexity == 1


def test_aggregate_relaxation_from_negative_rate():
    _, _, relax, _ = aggregate_nuance([_cf(0.5, -5.0)], _cal(rate_max=10.0))
    assert relax == pytest.approx(0.5)


def test_aggregate_zero_calibration_errors():
    with pytest.raises(CalibrationError, match="calibration"):
        aggregate_nuance([_cf(0.5, 0.0)], _cal(env_max=0.0))


def test_aggregate_complexity_monotone_in_envelope():
    cal = _cal(keys=("EMG:0", "EMG:1"))
    lows = aggregate_nuance([_cf(0.05, 0.0, 0), _cf(0.5, 0.0, 1)], cal)[3]
    high = aggregate_nuance([_cf(0.8, 0.0, 0), _cf(0.5, 0.0, 1)], cal)[3]
    assert high >= lows


# ---------------------------------------------------------------------------
# invariance properties
# ---------------------------------------------------------------------------

def test_scale_covariance():
    rng = np.random.default_rng(3)
    x = np.clip(rng.standard_normal(4000) * 0.2, -1, 1)
    c = 3.0
    e1 = envelope(x, FS)
    e2 = envelope(np.clip(c * x, -10, 10), FS)
    assert np.allclose(e2.values, c * e1.values, rtol=1e-12)
    r1, r2 = change_rate(e1), change_rate(e2)
    assert np.allclose(r2.values, c * r1.values, rtol=1e-12)
    c1 = spectral_centroid(x, FS)
    c2 = spectral_centroid(c * x, FS)
    both = c1.valid & c2.valid
    assert np.allclose(c1.values[both], c2.values[both], rtol=1e-3)


def test_time_shift_equivariance():
    rng = np.random.default_rng(5)
    burst = np.clip(rng.standard_normal(1000) * 0.3, -1, 1)
    x1 = np.concatenate([burst, np.zeros(2000)])
    shift_s = 0.1  # 4 hops
    x2 = np.concatenate([np.zeros(int(shift_s * FS)), burst, np.zeros(2000)])
    e1 = envelope(x1, FS)
    e2 = envelope(x2, FS)
    k = int(round(shift_s / e1.hop))
    n = min(len(e1.values), len(e2.values) - k)
    assert np.allclose(e2.values[k:k + n], e1.values[:n], atol=1e-12)


# ---------------------------------------------------------------------------
# FeatureVector serialization
# ---------------------------------------------------------------------------

def test_feature_vector_jsonl_round_trip(tmp_path):
    fv = FeatureVector(
        time=1.25,
        channels=[ChannelFeatures(0, SignalKind.EMG, 0.5, -0.2, 12.5, None),
                  ChannelFeatures(0, SignalKind.MMG, 0.1, 0.0, None, 0.3)],
        effort=0.4, abruptness=0.1, relaxation_rate=0.0, complexity=1,
        regime={"MMG:0": {"zeta": 0.3, "valid": True}},
    )
    path = tmp_path / "f.jsonl"
    feat.write_jsonl([fv], path)
    loaded = list(feat.read_jsonl(path))
    assert len(loaded) == 1
    assert loaded[0].to_json() == fv.to_json()
    # field names exactly as the type definition
    obj = json.loads(path.read_text().strip())
    assert set(obj) == {"time", "channels", "effort", "abruptness",
                        "relaxation_rate", "complexity", "regime"}
    assert set(obj["channels"][0]) == {"channel_id", "kind", "envelope",
                                       "change_rate", "spectral_centroid",
                                       "damping_ratio"}


# ---------------------------------------------------------------------------
# streaming pipeline
# ---------------------------------------------------------------------------

def _run_pipeline(x, splits, calibration=None):
    pipeline = FeaturePipeline([(SignalKind.EMG, 0, FS)],
                               calibration=calibration)
    rows = []
    i = 0
    for s in splits:
        rows.extend(pipeline.push(
            SignalFrame(0, SignalKind.EMG, FS, i / FS, x[i:i + s])))
        i += s
    if i < x.size:
        rows.extend(pipeline.push(SignalFrame(0, SignalKind.EMG, FS, i / FS, x[i:])))
    rows.extend(pipeline.flush())
    return rows


def test_pipeline_matches_offline_envelope():
    rng = np.random.default_rng(11)
    x = np.clip(rng.standard_normal(3000) * 0.3, -1, 1)
    rows = _run_pipeline(x, [3000])
    offline = envelope(x, FS)
    assert len(rows) == len(offline.values)
    got = np.array([r.channels[0].envelope for r in rows])
    assert np.allclose(got, offline.values, atol=1e-12)
    rates = np.array([r.channels[0].change_rate for r in rows])
    assert np.allclose(rates, change_rate(offline).values, atol=1e-12)


def test_pipeline_split_invariant():
    rng = np.random.default_rng(13)
    x = np.clip(rng.standard_normal(2500) * 0.3, -1, 1)
    a = _run_pipeline(x, [2500])
    b = _run_pipeline(x, [123, 456, 789, 1000])
    assert [r.to_json() for r in a] == [r.to_json() for r in b]


def test_pipeline_aggregates_with_calibration():
    cal = _cal()
    x = np.concatenate([np.zeros(500), 0.8 * np.ones(1500)])
    rows = _run_pipeline(np.clip(x, -1, 1), [2000], calibration=cal)
    assert rows[-1].effort > 0.5
    assert rows[-1].complexity == 1
