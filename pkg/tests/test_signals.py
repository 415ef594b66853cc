import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from myoritual import signals as sig
from myoritual.signals import (BandpassFilter, ContractionEvent,
                               ContractionProfile, SignalFrame, SignalKind,
                               bandpass, frames_to_array, load_recording,
                               synth_emg, synth_mmg)

from conftest import windowed_rms


# ---------------------------------------------------------------------------
# SignalFrame / ContractionProfile invariants
# ---------------------------------------------------------------------------

def test_frame_rejects_out_of_range_samples():
    with pytest.raises(ValueError):
        SignalFrame(0, SignalKind.EMG, 1000.0, 0.0, np.array([0.0, 1.5]))


def test_frame_rejects_empty_and_nonfinite():
    with pytest.raises(ValueError):
        SignalFrame(0, SignalKind.EMG, 1000.0, 0.0, np.array([]))
    with pytest.raises(ValueError):
        SignalFrame(0, SignalKind.EMG, 1000.0, 0.0, np.array([np.nan]))


def test_profile_rejects_unordered_onsets():
    with pytest.raises(ValueError):
        ContractionProfile(events=[
            ContractionEvent(1.0, 0.5, 0.1, 0.1),
            ContractionEvent(0.5, 0.5, 0.1, 0.1),
        ])


def test_profile_json_round_trip(tmp_path, multi_burst_profile):
    path = tmp_path / "p.json"
    multi_burst_profile.save(path)
    loaded = ContractionProfile.load(path)
    assert loaded.to_json() == multi_burst_profile.to_json()


# ---------------------------------------------------------------------------
# load_recording
# ---------------------------------------------------------------------------

def test_load_mono_two_seconds(tmp_path):
    path = tmp_path / "r.wav"
    samples = 0.25 * np.sin(2 * np.pi * 5 * np.arange(2000) / 1000.0)
    sig.write_wav(path, samples, 1000.0)
    frames = list(load_recording(path, SignalKind.EMG))
    total = sum(f.samples.size for f in frames)
    assert total == 2000
    assert frames[0].start_time == 0.0
    assert frames[0].sample_rate == 1000.0
    # normalized to peak 1
    x, _ = frames_to_array(frames)
    assert np.abs(x).max() == pytest.approx(1.0, abs=1e-6)


def test_load_all_zeros_stays_zero(tmp_path):
    path = tmp_path / "z.wav"
    sig.write_wav(path, np.zeros(500), 1000.0)
    frames = list(load_recording(path, SignalKind.EMG))
    x, _ = frames_to_array(frames)
    assert np.all(x == 0.0)


def test_load_stereo_yields_two_channels(tmp_path):
    path = tmp_path / "s.wav"
    data = np.stack([np.ones(100) * 0.5, -np.ones(100) * 0.25], axis=1)
    sig.write_wav(path, data, 1000.0)
    frames = list(load_recording(path, SignalKind.EMG))
    assert {f.channel_id for f in frames} == {0, 1}


def test_load_missing_file():
    with pytest.raises(FileNotFoundError):
        list(load_recording("/nonexistent/file.wav", SignalKind.EMG))


def test_load_rejects_8bit(tmp_path):
    from scipy.io import wavfile
    path = tmp_path / "b.wav"
    wavfile.write(str(path), 1000, (np.ones(100) * 200).astype(np.uint8))
    with pytest.raises(ValueError, match="unsupported bit depth"):
        list(load_recording(path, SignalKind.EMG))


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "g.wav"
    path.write_bytes(b"not a wav file at all")
    with pytest.raises(ValueError, match="unreadable"):
        list(load_recording(path, SignalKind.EMG))


# ---------------------------------------------------------------------------
# synth_emg
# ---------------------------------------------------------------------------

def test_synth_emg_empty_profile_is_silent():
    profile = ContractionProfile(events=[], noise_floor=0.0)
    x, _ = frames_to_array(synth_emg(profile, 1.0, 1000.0, seed=3))
    assert np.all(x == 0.0)


def test_synth_emg_rms_peaks_near_event(single_burst_profile):
    x, fs = frames_to_array(synth_emg(single_burst_profile, 2.0, 1000.0, seed=5))
    rms = windowed_rms(x, fs, 0.1)
    peak_t = (np.argmax(rms) + int(0.1 * fs)) / fs
    ev = single_burst_profile.events[0]
    assert ev.onset <= peak_t <= ev.onset + ev.rise_time + ev.decay_time


def test_synth_emg_deterministic(single_burst_profile):
    a, _ = frames_to_array(synth_emg(single_burst_profile, 1.5, 1000.0, seed=11))
    b, _ = frames_to_array(synth_emg(single_burst_profile, 1.5, 1000.0, seed=11))
    assert np.array_equal(a, b)
    c, _ = frames_to_array(synth_emg(single_burst_profile, 1.5, 1000.0, seed=12))
    assert not np.array_equal(a, c)


# ---------------------------------------------------------------------------
# synth_mmg
# ---------------------------------------------------------------------------

def test_synth_mmg_critical_damping_no_ringing(single_burst_profile):
    x, fs = frames_to_array(
        synth_mmg(1.0, 2 * np.pi * 8.0, single_burst_profile, 2.0, 4000.0, seed=0))
    peak = np.argmax(np.abs(x))
    tail = x[peak:]
    crossings = np.sum(np.diff(np.sign(tail[np.abs(tail) > 1e-12])) != 0)
    assert crossings == 0


def test_synth_mmg_ringing_period(single_burst_profile):
    f0 = 8.0
    x, fs = frames_to_array(
        synth_mmg(0.1, 2 * np.pi * f0, single_burst_profile, 3.0, 4000.0, seed=0))
    start = int((single_burst_profile.events[0].onset + 0.05) * fs)
    seg = x[start:start + int(1.0 * fs)]
    up = np.where((seg[:-1] < 0) & (seg[1:] >= 0))[0]
    periods = np.diff(up) / fs
    assert abs(np.mean(periods) - 1.0 / f0) / (1.0 / f0) < 0.02


def test_synth_mmg_no_excitation_silent():
    profile = ContractionProfile(events=[], noise_floor=0.0)
    x, _ = frames_to_array(synth_mmg(0.2, 2 * np.pi * 5, profile, 1.0, 4000.0, 0))
    assert np.all(x == 0.0)


def test_synth_mmg_rejects_omega_at_nyquist(single_burst_profile):
    with pytest.raises(ValueError, match="Nyquist"):
        list(synth_mmg(0.2, 2 * np.pi * 2000.0, single_burst_profile,
                       1.0, 4000.0, 0))


# ---------------------------------------------------------------------------
# bandpass
# ---------------------------------------------------------------------------

def _steady_amplitude(y: np.ndarray, fs: float, settle: float) -> float:
    return float(np.abs(y[int(settle * fs):]).max())


def test_bandpass_blocks_dc():
    fs = 1000.0
    frames = [SignalFrame(0, SignalKind.EMG, fs, 0.0, np.full(8000, 0.5))]
    y, _ = frames_to_array(bandpass(frames, 1.0, 40.0))
    assert _steady_amplitude(y, fs, 6.0) < 0.01 * 0.5


def test_bandpass_passes_10hz():
    fs = 1000.0
    t = np.arange(10000) / fs
    frames = [SignalFrame(0, SignalKind.EMG, fs, 0.0, np.sin(2 * np.pi * 10 * t))]
    y, _ = frames_to_array(bandpass(frames, 1.0, 40.0))
    amp = _steady_amplitude(y, fs, 6.0)
    assert 0.89 <= amp <= 1.12


def test_bandpass_rejects_200hz():
    fs = 1000.0
    t = np.arange(8000) / fs
    frames = [SignalFrame(0, SignalKind.EMG, fs, 0.0, np.sin(2 * np.pi * 200 * t))]
    y, _ = frames_to_array(bandpass(frames, 1.0, 40.0))
    assert _steady_amplitude(y, fs, 2.0) < 0.01


def test_bandpass_rejects_bad_edges():
    with pytest.raises(ValueError):
        BandpassFilter(1000.0, 40.0, 1.0)
    with pytest.raises(ValueError):
        BandpassFilter(1000.0, 1.0, 600.0)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(min_value=1, max_value=500), min_size=1, max_size=6))
def test_bandpass_streaming_equivalence(block_sizes):
    fs = 1000.0
    rng = np.random.default_rng(42)
    x = np.clip(rng.standard_normal(2000) * 0.3, -1, 1)
    one = BandpassFilter(fs)
    whole = one.process(x)
    split = BandpassFilter(fs)
    parts = []
    i = 0
    for b in block_sizes:
        if i >= x.size:
            break
        parts.append(split.process(x[i:i + b]))
        i += b
    if i < x.size:
        parts.append(split.process(x[i:]))
    assert np.array_equal(whole, np.concatenate(parts))


def test_bandpass_never_increases_energy():
    fs = 1000.0
    rng = np.random.default_rng(7)
    for trial in range(5):
        x = np.clip(rng.standard_normal(4000) * 0.3, -1, 1)
        f = BandpassFilter(fs)
        y = f.process(x)
        assert np.sum(y ** 2) <= np.sum(x ** 2) * (1.0 + 1e-9)


def test_bandpass_preserves_timestamps_and_channels():
    fs = 1000.0
    frames = [
        SignalFrame(0, SignalKind.EMG, fs, 0.0, np.zeros(100)),
        SignalFrame(1, SignalKind.EMG, fs, 0.0, np.zeros(100)),
        SignalFrame(0, SignalKind.EMG, fs, 0.1, np.zeros(100)),
    ]
    out = list(bandpass(frames))
    assert [(f.channel_id, f.start_time) for f in out] == \
        [(0, 0.0), (1, 0.0), (0, 0.1)]


def test_bandpass_group_delay_documented():
    f = BandpassFilter(1000.0)
    assert f.group_delay > 0
