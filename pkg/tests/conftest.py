import numpy as np
import pytest

from myoritual.signals import ContractionEvent, ContractionProfile


@pytest.fixture
def single_burst_profile():
    return ContractionProfile(
        events=[ContractionEvent(onset=0.5, peak_level=1.0,
                                 rise_time=0.1, decay_time=0.3)],
        noise_floor=0.0,
    )


@pytest.fixture
def multi_burst_profile():
    return ContractionProfile(
        events=[
            ContractionEvent(onset=0.1, peak_level=1.0, rise_time=0.05, decay_time=0.2),
            ContractionEvent(onset=2.1, peak_level=0.8, rise_time=0.05, decay_time=0.2),
            ContractionEvent(onset=4.1, peak_level=1.0, rise_time=0.05, decay_time=0.2),
        ],
        noise_floor=0.0,
    )


def windowed_rms(x: np.ndarray, fs: float, window: float) -> np.ndarray:
    """Independent trailing-RMS oracle used across test modules."""
    n = int(round(window * fs))
    csum = np.concatenate([[0.0], np.cumsum(np.asarray(x, float) ** 2)])
    out = np.empty(x.size - n + 1)
    for i in range(out.size):
        out[i] = np.sqrt((csum[i + n] - csum[i]) / n)
    return out
