"""Shared helpers: deterministic seed derivation, clipping, validation."""
from __future__ import annotations

import zlib

import numpy as np


def derive_seed(master_seed: int, label: str, index: int = 0) -> int:
    """Derive a stable child seed from a master seed and a purpose label.

    Every seeded component of a session pulls its seed through this, so one
    master seed reproduces the whole artifact tree while components stay
    statistically independent.
    """
    key = zlib.crc32(f"{label}:{index}".encode("utf-8"))
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(key,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def clip01(x):
    return np.clip(x, 0.0, 1.0)


def require(cond: bool, message: str) -> None:
    if not cond:
        raise ValueError(message)


def as_float_array(x, name: str, ndim: int | None = None) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr
