"""Deterministic event scheduler: directives + pattern bank -> event stream.

All ten musical patterns and light shapes loop concurrently from time zero.
A directive issued at time t takes effect at the next beat boundary; the
velocity of every note event and the level of every light pulse are scaled
by the directive in effect at the beat the event falls in. Patterns whose
volume is zero still emit their events (velocity 0), so the log always
carries the full structure.
"""
from __future__ import annotations

import json
import socket
from typing import Iterable, Sequence

import numpy as np

from .mapping import AVDirective
from .patterns import BANK_SIZE, PatternBank


class ClockError(ValueError):
    """Raised when directive timestamps run backwards."""


def _effect_beat(t: float, spb: float) -> int:
    """First beat boundary at or after time t."""
    return int(np.ceil(t / spb - 1e-9))


def schedule(directives: Sequence[tuple[float, AVDirective]],
             bank: PatternBank, duration: float,
             start_time: float = 0.0) -> list[dict]:
    """Expand a directive timeline into a time-ordered event list.

    Events are dicts: notes {t, kind, pattern, pitch, velocity, dur} and
    light pulses {t, kind, pattern, level}. Deterministic: equal inputs give
    byte-identical JSON lines.
    """
    if duration <= 0:
        return []
    spb = bank.seconds_per_beat
    last_t = -np.inf
    for t, _ in directives:
        if t < last_t:
            raise ClockError(f"directive clock ran backwards at t={t}")
        last_t = t

    total_beats = int(np.ceil(duration / spb))
    # step function: directive index in effect at each beat
    vol = np.zeros((total_beats + 1, BANK_SIZE))
    bri = np.zeros((total_beats + 1, BANK_SIZE))
    have = np.zeros(total_beats + 1, dtype=bool)
    for t, d in directives:
        b = _effect_beat(t - start_time, spb)
        if b > total_beats:
            continue
        b = max(b, 0)
        vol[b:] = d.volume
        bri[b:] = d.brightness
        have[b:] = True

    events: list[dict] = []
    for i in range(BANK_SIZE):
        pattern = bank.patterns[i]
        loops = int(np.ceil(duration / (pattern.loop_beats * spb)))
        for m in range(loops):
            base_beat = m * pattern.loop_beats
            for ev in pattern.events:
                beat = base_beat + ev.onset
                t = start_time + beat * spb
                if t - start_time >= duration:
                    continue
                bi = min(int(beat), total_beats)
                velocity = float(vol[bi, i]) if have[bi] else 0.0
                events.append({
                    "t": round(t, 9), "kind": "note", "pattern": i,
                    "pitch": ev.pitch, "velocity": velocity,
                    "dur": round(ev.duration * spb, 9),
                })
        shape = bank.lights[i]
        loops = int(np.ceil(duration / (shape.loop_beats * spb)))
        for m in range(loops):
            base_beat = m * shape.loop_beats
            for beat_off, level in shape.points:
                beat = base_beat + beat_off
                t = start_time + beat * spb
                if t - start_time >= duration:
                    continue
                bi = min(int(beat), total_beats)
                scaled = float(bri[bi, i]) * level if have[bi] else 0.0
                events.append({
                    "t": round(t, 9), "kind": "light", "pattern": i,
                    "level": scaled,
                })
    events.sort(key=lambda e: (e["t"], e["kind"], e["pattern"],
                               e.get("pitch", -1)))
    return events


def write_events(events: Iterable[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(json.dumps(ev) + "\n")


class UdpMirror:
    """Mirror light events as single-line JSON datagrams (venue stand-in)."""

    def __init__(self, host: str, port: int):
        self.addr = (host, port)
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

    def send(self, event: dict) -> None:
        self._sock.sendto((json.dumps(event) + "\n").encode("utf-8"), self.addr)

    def close(self) -> None:
        self._sock.close()
