"""Session configuration, pipeline orchestration and artifact layout.

One JSON config drives both pipelines. Every artifact except meta.json is a
pure function of (config, seed): wall-clock timestamps are quarantined in
meta.json so the rest of the output directory is byte-reproducible. Output
layout: audio/, logs/, models/, meta.json. Artifacts are written to a
temporary name and renamed into place, so a failed run leaves no truncated
files behind.
"""
from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import features as feat
from . import nuance as nu
from . import oscnet as osc
from . import regime as reg
from . import ritual as rit
from . import signals as sig
from .util import derive_seed, require


class SessionError(RuntimeError):
    pass


def _get(cfg: dict, path: str, default=None):
    node: Any = cfg
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return node


@dataclass
class SessionConfig:
    """Validated view over the session config document."""

    raw: dict
    base_dir: Path

    @classmethod
    def load(cls, path: str | Path) -> "SessionConfig":
        path = Path(path)
        if not path.exists():
            raise SessionError(f"config not found: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        cfg = cls(raw=raw, base_dir=path.parent.resolve())
        cfg.validate()
        return cfg

    def validate(self) -> None:
        mode = self.raw.get("mode")
        require(mode in ("corpus", "ritual"), "mode must be 'corpus' or 'ritual'")
        require("output_dir" in self.raw, "output_dir is required")
        for ch in _get(self.raw, "signals.channels", []) or []:
            src = ch.get("source", {})
            if src.get("type") == "wav":
                p = self.resolve(src["path"])
                if not p.exists():
                    raise SessionError(f"signal source not found: {p}")
            elif src.get("type") == "synth":
                p = self.resolve(src["profile"])
                if not p.exists():
                    raise SessionError(f"contraction profile not found: {p}")
        for key in ("nuance.model", "features.calibration", "ritual.pattern_bank"):
            val = _get(self.raw, key)
            if val is not None and not self.resolve(val).exists():
                raise SessionError(f"{key} path not found: {self.resolve(val)}")

    def resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else (self.base_dir / path)

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    @property
    def output_dir(self) -> Path:
        return self.resolve(self.raw["output_dir"])


def _ensure_layout(out: Path) -> dict[str, Path]:
    dirs = {"audio": out / "audio", "logs": out / "logs", "models": out / "models"}
    for d in dirs.values():
        d.mkdir(parents=True, exist_ok=True)
    return dirs


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _atomic_write_jsonl(path: Path, rows) -> None:
    _atomic_write_text(path, "".join(json.dumps(r) + "\n" for r in rows))


def _write_meta(out: Path, mode: str, status: str, t0: float,
                extra: dict | None = None) -> None:
    meta = {"mode": mode, "status": status,
            "wall_clock_start": t0, "wall_clock_end": time.time()}
    if extra:
        meta.update(extra)
    _atomic_write_text(out / "meta.json", json.dumps(meta, indent=2))


# ---------------------------------------------------------------------------
# signal source construction
# ---------------------------------------------------------------------------

def _load_channel(cfg: SessionConfig, ch: dict, master_seed: int,
                  index: int) -> list[sig.SignalFrame]:
    kind = sig.SignalKind(ch["kind"])
    cid = int(ch.get("channel_id", 0))
    src = ch["source"]
    if src["type"] == "wav":
        frames = [f for f in sig.load_recording(cfg.resolve(src["path"]), kind,
                                                gain=src.get("gain"))
                  if f.channel_id == int(src.get("wav_channel", 0))]
        return [sig.SignalFrame(cid, kind, f.sample_rate, f.start_time, f.samples)
                for f in frames]
    if src["type"] == "synth":
        profile = sig.ContractionProfile.load(cfg.resolve(src["profile"]))
        seed = derive_seed(master_seed, f"synth:{kind.value}", cid)
        duration = float(src["duration"])
        rate = float(src.get("sample_rate",
                             sig.DEFAULT_EMG_RATE if kind == sig.SignalKind.EMG
                             else sig.DEFAULT_MMG_RATE))
        if kind == sig.SignalKind.EMG:
            return list(sig.synth_emg(profile, duration, rate, seed, channel_id=cid))
        zeta = float(src.get("zeta", 0.2))
        omega = 2 * np.pi * float(src.get("omega_hz", 8.0))
        return list(sig.synth_mmg(zeta, omega, profile, duration, rate, seed,
                                  channel_id=cid))
    raise SessionError(f"unknown source type for channel {index}: {src.get('type')}")


# ---------------------------------------------------------------------------
# corpus pipeline
# ---------------------------------------------------------------------------

@dataclass
class CorpusArtifacts:
    features_log: Path
    actions_log: Path | None
    audio: Path | None
    calibration: Path | None
    rows: int = 0


def run_corpus(cfg: SessionConfig) -> CorpusArtifacts:
    """Offline end-to-end instrument run: signals -> analysis -> synthesis."""
    t0 = time.time()
    out = cfg.output_dir
    dirs = _ensure_layout(out)
    master = cfg.seed
    band = tuple(_get(cfg.raw, "signals.band", list(sig.DEFAULT_BAND)))
    window = float(_get(cfg.raw, "features.window", feat.DEFAULT_WINDOW))
    hop = float(_get(cfg.raw, "features.hop", feat.DEFAULT_HOP))

    channel_cfgs = _get(cfg.raw, "signals.channels")
    if not channel_cfgs:
        raise SessionError("signals.channels must list at least one channel")

    # ingest + band-limit every channel
    filtered: dict[tuple[sig.SignalKind, int], tuple[float, np.ndarray]] = {}
    for i, ch in enumerate(channel_cfgs):
        frames = _load_channel(cfg, ch, master, i)
        frames = list(sig.bandpass(frames, band[0], band[1]))
        samples, rate = sig.frames_to_array(frames)
        key = (frames[0].kind, frames[0].channel_id)
        if key in filtered:
            raise SessionError(f"duplicate channel {key[0].value}:{key[1]}")
        filtered[key] = (rate, samples)
    calibration_only = bool(_get(cfg.raw, "nuance.calibration_only", False))
    cal_path_cfg = _get(cfg.raw, "features.calibration")

    # calibration: explicit file, or derived from this input
    cal_out: Path | None = None
    if cal_path_cfg:
        calibration = feat.Calibration.load(cfg.resolve(cal_path_cfg))
    else:
        env_by_channel = {}
        for (kind, cid), (rate, samples) in filtered.items():
            env_by_channel[f"{kind.value}:{cid}"] = feat.envelope(
                samples, rate, window, hop)
        calibration = feat.Calibration.from_series(env_by_channel)
        cal_out = dirs["models"] / "calibration.json"
        _atomic_write_text(cal_out, json.dumps(
            {"env_max": calibration.env_max, "rate_max": calibration.rate_max},
            indent=2, sort_keys=True))

    pipeline = feat.FeaturePipeline(
        channels=[(k, c, filtered[(k, c)][0]) for (k, c) in filtered],
        window=window, hop=hop, band=band,
        silence_rms=float(_get(cfg.raw, "features.silence_rms", feat.SILENCE_RMS)),
        activity_fraction=float(_get(cfg.raw, "features.activity_fraction",
                                     feat.ACTIVITY_FRACTION)),
        calibration=None if calibration_only else calibration,
    )

    # regime estimation on MMG channels, merged by timestamp
    for (kind, cid), (rate, samples) in filtered.items():
        if kind != sig.SignalKind.MMG:
            continue
        tracker = reg.RegimeTracker(
            rate, window=float(_get(cfg.raw, "regime.window", window)), hop=hop,
            forgetting=float(_get(cfg.raw, "regime.forgetting",
                                  reg.DEFAULT_FORGETTING)),
            decimate_to=float(_get(cfg.raw, "regime.decimate_to",
                                   reg.DEFAULT_DECIMATED_RATE)))
        ests = tracker.push(sig.SignalFrame(cid, kind, rate, 0.0, samples))
        ests += tracker.flush()
        pipeline.merge_regime(kind, cid, ests)

    rows: list[feat.FeatureVector] = []
    for (kind, cid), (rate, samples) in filtered.items():
        rows_new = pipeline.push(sig.SignalFrame(cid, kind, rate, 0.0, samples))
        rows.extend(rows_new)
    rows.extend(pipeline.flush())

    features_log = dirs["logs"] / "features.jsonl"
    _atomic_write_jsonl(features_log, (r.to_json() for r in rows))

    if calibration_only:
        _write_meta(out, "corpus", "complete", t0, {"rows": len(rows),
                                                    "calibration_only": True})
        return CorpusArtifacts(features_log, None, None, cal_out, len(rows))

    model_path = _get(cfg.raw, "nuance.model")
    if not model_path:
        raise SessionError("nuance.model is required unless calibration_only")
    model = nu.NuanceModel.load(cfg.resolve(model_path))

    net = osc.OscillatorNetwork(
        sample_rate=float(_get(cfg.raw, "oscnet.sample_rate",
                               osc.DEFAULT_SAMPLE_RATE)),
        n_channels=int(_get(cfg.raw, "oscnet.n_channels", 2)),
        g_max=float(_get(cfg.raw, "oscnet.g_max", osc.DEFAULT_G_MAX)),
        mod_depth=float(_get(cfg.raw, "oscnet.mod_depth", osc.DEFAULT_MOD_DEPTH)),
        slew_time=float(_get(cfg.raw, "oscnet.slew_time", osc.DEFAULT_SLEW_TIME)),
        master_gain=float(_get(cfg.raw, "oscnet.master_gain", 0.8)),
        feedback_init=float(_get(cfg.raw, "oscnet.feedback_init", 0.0)),
        seed=derive_seed(master, "oscnet"),
    )
    amap = nu.ActionMapConfig(**(_get(cfg.raw, "nuance.action_map") or {}))

    fs = net.sample_rate
    blocks: list[np.ndarray] = []
    action_rows: list[dict] = []
    rendered = 0
    for idx, fv in enumerate(rows):
        nuance_vec = model.predict(nu.feature_row(fv))
        action = nu.map_to_actions(nuance_vec, derive_seed(master, "action", idx),
                                   amap)
        net.apply(action)
        end = int(round((idx + 1) * hop * fs))
        blocks.append(net.render(end - rendered))
        rendered = end
        action_rows.append({"time": fv.time,
                            "nuance": [float(v) for v in nuance_vec],
                            "action": action.to_json()})

    audio_path = dirs["audio"] / "corpus.wav"
    audio = (np.vstack(blocks) if blocks
             else np.zeros((1, net.n_channels)))
    sig.write_wav(audio_path, audio, fs)
    actions_log = dirs["logs"] / "actions.jsonl"
    _atomic_write_jsonl(actions_log, action_rows)
    _write_meta(out, "corpus", "complete", t0, {"rows": len(rows)})
    return CorpusArtifacts(features_log, actions_log, audio_path, cal_out,
                           len(rows))


# ---------------------------------------------------------------------------
# ritual pipeline
# ---------------------------------------------------------------------------

@dataclass
class RitualArtifacts:
    events_log: Path
    episodes_log: Path
    proximity_log: Path
    result: Path
    status: str
    best_distance: float


def run_ritual(cfg: SessionConfig) -> RitualArtifacts:
    """Learning loop plus deterministic event scheduling."""
    t0 = time.time()
    out = cfg.output_dir
    dirs = _ensure_layout(out)
    master = cfg.seed
    rcfg = cfg.raw.get("ritual", {})

    target_digits = rcfg.get("target")
    target = (rit.RitualTarget(np.asarray(target_digits, dtype=float))
              if target_digits is not None
              else rit.RitualTarget.random(derive_seed(master, "target")))
    episodes = int(rcfg.get("episodes", 200))
    steps = int(rcfg.get("steps_per_episode", 50))
    sps = float(rcfg.get("steps_per_second", 2.0))
    acfg = rcfg.get("agent", {})
    agent = rit.CrossEntropyAgent(
        steps_per_episode=steps,
        population=int(acfg.get("population", 32)),
        elite_frac=float(acfg.get("elite_frac", 0.25)),
        sigma0=float(acfg.get("sigma0", 0.7)),
        sigma_decay=float(acfg.get("sigma_decay", 0.99)),
        max_step=float(acfg.get("max_step", 1.0)),
        seed=derive_seed(master, "agent"),
    )
    env = rit.RitualEnv(target, max_step=float(acfg.get("max_step", 1.0)))
    bank_path = rcfg.get("pattern_bank")
    try:
        bank = (rit.PatternBank.load(cfg.resolve(bank_path)) if bank_path
                else rit.default_bank())
    except (ValueError, json.JSONDecodeError) as exc:
        raise SessionError(f"malformed pattern bank: {exc}") from exc

    th = rcfg.get("thresholds", {})
    t_hi = float(th.get("t_hi", rit.mapping.DEFAULT_T_HI))
    t_lo = float(th.get("t_lo", rit.mapping.DEFAULT_T_LO))
    dcfg = rit.DirectiveConfig(**(rcfg.get("directives") or {}))
    pulse_rates = bank.pulse_rates()
    stop_distance = rcfg.get("stop_distance")

    episode_rows: list[dict] = []
    prox_rows: list[dict] = []
    timeline: list[tuple[float, rit.AVDirective]] = []
    best_distance = env.distance(env.start)
    status = "completed"
    steps_run = 0
    for ep in range(episodes):
        trajectory, summary = rit.run_episode(agent, env, ep)
        best_distance = min(best_distance, summary.best_distance)
        row = summary.to_json()
        row["best_distance_overall"] = best_distance
        episode_rows.append(row)
        for k, (pos, reward) in enumerate(trajectory):
            t = steps_run / sps
            report = rit.proximity(pos, target, t_hi, t_lo, time=t)
            directive = rit.direct(report, dcfg, pulse_rates)
            timeline.append((t, directive))
            prox_rows.append({
                "t": t, "episode": ep, "step": k,
                "position": [float(v) for v in pos],
                "values": [int(v) for v in report.values],
                "volume": [float(v) for v in directive.volume],
                "brightness": [float(v) for v in directive.brightness],
                "reward": reward,
            })
            steps_run += 1
        if stop_distance is not None and best_distance <= float(stop_distance):
            status = "target_reached"
            break

    duration = steps_run / sps
    limit = rcfg.get("schedule_limit_s")
    if limit is not None:
        duration = min(duration, float(limit))
    events = rit.schedule(timeline, bank, duration)

    mirror_cfg = rcfg.get("udp_mirror")
    if mirror_cfg:
        mirror = rit.UdpMirror(mirror_cfg["host"], int(mirror_cfg["port"]))
        try:
            for ev in events:
                if ev["kind"] == "light":
                    mirror.send(ev)
        finally:
            mirror.close()

    events_log = dirs["logs"] / "events.jsonl"
    episodes_log = dirs["logs"] / "episodes.jsonl"
    proximity_log = dirs["logs"] / "proximity.jsonl"
    result_path = out / "result.json"
    _atomic_write_jsonl(events_log, events)
    _atomic_write_jsonl(episodes_log, episode_rows)
    _atomic_write_jsonl(proximity_log, prox_rows)
    _atomic_write_text(result_path, json.dumps({
        "status": status,
        "episodes_run": len(episode_rows),
        "steps_run": steps_run,
        "best_distance": best_distance,
        "target": target.to_json(),
        "final_sigma": agent.sigma,
    }, indent=2))
    _write_meta(out, "ritual", "complete", t0)
    return RitualArtifacts(events_log, episodes_log, proximity_log, result_path,
                           status, best_distance)
