"""Command-line surface tying both pipelines together.

Subcommands: synth, analyze, train-nuance, run-corpus, run-ritual, serve.
Exit codes: 0 success, 1 runtime failure (one machine-parseable line
"error: ..." on stderr), 2 usage errors (argparse).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="myoritual",
        description="Biosignal-driven feedback synthesis and ritual AV sequencing")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic biosignal WAV")
    p.add_argument("--profile", required=True, help="contraction profile JSON")
    p.add_argument("--kind", required=True, choices=["EMG", "MMG"])
    p.add_argument("--duration", type=float, required=True)
    p.add_argument("--sample-rate", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--zeta", type=float, default=0.2, help="MMG damping ratio")
    p.add_argument("--omega-hz", type=float, default=8.0,
                   help="MMG natural frequency (Hz)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("analyze", help="extract features (and regime for MMG)")
    p.add_argument("--input", required=True, help="WAV recording")
    p.add_argument("--kind", required=True, choices=["EMG", "MMG"])
    p.add_argument("--band", type=float, nargs=2, default=None,
                   metavar=("LO", "HI"))
    p.add_argument("--window", type=float, default=None)
    p.add_argument("--hop", type=float, default=None)
    p.add_argument("--calibration", default=None,
                   help="calibration JSON for aggregate nuances")
    p.add_argument("--out", required=True, help="feature JSONL path")

    p = sub.add_parser("train-nuance", help="train the nuance model from demos")
    p.add_argument("--demos", required=True, help="demonstration store directory")
    p.add_argument("--ridge-lambda", type=float, default=0.0)
    p.add_argument("--out", required=True, help="model JSON path")

    p = sub.add_parser("run-corpus", help="offline instrument pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override config seed")

    p = sub.add_parser("run-ritual", help="learning loop + event scheduler")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override config seed")

    p = sub.add_parser("serve", help="live control/telemetry websocket service")
    p.add_argument("--config", required=True)
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    return parser


def _cmd_synth(args) -> int:
    from . import signals as sig
    profile = sig.ContractionProfile.load(args.profile)
    kind = sig.SignalKind(args.kind)
    rate = args.sample_rate or (sig.DEFAULT_EMG_RATE if kind == sig.SignalKind.EMG
                                else sig.DEFAULT_MMG_RATE)
    if kind == sig.SignalKind.EMG:
        frames = sig.synth_emg(profile, args.duration, rate, args.seed)
    else:
        frames = sig.synth_mmg(args.zeta, 2 * np.pi * args.omega_hz, profile,
                               args.duration, rate, args.seed)
    samples, rate = sig.frames_to_array(frames)
    sig.write_wav(args.out, samples, rate)
    print(f"wrote {args.out} ({samples.size} samples at {rate:g} Hz)")
    return 0


def _cmd_analyze(args) -> int:
    from . import features as feat
    from . import regime as reg
    from . import signals as sig
    kind = sig.SignalKind(args.kind)
    band = tuple(args.band) if args.band else sig.DEFAULT_BAND
    window = args.window or feat.DEFAULT_WINDOW
    hop = args.hop or feat.DEFAULT_HOP
    frames = list(sig.bandpass(sig.load_recording(args.input, kind),
                               band[0], band[1]))
    channels = sorted({(f.kind, f.channel_id, f.sample_rate) for f in frames},
                      key=lambda c: c[1])
    calibration = (feat.Calibration.load(args.calibration)
                   if args.calibration else None)
    pipeline = feat.FeaturePipeline(list(channels), window=window, hop=hop,
                                    band=band, calibration=calibration)
    if kind == sig.SignalKind.MMG:
        for _, cid, rate in channels:
            ch_frames = [f for f in frames if f.channel_id == cid]
            ests = list(reg.estimate_stream(ch_frames, window=window))
            pipeline.merge_regime(kind, cid, ests)
    rows = []
    for f in frames:
        rows.extend(pipeline.push(f))
    rows.extend(pipeline.flush())
    feat.write_jsonl(rows, args.out)
    print(f"wrote {args.out} ({len(rows)} rows, {len(channels)} channels)")
    return 0


def _cmd_train_nuance(args) -> int:
    from . import nuance as nu
    store = nu.DemoStore(args.demos)
    model = nu.train(store, ridge_lambda=args.ridge_lambda)
    model.save(args.out)
    print(f"wrote {args.out} (demos={len(store)}, "
          f"lambda={model.ridge_lambda:g}, dim={model.feature_dim})")
    return 0


def _cmd_run_corpus(args) -> int:
    from . import session
    cfg = _load_config(args)
    art = session.run_corpus(cfg)
    print(f"corpus run complete: {art.rows} rows -> {cfg.output_dir}")
    return 0


def _cmd_run_ritual(args) -> int:
    from . import session
    cfg = _load_config(args)
    art = session.run_ritual(cfg)
    print(f"ritual run {art.status}: best distance {art.best_distance:.4f} "
          f"-> {cfg.output_dir}")
    return 0


def _cmd_serve(args) -> int:
    from . import bridge
    cfg = _load_config(args)
    bridge.serve_forever(cfg, host=args.host, port=args.port)
    return 0


def _load_config(args):
    from . import session
    cfg = session.SessionConfig.load(args.config)
    if args.seed is not None:
        cfg.raw["seed"] = args.seed
    return cfg


_COMMANDS = {
    "synth": _cmd_synth,
    "analyze": _cmd_analyze,
    "train-nuance": _cmd_train_nuance,
    "run-corpus": _cmd_run_corpus,
    "run-ritual": _cmd_run_ritual,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except KeyboardInterrupt:
        print("error: interrupted", file=sys.stderr)
        return 1
    except Exception as exc:  # one-line machine-parseable failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
