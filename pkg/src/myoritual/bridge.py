"""Live control/telemetry service over websockets.

One authoritative engine loop ticks the analysis/synthesis/learning chain;
the service streams state snapshots to any number of read-only clients and
accepts commands from one read-write operator (claimable with `takeover`).
Every message on the wire is an envelope {"v": 1, "seq", "t", "type",
"payload"} with a per-connection strictly increasing seq. Commands are
acknowledged with `ack` or `err` carrying the command's own seq. Slow
consumers never stall the engine: per connection only the latest snapshot of
each stream type is kept (stale frames dropped); command replies are queued
and never dropped. Unknown inbound types are ignored with a logged warning;
malformed JSON yields `err` and the connection stays open.

Stream types and cadences: `features` and `regime` at the feature hop
(<= 40 Hz), `oscnet_state` and `ritual_proximity` at <= 10 Hz,
`ritual_episode` once per finished episode.
"""
from __future__ import annotations

import asyncio
import json
import logging
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import features as feat
from . import nuance as nu
from . import oscnet as osc
from . import regime as reg
from . import ritual as rit
from . import signals as sig
from .util import derive_seed

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1

COMMANDS = frozenset({
    "start", "stop", "record_demo", "end_demo", "train", "set_gain",
    "set_thresholds", "agent_pause", "agent_resume", "set_sigma", "takeover",
})


class CommandError(ValueError):
    pass


@dataclass
class EngineConfig:
    seed: int = 0
    hop: float = 0.025
    window: float = 0.2
    oscnet_rate: float = 8000.0
    loop_duration: float = 4.0
    steps_per_episode: int = 50
    state_every: int = 4          # oscnet/proximity cadence in ticks
    demo_dir: str | None = None

    @classmethod
    def from_session(cls, session_cfg) -> "EngineConfig":
        raw = session_cfg.raw.get("bridge", {})
        return cls(
            seed=session_cfg.seed,
            hop=float(raw.get("hop", 0.025)),
            oscnet_rate=float(raw.get("oscnet_rate", 8000.0)),
            steps_per_episode=int(raw.get("steps_per_episode", 50)),
            demo_dir=raw.get("demo_dir"),
        )


class LiveEngine:
    """Synchronous engine core; the server owns it through one event loop.

    A seeded synthetic biosignal buffer loops as the live input stand-in, so
    calibration-by-demonstration and training run against real feature data
    even on a desk with no sensors attached.
    """

    def __init__(self, config: EngineConfig, demo_store: nu.DemoStore | None = None):
        self.cfg = config
        self.clock = 0.0
        self.running = False
        self.agent_paused = False
        self.tick_count = 0
        self.t_hi = rit.mapping.DEFAULT_T_HI
        self.t_lo = rit.mapping.DEFAULT_T_LO

        seed = config.seed
        profile = sig.ContractionProfile(events=[
            sig.ContractionEvent(0.3 + k * 0.9, 1.0, 0.06, 0.3)
            for k in range(4)])
        emg, emg_rate = sig.frames_to_array(sig.bandpass(sig.synth_emg(
            profile, config.loop_duration, seed=derive_seed(seed, "live-emg"))))
        mmg, mmg_rate = sig.frames_to_array(sig.bandpass(sig.synth_mmg(
            0.15, 2 * np.pi * 8.0, profile, config.loop_duration,
            seed=derive_seed(seed, "live-mmg"))))
        self._loops = {
            (sig.SignalKind.EMG, 0): (emg, emg_rate),
            (sig.SignalKind.MMG, 0): (mmg, mmg_rate),
        }

        env_series = {
            f"{kind.value}:{cid}": feat.envelope(x, rate, config.window, config.hop)
            for (kind, cid), (x, rate) in self._loops.items()
        }
        self.calibration = feat.Calibration.from_series(env_series)
        self.pipeline = feat.FeaturePipeline(
            channels=[(k, c, self._loops[(k, c)][1]) for k, c in self._loops],
            window=config.window, hop=config.hop, calibration=self.calibration)
        self.trackers = {
            (kind, cid): reg.RegimeTracker(rate, window=config.window,
                                           hop=config.hop)
            for (kind, cid), (_x, rate) in self._loops.items()
            if kind == sig.SignalKind.MMG
        }
        self.net = osc.OscillatorNetwork(
            sample_rate=config.oscnet_rate,
            seed=derive_seed(seed, "oscnet"), feedback_init=0.2)
        self.store = demo_store or nu.DemoStore(
            config.demo_dir or f"/tmp/myoritual-demos-{seed}")
        self.model: nu.NuanceModel | None = None

        self.target = rit.RitualTarget.random(derive_seed(seed, "target"))
        self.env = rit.RitualEnv(self.target)
        self.agent = rit.CrossEntropyAgent(
            steps_per_episode=config.steps_per_episode,
            seed=derive_seed(seed, "agent"))
        self._position = self.env.start.copy()
        self._sequence = self.agent.propose()
        self._step = 0
        self._episode = 0
        self._ep_best = -np.inf
        self._ep_best_pos = self._position.copy()
        self.best_distance = self.env.distance(self._position)

        self._recording: list[feat.FeatureVector] | None = None
        self._record_label: np.ndarray | None = None
        self._demo_count = 0
        self.latest: dict[str, dict] = {}

    # -- command surface -----------------------------------------------------

    def start(self) -> dict:
        self.running = True
        return {"running": True}

    def stop(self) -> dict:
        self.running = False
        return {"running": False}

    def record_demo(self, label) -> dict:
        if self._recording is not None:
            raise CommandError("already recording a demonstration")
        arr = np.asarray(label, dtype=float)
        if arr.shape != (3,) or np.any(arr < 0) or np.any(arr > 1):
            raise CommandError("label must be 3 values in [0, 1]")
        self._recording = []
        self._record_label = arr
        return {"recording": True}

    def end_demo(self) -> dict:
        if self._recording is None:
            raise CommandError("no demonstration in progress")
        rows, label = self._recording, self._record_label
        self._recording, self._record_label = None, None
        if not rows:
            raise CommandError("demonstration captured no feature rows")
        demo_id = f"demo-{self._demo_count:03d}"
        self._demo_count += 1
        self.store.add(nu.Demonstration(id=demo_id, feature_rows=rows,
                                        label=label, created_at=time.time()))
        return {"id": demo_id, "rows": len(rows)}

    def train(self, ridge_lambda: float = 0.0) -> dict:
        if len(self.store) == 0:
            raise CommandError("no demonstrations stored")
        self.model = nu.train(self.store, ridge_lambda=float(ridge_lambda))
        rows = sum(len(self.store.get(i).feature_rows) for i in self.store.ids())
        return {"rows": rows, "lambda": self.model.ridge_lambda,
                "demos": len(self.store)}

    def set_gain(self, i, j, value) -> dict:
        try:
            self.net.set_gain(int(i), int(j), float(value))
        except (IndexError, ValueError, TypeError) as exc:
            raise CommandError(str(exc)) from exc
        return {"i": int(i), "j": int(j), "value": float(value)}

    def set_thresholds(self, t_hi=None, t_lo=None) -> dict:
        new_hi = float(t_hi) if t_hi is not None else self.t_hi
        new_lo = float(t_lo) if t_lo is not None else self.t_lo
        if not (0 < new_hi < new_lo):
            raise CommandError("thresholds must satisfy 0 < t_hi < t_lo")
        self.t_hi, self.t_lo = new_hi, new_lo
        return {"t_hi": self.t_hi, "t_lo": self.t_lo}

    def agent_pause(self) -> dict:
        self.agent_paused = True
        return {"paused": True}

    def agent_resume(self) -> dict:
        self.agent_paused = False
        return {"paused": False}

    def set_sigma(self, value) -> dict:
        try:
            self.agent.set_sigma(float(value))
        except (ValueError, TypeError) as exc:
            raise CommandError(str(exc)) from exc
        return {"sigma": self.agent.sigma}

    # -- tick ------------------------------------------------------------------

    def _chunk(self, kind: sig.SignalKind, cid: int) -> sig.SignalFrame:
        x, rate = self._loops[(kind, cid)]
        n = int(round(self.cfg.hop * rate))
        start = (self.tick_count * n) % x.size
        chunk = np.take(x, np.arange(start, start + n), mode="wrap")
        return sig.SignalFrame(cid, kind, rate, self.clock, chunk)

    def tick(self) -> list[tuple[str, dict]]:
        """Advance one feature hop; returns (stream_type, payload) updates."""
        if not self.running:
            return []
        updates: list[tuple[str, dict]] = []
        for (kind, cid) in self._loops:
            frame = self._chunk(kind, cid)
            if (kind, cid) in self.trackers:
                ests = self.trackers[(kind, cid)].push(
                    sig.SignalFrame(cid, kind, frame.sample_rate,
                                    self.tick_count * self.cfg.hop,
                                    frame.samples))
                self.pipeline.merge_regime(kind, cid, ests)
                if ests:
                    updates.append(("regime", ests[-1].to_json()))
            rows = self.pipeline.push(sig.SignalFrame(
                cid, kind, frame.sample_rate, self.tick_count * self.cfg.hop,
                frame.samples))
            for fv in rows:
                if self._recording is not None:
                    self._recording.append(fv)
                updates.append(("features", fv.to_json()))
                if self.model is not None:
                    nuance_vec = self.model.predict(nu.feature_row(fv))
                    action = nu.map_to_actions(
                        nuance_vec, derive_seed(self.cfg.seed, "live-action",
                                                self.tick_count))
                    self.net.apply(action)
        self.net.render(int(round(self.cfg.hop * self.net.sample_rate)))

        if not self.agent_paused:
            pos, reward = self.env.step(self._position,
                                        self._sequence[self._step])
            self._position = pos
            if reward > self._ep_best:
                self._ep_best = reward
                self._ep_best_pos = pos.copy()
            self.best_distance = min(self.best_distance, self.env.distance(pos))
            self._step += 1
            if self._step >= self.cfg.steps_per_episode:
                self.agent.observe(self._ep_best, self._sequence)
                updates.append(("ritual_episode", {
                    "episode": self._episode,
                    "best_reward": self._ep_best,
                    "best_distance": self.best_distance,
                    "sigma": self.agent.sigma,
                }))
                self._episode += 1
                self._step = 0
                self._ep_best = -np.inf
                self._sequence = self.agent.propose()
                self._position = self.env.start.copy()

        if self.tick_count % self.cfg.state_every == 0:
            updates.append(("oscnet_state", self.net.snapshot()))
            report = rit.proximity(self._position, self.target,
                                   self.t_hi, self.t_lo, time=self.clock)
            directive = rit.direct(report)
            updates.append(("ritual_proximity", {
                "values": [int(v) for v in report.values],
                "volume": [float(v) for v in directive.volume],
                "brightness": [float(b) for b in directive.brightness],
                "episode": self._episode,
                "step": self._step,
            }))

        self.tick_count += 1
        self.clock = self.tick_count * self.cfg.hop
        for stream, payload in updates:
            self.latest[stream] = payload
        return updates

    def snapshot(self) -> dict:
        return {
            "status": {
                "running": self.running,
                "agent_paused": self.agent_paused,
                "episode": self._episode,
                "sigma": self.agent.sigma,
                "thresholds": {"t_hi": self.t_hi, "t_lo": self.t_lo},
                "model": (None if self.model is None else
                          {"demos": len(self.model.trained_on),
                           "lambda": self.model.ridge_lambda}),
                "best_distance": self.best_distance,
            },
            "streams": dict(self.latest),
        }


@dataclass(eq=False)
class _Connection:
    ws: object
    seq: int = 0
    latest: dict = field(default_factory=dict)
    dirty: list = field(default_factory=list)
    replies: list = field(default_factory=list)
    event: asyncio.Event = field(default_factory=asyncio.Event)

    def envelope(self, msg_type: str, payload: dict, t: float) -> str:
        self.seq += 1
        return json.dumps({"v": PROTOCOL_VERSION, "seq": self.seq, "t": t,
                           "type": msg_type, "payload": payload})


class BridgeServer:
    """Websocket front of one LiveEngine."""

    def __init__(self, engine: LiveEngine, tick_interval: float = 0.025):
        self.engine = engine
        self.tick_interval = tick_interval
        self.connections: set[_Connection] = set()
        self.operator: _Connection | None = None
        self._stop = asyncio.Event()

    # -- engine loop -------------------------------------------------------

    async def _engine_loop(self):
        loop = asyncio.get_running_loop()
        while not self._stop.is_set():
            t0 = loop.time()
            for stream, payload in self.engine.tick():
                self._publish(stream, payload)
            delay = self.tick_interval - (loop.time() - t0)
            await asyncio.sleep(max(delay, 0.0))

    def _publish(self, stream: str, payload: dict) -> None:
        for conn in self.connections:
            conn.latest[stream] = payload
            if stream not in conn.dirty:
                conn.dirty.append(stream)
            conn.event.set()

    def _reply(self, conn: _Connection, msg_type: str, payload: dict) -> None:
        conn.replies.append((msg_type, payload))
        conn.event.set()

    # -- per-connection tasks ------------------------------------------------

    async def _writer(self, conn: _Connection):
        await conn.ws.send(conn.envelope("snapshot", self.engine.snapshot(),
                                         self.engine.clock))
        while True:
            await conn.event.wait()
            conn.event.clear()
            while conn.replies or conn.dirty:
                # replies drain first and are never dropped
                if conn.replies:
                    msg_type, payload = conn.replies.pop(0)
                else:
                    stream = conn.dirty.pop(0)
                    msg_type, payload = stream, conn.latest[stream]
                await conn.ws.send(conn.envelope(msg_type, payload,
                                                 self.engine.clock))

    async def _handle_message(self, conn: _Connection, raw) -> None:
        try:
            msg = json.loads(raw)
        except (json.JSONDecodeError, UnicodeDecodeError):
            self._reply(conn, "err", {"seq": None, "reason": "malformed-json"})
            return
        if not isinstance(msg, dict) or "type" not in msg:
            self._reply(conn, "err", {"seq": None, "reason": "missing-type"})
            return
        msg_type = msg["type"]
        cmd_seq = msg.get("seq")
        payload = msg.get("payload") or {}
        if msg_type not in COMMANDS:
            log.warning("ignoring unknown message type %r", msg_type)
            return
        if msg_type == "takeover":
            self.operator = conn
            self._reply(conn, "ack", {"seq": cmd_seq, "operator": True})
            return
        if self.operator is None:
            self.operator = conn  # first commander claims the lock
        if self.operator is not conn:
            self._reply(conn, "err", {"seq": cmd_seq, "reason": "not-operator"})
            return
        try:
            result = self._execute(msg_type, payload)
        except CommandError as exc:
            self._reply(conn, "err", {"seq": cmd_seq, "reason": str(exc)})
            return
        except Exception as exc:
            log.exception("command %s failed", msg_type)
            self._reply(conn, "err", {"seq": cmd_seq,
                                      "reason": f"internal: {exc}"})
            return
        self._reply(conn, "ack", {"seq": cmd_seq, **(result or {})})

    def _execute(self, msg_type: str, payload: dict) -> dict:
        eng = self.engine
        if msg_type == "start":
            return eng.start()
        if msg_type == "stop":
            return eng.stop()
        if msg_type == "record_demo":
            if "label" not in payload:
                raise CommandError("record_demo requires a label")
            return eng.record_demo(payload["label"])
        if msg_type == "end_demo":
            return eng.end_demo()
        if msg_type == "train":
            return eng.train(payload.get("lambda", 0.0))
        if msg_type == "set_gain":
            for key in ("i", "j", "value"):
                if key not in payload:
                    raise CommandError(f"set_gain requires {key}")
            return eng.set_gain(payload["i"], payload["j"], payload["value"])
        if msg_type == "set_thresholds":
            return eng.set_thresholds(payload.get("t_hi"), payload.get("t_lo"))
        if msg_type == "agent_pause":
            return eng.agent_pause()
        if msg_type == "agent_resume":
            return eng.agent_resume()
        if msg_type == "set_sigma":
            if "value" not in payload:
                raise CommandError("set_sigma requires value")
            return eng.set_sigma(payload["value"])
        raise CommandError(f"unhandled command {msg_type}")

    async def _handler(self, ws):
        conn = _Connection(ws=ws)
        self.connections.add(conn)
        writer = asyncio.create_task(self._writer(conn))
        try:
            async for raw in ws:
                await self._handle_message(conn, raw)
        except Exception:
            pass
        finally:
            writer.cancel()
            self.connections.discard(conn)
            if self.operator is conn:
                self.operator = None

    async def run(self, host: str, port: int, ready: threading.Event | None = None):
        from websockets.asyncio.server import serve as ws_serve
        async with ws_serve(self._handler, host, port) as server:
            engine_task = asyncio.create_task(self._engine_loop())
            if ready is not None:
                ready.set()
            await self._stop.wait()
            engine_task.cancel()
            server.close()

    def stop(self) -> None:
        self._stop.set()


class ServerHandle:
    """Background server for tests and embedding."""

    def __init__(self, server: BridgeServer, thread: threading.Thread,
                 loop: asyncio.AbstractEventLoop, port: int):
        self.server = server
        self.thread = thread
        self.loop = loop
        self.port = port

    def stop(self) -> None:
        self.loop.call_soon_threadsafe(self.server.stop)
        self.thread.join(timeout=5.0)


def start_server(session_cfg, host: str = "127.0.0.1", port: int = 8765,
                 tick_interval: float | None = None) -> ServerHandle:
    engine = LiveEngine(EngineConfig.from_session(session_cfg))
    raw = session_cfg.raw.get("bridge", {})
    interval = (tick_interval if tick_interval is not None
                else float(raw.get("tick_interval", 0.025)))
    server = BridgeServer(engine, tick_interval=interval)
    ready = threading.Event()
    loop = asyncio.new_event_loop()

    def _run():
        asyncio.set_event_loop(loop)
        loop.run_until_complete(server.run(host, port, ready))
        loop.close()

    thread = threading.Thread(target=_run, daemon=True)
    thread.start()
    if not ready.wait(timeout=10.0):
        raise RuntimeError("bridge server failed to start")
    return ServerHandle(server, thread, loop, port)


def serve_forever(session_cfg, host: str = "127.0.0.1", port: int = 8765) -> None:
    """Blocking entry point used by the CLI."""
    engine = LiveEngine(EngineConfig.from_session(session_cfg))
    raw = session_cfg.raw.get("bridge", {})
    server = BridgeServer(engine,
                          tick_interval=float(raw.get("tick_interval", 0.025)))
    log.info("bridge listening on ws://%s:%d", host, port)
    asyncio.run(server.run(host, port))
