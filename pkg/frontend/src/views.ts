/**
 * View models for the five console screens. Pure functions of the session;
 * every numeric they expose is a Traced value carrying the seq of the
 * envelope it came from, so the renderer cannot fabricate state.
 */

import {
  ChannelFeatures, FeaturesPayload, OscnetPayload, ProximityPayload,
  RegimePayload,
} from './protocol.js';
import { ConsoleSession, Traced } from './session.js';

export interface TracePoint {
  t: number;
  value: number;
  seq: number;
}

export interface ScopeView {
  stale: boolean;
  envelopeTraces: Map<string, TracePoint[]>;
  changeRateTraces: Map<string, TracePoint[]>;
  dampingTrace: TracePoint[];
  centroidTraces: Map<string, TracePoint[]>;
  aggregates: {
    effort: Traced<number>;
    abruptness: Traced<number>;
    relaxation_rate: Traced<number>;
    complexity: Traced<number>;
  } | null;
}

function channelKey(ch: ChannelFeatures): string {
  return `${ch.kind}:${ch.channel_id}`;
}

export function scopeView(session: ConsoleSession): ScopeView {
  const envelopeTraces = new Map<string, TracePoint[]>();
  const changeRateTraces = new Map<string, TracePoint[]>();
  const centroidTraces = new Map<string, TracePoint[]>();
  const dampingTrace: TracePoint[] = [];
  for (const frame of session.ring) {
    if (frame.type === 'features') {
      const payload = frame.payload as unknown as FeaturesPayload;
      for (const ch of payload.channels) {
        const key = channelKey(ch);
        if (!envelopeTraces.has(key)) {
          envelopeTraces.set(key, []);
          changeRateTraces.set(key, []);
          centroidTraces.set(key, []);
        }
        envelopeTraces.get(key)!.push({ t: payload.time, value: ch.envelope, seq: frame.seq });
        changeRateTraces.get(key)!.push({ t: payload.time, value: ch.change_rate, seq: frame.seq });
        if (ch.spectral_centroid !== null) {
          centroidTraces.get(key)!.push({ t: payload.time, value: ch.spectral_centroid, seq: frame.seq });
        }
      }
    } else {
      const payload = frame.payload as unknown as RegimePayload;
      if (payload.valid) {
        dampingTrace.push({ t: payload.time, value: payload.zeta, seq: frame.seq });
      }
    }
  }
  const latestFeatures = session.latest.get('features');
  const aggregates = latestFeatures
    ? {
        effort: { value: (latestFeatures.value as unknown as FeaturesPayload).effort, seq: latestFeatures.seq },
        abruptness: { value: (latestFeatures.value as unknown as FeaturesPayload).abruptness, seq: latestFeatures.seq },
        relaxation_rate: { value: (latestFeatures.value as unknown as FeaturesPayload).relaxation_rate, seq: latestFeatures.seq },
        complexity: { value: (latestFeatures.value as unknown as FeaturesPayload).complexity, seq: latestFeatures.seq },
      }
    : null;
  return {
    stale: session.isStale(),
    envelopeTraces,
    changeRateTraces,
    centroidTraces,
    dampingTrace,
    aggregates,
  };
}

export interface CalibrateView {
  recording: boolean;
  model: Traced<{ rows: number; lambda: number; demos: number }> | null;
  demos: Array<{ id: string; rows: number; seq: number }>;
  lastError: { reason: string; seq: number } | null;
}

export function calibrateView(session: ConsoleSession): CalibrateView {
  const demos: Array<{ id: string; rows: number; seq: number }> = [];
  let lastError: CalibrateView['lastError'] = null;
  for (const r of session.results) {
    if (r.type === 'end_demo' && r.ok) {
      demos.push({
        id: r.payload.id as string,
        rows: r.payload.rows as number,
        seq: r.envelopeSeq,
      });
    }
    if (!r.ok) {
      lastError = { reason: String(r.payload.reason ?? 'unknown'), seq: r.envelopeSeq };
    }
  }
  return {
    recording: session.demoInProgress,
    model: session.modelSummary,
    demos,
    lastError,
  };
}

export interface NetworkView {
  oscillators: Array<{
    index: number;
    freq: Traced<number>;
    amp: Traced<number>;
    active: boolean;
  }>;
  gains: Array<Array<Traced<number>>>;
  gMax: number;
  masterGain: Traced<number> | null;
}

const DEFAULT_G_MAX = 0.8;

export function networkView(session: ConsoleSession): NetworkView {
  const latest = session.latest.get('oscnet_state');
  if (!latest) {
    return { oscillators: [], gains: [], gMax: DEFAULT_G_MAX, masterGain: null };
  }
  const payload = latest.value as unknown as OscnetPayload;
  const seq = latest.seq;
  return {
    oscillators: payload.oscillators.map((o) => ({
      index: o.index,
      freq: { value: o.freq, seq },
      amp: { value: o.amp, seq },
      active: o.active,
    })),
    gains: payload.feedback_gain.map((row) => row.map((g) => ({ value: g, seq }))),
    gMax: payload.g_max ?? DEFAULT_G_MAX,
    masterGain: { value: payload.master_gain, seq },
  };
}

export interface GainEditResult {
  ok: boolean;
  error?: string;
  seq?: number;
}

/** Inline validation: out-of-range edits never reach the wire. */
export function editGain(session: ConsoleSession, i: number, j: number,
                         value: number): GainEditResult {
  const view = networkView(session);
  if (!Number.isInteger(i) || !Number.isInteger(j)
      || i < 0 || i >= 20 || j < 0 || j >= 20) {
    return { ok: false, error: 'indices must be integers in 0..19' };
  }
  if (!Number.isFinite(value) || value < 0 || value > view.gMax) {
    return { ok: false, error: `gain must be in [0, ${view.gMax}]` };
  }
  const seq = session.send('set_gain', { i, j, value });
  return { ok: true, seq };
}

export interface RitualView {
  proximity: Array<{ index: number; value: Traced<number>; lit: [boolean, boolean, boolean] }>;
  volumes: Array<Traced<number>>;
  brightness: Array<Traced<number>>;
  rewardCurve: Array<{ episode: number; bestReward: Traced<number> }>;
  sigma: Traced<number> | null;
  paused: boolean | null;
  episode: Traced<number> | null;
}

export function ritualView(session: ConsoleSession): RitualView {
  const latest = session.latest.get('ritual_proximity');
  const proximity: RitualView['proximity'] = [];
  const volumes: Array<Traced<number>> = [];
  const brightness: Array<Traced<number>> = [];
  let episode: Traced<number> | null = null;
  if (latest) {
    const payload = latest.value as unknown as ProximityPayload;
    payload.values.forEach((v, idx) => {
      proximity.push({
        index: idx,
        value: { value: v, seq: latest.seq },
        lit: [v === 1, v === 2, v === 3],
      });
      volumes.push({ value: payload.volume[idx], seq: latest.seq });
      brightness.push({ value: payload.brightness[idx], seq: latest.seq });
    });
    episode = { value: payload.episode, seq: latest.seq };
  }
  const rewardCurve = session.episodes.map((e) => ({
    episode: e.value.episode,
    bestReward: { value: e.value.best_reward, seq: e.seq },
  }));
  let sigma: Traced<number> | null = null;
  let paused: boolean | null = null;
  const lastEpisode = session.episodes[session.episodes.length - 1];
  if (lastEpisode) {
    sigma = { value: lastEpisode.value.sigma, seq: lastEpisode.seq };
  } else if (session.snapshot) {
    sigma = { value: session.snapshot.value.status.sigma, seq: session.snapshot.seq };
  }
  for (let i = session.results.length - 1; i >= 0; i--) {
    const r = session.results[i];
    if (!r.ok) continue;
    if (r.type === 'agent_pause') { paused = true; break; }
    if (r.type === 'agent_resume') { paused = false; break; }
  }
  if (paused === null && session.snapshot) {
    paused = session.snapshot.value.status.agent_paused;
  }
  return { proximity, volumes, brightness, rewardCurve, sigma, paused, episode };
}

export interface TransportView {
  connected: boolean;
  stale: boolean;
  running: Traced<boolean> | null;
  bestDistance: Traced<number> | null;
  thresholds: Traced<{ t_hi: number; t_lo: number }> | null;
  latency: { lastMs: number | null; meanMs: number | null };
  pendingCount: number;
  serverSeq: number;
}

export function transportView(session: ConsoleSession): TransportView {
  let running: Traced<boolean> | null = null;
  for (let i = session.results.length - 1; i >= 0; i--) {
    const r = session.results[i];
    if (!r.ok) continue;
    if (r.type === 'start') { running = { value: true, seq: r.envelopeSeq }; break; }
    if (r.type === 'stop') { running = { value: false, seq: r.envelopeSeq }; break; }
  }
  if (running === null && session.snapshot) {
    running = {
      value: session.snapshot.value.status.running,
      seq: session.snapshot.seq,
    };
  }
  return {
    connected: session.connected,
    stale: session.isStale(),
    running,
    bestDistance: session.snapshot
      ? { value: session.snapshot.value.status.best_distance, seq: session.snapshot.seq }
      : null,
    thresholds: session.snapshot
      ? { value: session.snapshot.value.status.thresholds, seq: session.snapshot.seq }
      : null,
    latency: session.latencyStats(),
    pendingCount: session.pending.size,
    serverSeq: session.lastServerSeq,
  };
}
