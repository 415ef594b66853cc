/**
 * Wire protocol v1: envelope shapes shared by every view of the console.
 * The console is a pure client; everything it renders must originate from
 * one of these envelopes.
 */

export const PROTOCOL_VERSION = 1;

export type StreamType =
  | 'features'
  | 'regime'
  | 'oscnet_state'
  | 'ritual_proximity'
  | 'ritual_episode';

export const STREAM_TYPES: readonly StreamType[] = [
  'features', 'regime', 'oscnet_state', 'ritual_proximity', 'ritual_episode',
];

export type CommandType =
  | 'start' | 'stop'
  | 'record_demo' | 'end_demo' | 'train'
  | 'set_gain' | 'set_thresholds'
  | 'agent_pause' | 'agent_resume' | 'set_sigma'
  | 'takeover';

export interface Envelope<P = Record<string, unknown>> {
  v: number;
  seq: number;
  t: number;
  type: string;
  payload: P;
}

export interface ChannelFeatures {
  channel_id: number;
  kind: 'EMG' | 'MMG';
  envelope: number;
  change_rate: number;
  spectral_centroid: number | null;
  damping_ratio: number | null;
}

export interface FeaturesPayload {
  time: number;
  channels: ChannelFeatures[];
  effort: number;
  abruptness: number;
  relaxation_rate: number;
  complexity: number;
}

export interface RegimePayload {
  time: number;
  zeta: number;
  omega: number;
  excitation: number;
  residual_rms: number;
  valid: boolean;
  reason: string | null;
}

export interface OscnetPayload {
  oscillators: Array<{ index: number; freq: number; amp: number; active: boolean }>;
  feedback_gain: number[][];
  master_gain: number;
  g_max?: number;
  n_channels: number;
}

export interface ProximityPayload {
  values: number[];
  volume: number[];
  brightness: number[];
  episode: number;
  step: number;
}

export interface EpisodePayload {
  episode: number;
  best_reward: number;
  best_distance: number;
  sigma: number;
}

export interface SnapshotPayload {
  status: {
    running: boolean;
    agent_paused: boolean;
    episode: number;
    sigma: number;
    thresholds: { t_hi: number; t_lo: number };
    model: { demos: number; lambda: number } | null;
    best_distance: number;
  };
  streams: Partial<Record<StreamType, Record<string, unknown>>>;
}

export interface AckPayload {
  seq: number | null;
  [extra: string]: unknown;
}

export function parseEnvelope(raw: string): Envelope | null {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof obj !== 'object' || obj === null) return null;
  const env = obj as Envelope;
  if (env.v !== PROTOCOL_VERSION) return null;
  if (typeof env.type !== 'string' || typeof env.seq !== 'number') return null;
  return env;
}

export function isStreamType(t: string): t is StreamType {
  return (STREAM_TYPES as readonly string[]).includes(t);
}
