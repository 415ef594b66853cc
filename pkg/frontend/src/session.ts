/**
 * Transport-agnostic console session state.
 *
 * Ingests raw envelope strings and keeps: the latest snapshot per stream
 * type (each remembering the seq it arrived under, so every rendered value
 * is traceable to an envelope), a 60 s ring of feature/regime frames for
 * the scope traces, pending commands keyed by their client seq, resolved
 * ack/err results with round-trip latency, and a staleness clock. Malformed
 * or unknown input never throws; it is counted and ignored.
 */

import {
  AckPayload, CommandType, Envelope, EpisodePayload, SnapshotPayload,
  isStreamType, parseEnvelope, PROTOCOL_VERSION, StreamType,
} from './protocol.js';

export interface Traced<T> {
  value: T;
  seq: number;
}

export interface PendingCommand {
  seq: number;
  type: CommandType;
  payload: Record<string, unknown>;
  sentAtMs: number;
  retries: number;
}

export interface CommandResult {
  seq: number;
  type: CommandType;
  ok: boolean;
  latencyMs: number;
  payload: AckPayload;
  envelopeSeq: number;
}

export interface SessionOptions {
  now?: () => number;
  sender?: (raw: string) => void;
  stalenessMs?: number;
  ringMs?: number;
}

export interface RingFrame {
  seq: number;
  t: number;
  type: 'features' | 'regime';
  payload: Record<string, unknown>;
}

const DEFAULT_STALENESS_MS = 1000;
const DEFAULT_RING_MS = 60_000;

export class ConsoleSession {
  connected = false;
  snapshot: Traced<SnapshotPayload> | null = null;
  latest = new Map<StreamType, Traced<Record<string, unknown>>>();
  ring: RingFrame[] = [];
  episodes: Array<Traced<EpisodePayload>> = [];
  pending = new Map<number, PendingCommand>();
  results: CommandResult[] = [];
  malformedCount = 0;
  unknownTypeCount = 0;
  lastFrameAtMs: number | null = null;
  lastServerSeq = 0;

  private nextSeq = 1;
  private readonly now: () => number;
  private sender: (raw: string) => void;
  private readonly stalenessMs: number;
  private readonly ringMs: number;

  constructor(options: SessionOptions = {}) {
    this.now = options.now ?? (() => Date.now());
    this.sender = options.sender ?? (() => undefined);
    this.stalenessMs = options.stalenessMs ?? DEFAULT_STALENESS_MS;
    this.ringMs = options.ringMs ?? DEFAULT_RING_MS;
  }

  attachSender(sender: (raw: string) => void): void {
    this.sender = sender;
  }

  markConnected(connected: boolean): void {
    this.connected = connected;
  }

  get demoInProgress(): boolean {
    // recording state follows acknowledged record_demo / end_demo commands
    let recording = false;
    for (const r of this.results) {
      if (!r.ok) continue;
      if (r.type === 'record_demo') recording = true;
      if (r.type === 'end_demo') recording = false;
    }
    return recording;
  }

  get modelSummary(): Traced<{ rows: number; lambda: number; demos: number }> | null {
    for (let i = this.results.length - 1; i >= 0; i--) {
      const r = this.results[i];
      if (r.type === 'train' && r.ok) {
        return {
          value: {
            rows: r.payload.rows as number,
            lambda: r.payload.lambda as number,
            demos: r.payload.demos as number,
          },
          seq: r.envelopeSeq,
        };
      }
    }
    const snap = this.snapshot;
    if (snap && snap.value.status.model) {
      return {
        value: { rows: NaN, ...snap.value.status.model },
        seq: snap.seq,
      };
    }
    return null;
  }

  isStale(): boolean {
    if (this.lastFrameAtMs === null) return true;
    return this.now() - this.lastFrameAtMs > this.stalenessMs;
  }

  latencyStats(): { lastMs: number | null; meanMs: number | null } {
    if (this.results.length === 0) return { lastMs: null, meanMs: null };
    const total = this.results.reduce((acc, r) => acc + r.latencyMs, 0);
    return {
      lastMs: this.results[this.results.length - 1].latencyMs,
      meanMs: total / this.results.length,
    };
  }

  // -- inbound ---------------------------------------------------------------

  ingest(raw: string): void {
    const env = parseEnvelope(raw);
    if (env === null) {
      this.malformedCount += 1;
      return;
    }
    this.lastServerSeq = env.seq;
    if (env.type === 'snapshot') {
      const payload = env.payload as unknown as SnapshotPayload;
      this.snapshot = { value: payload, seq: env.seq };
      for (const [stream, value] of Object.entries(payload.streams ?? {})) {
        if (isStreamType(stream) && value) {
          this.latest.set(stream, { value: value as Record<string, unknown>, seq: env.seq });
        }
      }
      this.lastFrameAtMs = this.now();
      return;
    }
    if (isStreamType(env.type)) {
      this.latest.set(env.type, { value: env.payload, seq: env.seq });
      this.lastFrameAtMs = this.now();
      if (env.type === 'features' || env.type === 'regime') {
        this.ring.push({ seq: env.seq, t: env.t, type: env.type, payload: env.payload });
        this.pruneRing(env.t);
      }
      if (env.type === 'ritual_episode') {
        this.episodes.push({
          value: env.payload as unknown as EpisodePayload,
          seq: env.seq,
        });
      }
      return;
    }
    if (env.type === 'ack' || env.type === 'err') {
      this.resolve(env as Envelope<AckPayload>);
      return;
    }
    this.unknownTypeCount += 1;
  }

  private pruneRing(latestT: number): void {
    const horizon = latestT - this.ringMs / 1000;
    while (this.ring.length > 0 && this.ring[0].t < horizon) {
      this.ring.shift();
    }
  }

  private resolve(env: Envelope<AckPayload>): void {
    const cmdSeq = env.payload.seq;
    if (cmdSeq === null || cmdSeq === undefined) return;
    const pending = this.pending.get(cmdSeq);
    if (!pending) return; // duplicate ack or foreign seq: ignore
    this.pending.delete(cmdSeq);
    this.results.push({
      seq: cmdSeq,
      type: pending.type,
      ok: env.type === 'ack',
      latencyMs: this.now() - pending.sentAtMs,
      payload: env.payload,
      envelopeSeq: env.seq,
    });
  }

  // -- outbound ----------------------------------------------------------------

  send(type: CommandType, payload: Record<string, unknown> = {}): number {
    const seq = this.nextSeq++;
    const cmd: PendingCommand = {
      seq, type, payload, sentAtMs: this.now(), retries: 0,
    };
    this.pending.set(seq, cmd);
    this.sender(JSON.stringify({ v: PROTOCOL_VERSION, seq, type, payload }));
    return seq;
  }

  /** Retry an unacknowledged command with the same seq (idempotent). */
  resend(seq: number): boolean {
    const cmd = this.pending.get(seq);
    if (!cmd) return false; // already resolved: nothing to do
    cmd.retries += 1;
    this.sender(JSON.stringify({
      v: PROTOCOL_VERSION, seq: cmd.seq, type: cmd.type, payload: cmd.payload,
    }));
    return true;
  }
}
