/**
 * Protocol simulator: replay recorded sessions into a ConsoleSession and a
 * scripted engine that answers commands the way the live service does, so
 * the whole console is testable with no engine process.
 */

import { PROTOCOL_VERSION } from './protocol.js';
import { ConsoleSession } from './session.js';

export function replay(session: ConsoleSession, lines: string[]): void {
  for (const line of lines) {
    const trimmed = line.trim();
    if (trimmed.length > 0) session.ingest(trimmed);
  }
}

interface Command {
  v: number;
  seq: number;
  type: string;
  payload: Record<string, unknown>;
}

/**
 * Minimal command-surface double of the live engine. Wire a session's
 * sender to `receive`; replies (and any stream frames the script pushes)
 * arrive through session.ingest with server-side seq numbering.
 */
export class ScriptedEngine {
  running = false;
  paused = false;
  recording = false;
  demoRows = 0;
  demos: Array<{ id: string; rows: number }> = [];
  gains: number[][];
  gMax = 0.8;
  sigma = 0.7;
  thresholds = { t_hi: 0.5, t_lo: 2.0 };
  model: { rows: number; lambda: number; demos: number } | null = null;
  clock = 0;

  private serverSeq = 0;
  private readonly session: ConsoleSession;

  constructor(session: ConsoleSession) {
    this.session = session;
    this.gains = Array.from({ length: 20 }, () => Array(20).fill(0.2));
    session.attachSender((raw) => this.receive(raw));
  }

  private emit(type: string, payload: Record<string, unknown>): void {
    this.serverSeq += 1;
    this.session.ingest(JSON.stringify({
      v: PROTOCOL_VERSION, seq: this.serverSeq, t: this.clock, type, payload,
    }));
  }

  sendSnapshot(): void {
    this.emit('snapshot', {
      status: {
        running: this.running,
        agent_paused: this.paused,
        episode: 0,
        sigma: this.sigma,
        thresholds: this.thresholds,
        model: this.model,
        best_distance: 9.5,
      },
      streams: {},
    });
  }

  /** Push one synthetic feature frame (the engine-side tick stand-in). */
  tickFeatures(env = 0.4): void {
    this.clock += 0.025;
    if (this.recording) this.demoRows += 1;
    this.emit('features', {
      time: this.clock,
      channels: [
        { channel_id: 0, kind: 'EMG', envelope: env, change_rate: 0.0, spectral_centroid: 9.5, damping_ratio: null },
      ],
      effort: env, abruptness: 0, relaxation_rate: 0, complexity: env > 0.1 ? 1 : 0,
    });
  }

  receive(raw: string): void {
    let cmd: Command;
    try {
      cmd = JSON.parse(raw) as Command;
    } catch {
      this.emit('err', { seq: null, reason: 'malformed-json' });
      return;
    }
    const ack = (extra: Record<string, unknown> = {}) =>
      this.emit('ack', { seq: cmd.seq, ...extra });
    const err = (reason: string) => this.emit('err', { seq: cmd.seq, reason });

    switch (cmd.type) {
      case 'start':
        this.running = true; ack({ running: true }); break;
      case 'stop':
        this.running = false; ack({ running: false }); break;
      case 'record_demo': {
        if (this.recording) { err('already recording a demonstration'); break; }
        const label = cmd.payload.label as number[] | undefined;
        if (!label || label.length !== 3 || label.some((x) => x < 0 || x > 1)) {
          err('label must be 3 values in [0, 1]');
          break;
        }
        this.recording = true;
        this.demoRows = 0;
        ack({ recording: true });
        break;
      }
      case 'end_demo': {
        if (!this.recording) { err('no demonstration in progress'); break; }
        if (this.demoRows === 0) { err('demonstration captured no feature rows'); break; }
        this.recording = false;
        const id = `demo-${String(this.demos.length).padStart(3, '0')}`;
        this.demos.push({ id, rows: this.demoRows });
        ack({ id, rows: this.demoRows });
        break;
      }
      case 'train': {
        if (this.demos.length === 0) { err('no demonstrations stored'); break; }
        const lambda = (cmd.payload.lambda as number | undefined) ?? 0;
        const rows = this.demos.reduce((acc, d) => acc + d.rows, 0);
        this.model = { rows, lambda, demos: this.demos.length };
        ack({ rows, lambda, demos: this.demos.length });
        break;
      }
      case 'set_gain': {
        const { i, j, value } = cmd.payload as { i: number; j: number; value: number };
        if (i < 0 || i >= 20 || j < 0 || j >= 20) { err('gain index out of range'); break; }
        if (value < 0 || value > this.gMax) { err(`gain must be in [0, ${this.gMax}]`); break; }
        this.gains[i][j] = value;
        ack({ i, j, value });
        break;
      }
      case 'set_thresholds': {
        const hi = (cmd.payload.t_hi as number | undefined) ?? this.thresholds.t_hi;
        const lo = (cmd.payload.t_lo as number | undefined) ?? this.thresholds.t_lo;
        if (!(0 < hi && hi < lo)) { err('thresholds must satisfy 0 < t_hi < t_lo'); break; }
        this.thresholds = { t_hi: hi, t_lo: lo };
        ack(this.thresholds);
        break;
      }
      case 'agent_pause':
        this.paused = true; ack({ paused: true }); break;
      case 'agent_resume':
        this.paused = false; ack({ paused: false }); break;
      case 'set_sigma': {
        const value = cmd.payload.value as number;
        if (!(value >= 0)) { err('sigma must be >= 0'); break; }
        this.sigma = value;
        ack({ sigma: value });
        break;
      }
      case 'takeover':
        ack({ operator: true }); break;
      default:
        // unknown command types are ignored, like the live service
        break;
    }
  }
}
