import assert from 'node:assert/strict';
import { test } from 'node:test';

import { PROTOCOL_VERSION } from '../src/protocol.js';
import { ConsoleSession } from '../src/session.js';

function makeClock(start = 0) {
  let t = start;
  return {
    now: () => t,
    advance: (ms: number) => { t += ms; },
  };
}

function envelope(seq: number, type: string, payload: unknown, t = 0): string {
  return JSON.stringify({ v: PROTOCOL_VERSION, seq, t, type, payload });
}

function featuresPayload(time: number, env = 0.5) {
  return {
    time,
    channels: [{ channel_id: 0, kind: 'EMG', envelope: env, change_rate: 0,
                 spectral_centroid: null, damping_ratio: null }],
    effort: env, abruptness: 0, relaxation_rate: 0, complexity: 1,
  };
}

test('snapshot seeds latest streams with the snapshot seq', () => {
  const session = new ConsoleSession({ now: () => 0 });
  session.ingest(envelope(1, 'snapshot', {
    status: { running: false, agent_paused: false, episode: 0, sigma: 0.7,
              thresholds: { t_hi: 0.5, t_lo: 2.0 }, model: null,
              best_distance: 9.0 },
    streams: { features: featuresPayload(0.2) },
  }));
  const latest = session.latest.get('features');
  assert.ok(latest);
  assert.equal(latest.seq, 1);
  assert.equal((latest.value as { effort: number }).effort, 0.5);
});

test('stream envelopes update latest and the ring', () => {
  const session = new ConsoleSession({ now: () => 0 });
  session.ingest(envelope(5, 'features', featuresPayload(0.1), 0.1));
  session.ingest(envelope(6, 'features', featuresPayload(0.125, 0.7), 0.125));
  assert.equal(session.ring.length, 2);
  assert.equal(session.latest.get('features')!.seq, 6);
  assert.equal(session.lastServerSeq, 6);
});

test('ring evicts frames older than 60 s of stream time', () => {
  const session = new ConsoleSession({ now: () => 0 });
  session.ingest(envelope(1, 'features', featuresPayload(0.0), 0.0));
  session.ingest(envelope(2, 'features', featuresPayload(30.0), 30.0));
  session.ingest(envelope(3, 'features', featuresPayload(61.0), 61.0));
  assert.equal(session.ring.length, 2);
  assert.equal(session.ring[0].t, 30.0);
});

test('staleness trips after one second without frames', () => {
  const clock = makeClock();
  const session = new ConsoleSession({ now: clock.now });
  assert.equal(session.isStale(), true); // nothing yet
  session.ingest(envelope(1, 'features', featuresPayload(0.0), 0));
  assert.equal(session.isStale(), false);
  clock.advance(999);
  assert.equal(session.isStale(), false);
  clock.advance(2);
  assert.equal(session.isStale(), true);
});

test('commands resolve with latency; duplicate acks ignored', () => {
  const clock = makeClock();
  const sent: string[] = [];
  const session = new ConsoleSession({ now: clock.now, sender: (raw) => sent.push(raw) });
  const seq = session.send('start');
  assert.equal(sent.length, 1);
  assert.equal(session.pending.size, 1);
  clock.advance(40);
  session.ingest(envelope(9, 'ack', { seq, running: true }));
  assert.equal(session.pending.size, 0);
  assert.equal(session.results.length, 1);
  assert.equal(session.results[0].latencyMs, 40);
  assert.equal(session.results[0].ok, true);
  // duplicate ack for the same seq changes nothing
  session.ingest(envelope(10, 'ack', { seq, running: true }));
  assert.equal(session.results.length, 1);
});

test('err resolves a pending command as failure', () => {
  const session = new ConsoleSession({ now: () => 0, sender: () => undefined });
  const seq = session.send('set_gain', { i: 0, j: 1, value: 9 });
  session.ingest(envelope(2, 'err', { seq, reason: 'gain must be in [0, 0.8]' }));
  assert.equal(session.results[0].ok, false);
  assert.equal(session.results[0].payload.reason, 'gain must be in [0, 0.8]');
});

test('resend repeats the same seq only while unacknowledged', () => {
  const sent: string[] = [];
  const session = new ConsoleSession({ now: () => 0, sender: (raw) => sent.push(raw) });
  const seq = session.send('agent_pause');
  assert.equal(session.resend(seq), true);
  assert.equal(sent.length, 2);
  assert.deepEqual(JSON.parse(sent[0]), JSON.parse(sent[1]));
  session.ingest(envelope(3, 'ack', { seq, paused: true }));
  assert.equal(session.resend(seq), false); // acked: retry is a no-op
  assert.equal(sent.length, 2);
  assert.equal(session.results.length, 1);
});

test('malformed json and unknown types are counted, never thrown', () => {
  const session = new ConsoleSession({ now: () => 0 });
  session.ingest('{broken');
  session.ingest(JSON.stringify({ v: 99, seq: 1, t: 0, type: 'features', payload: {} }));
  session.ingest(envelope(2, 'mystery_type', { x: 1 }));
  assert.equal(session.malformedCount, 2);
  assert.equal(session.unknownTypeCount, 1);
});

test('demoInProgress follows acknowledged record/end commands', () => {
  const session = new ConsoleSession({ now: () => 0, sender: () => undefined });
  assert.equal(session.demoInProgress, false);
  const recSeq = session.send('record_demo', { label: [0.5, 0, 0] });
  assert.equal(session.demoInProgress, false); // not yet acknowledged
  session.ingest(envelope(4, 'ack', { seq: recSeq, recording: true }));
  assert.equal(session.demoInProgress, true);
  const endSeq = session.send('end_demo');
  session.ingest(envelope(5, 'ack', { seq: endSeq, id: 'demo-000', rows: 12 }));
  assert.equal(session.demoInProgress, false);
});
