/**
 * Minimal DOM renderers for the five screens. All state comes from the
 * view models in views.ts; this layer only formats it.
 */

import { ConsoleSession } from './session.js';
import {
  calibrateView, editGain, networkView, ritualView, scopeView, TracePoint,
  transportView,
} from './views.js';

export type ScreenName = 'scope' | 'calibrate' | 'network' | 'ritual' | 'transport';

export const SCREENS: readonly ScreenName[] = [
  'scope', 'calibrate', 'network', 'ritual', 'transport',
];

function el(tag: string, cls?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

function sparkline(points: TracePoint[], width = 56): string {
  if (points.length === 0) return '';
  const glyphs = '▁▂▃▄▅▆▇█';
  const tail = points.slice(-width);
  const values = tail.map((p) => p.value);
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  return tail
    .map((p) => glyphs[Math.min(7, Math.floor(((p.value - lo) / span) * 8))])
    .join('');
}

function stalenessBadge(stale: boolean): HTMLElement {
  return el('span', stale ? 'badge stale' : 'badge live',
            stale ? 'STALE' : 'LIVE');
}

export function renderScope(session: ConsoleSession, root: HTMLElement): void {
  const view = scopeView(session);
  root.replaceChildren();
  const head = el('div', 'row');
  head.append(el('h2', undefined, 'Scope'), stalenessBadge(view.stale));
  root.append(head);
  for (const [key, points] of view.envelopeTraces) {
    const row = el('div', 'trace');
    row.append(el('span', 'label', `${key} env`),
               el('code', undefined, sparkline(points)));
    root.append(row);
  }
  if (view.dampingTrace.length > 0) {
    const row = el('div', 'trace');
    row.append(el('span', 'label', 'damping'),
               el('code', undefined, sparkline(view.dampingTrace)));
    root.append(row);
  }
  if (view.aggregates) {
    const agg = view.aggregates;
    root.append(el('div', 'agg',
      `effort ${agg.effort.value.toFixed(2)}  `
      + `abrupt ${agg.abruptness.value.toFixed(2)}  `
      + `relax ${agg.relaxation_rate.value.toFixed(2)}  `
      + `complexity ${agg.complexity.value}  (seq ${agg.effort.seq})`));
  }
}

export function renderCalibrate(session: ConsoleSession, root: HTMLElement): void {
  const view = calibrateView(session);
  root.replaceChildren();
  root.append(el('h2', undefined, 'Calibrate'));
  const controls = el('div', 'row');
  const labelInput = el('input') as HTMLInputElement;
  labelInput.placeholder = 'tension,abrupt,relax e.g. 0.8,0.2,0.1';
  const recBtn = el('button', undefined,
                    view.recording ? 'recording…' : 'record demo') as HTMLButtonElement;
  recBtn.disabled = view.recording;
  recBtn.onclick = () => {
    const label = labelInput.value.split(',').map(Number);
    session.send('record_demo', { label });
  };
  const endBtn = el('button', undefined, 'end demo') as HTMLButtonElement;
  endBtn.disabled = !view.recording;
  endBtn.onclick = () => session.send('end_demo');
  const trainBtn = el('button', undefined, 'train') as HTMLButtonElement;
  trainBtn.onclick = () => session.send('train', { lambda: 0.001 });
  controls.append(labelInput, recBtn, endBtn, trainBtn);
  root.append(controls);

  const list = el('ul');
  for (const demo of view.demos) {
    list.append(el('li', undefined, `${demo.id}: ${demo.rows} rows (seq ${demo.seq})`));
  }
  root.append(list);
  if (view.model) {
    root.append(el('div', 'model',
      `model: ${view.model.value.demos} demos, ${view.model.value.rows} rows, `
      + `lambda ${view.model.value.lambda} (seq ${view.model.seq})`));
  }
  if (view.lastError) {
    root.append(el('div', 'error', `error: ${view.lastError.reason}`));
  }
}

export function renderNetwork(session: ConsoleSession, root: HTMLElement): void {
  const view = networkView(session);
  root.replaceChildren();
  root.append(el('h2', undefined, 'Network'));
  const grid = el('div', 'oscgrid');
  for (const osc of view.oscillators) {
    const cell = el('div', osc.active ? 'osc active' : 'osc');
    cell.textContent = `${osc.index}\n${osc.freq.value.toFixed(1)} Hz\n`
      + `amp ${osc.amp.value.toFixed(2)}`;
    grid.append(cell);
  }
  root.append(grid);

  const editor = el('div', 'row');
  const iIn = el('input') as HTMLInputElement;
  const jIn = el('input') as HTMLInputElement;
  const vIn = el('input') as HTMLInputElement;
  iIn.placeholder = 'i';
  jIn.placeholder = 'j';
  vIn.placeholder = `gain 0..${view.gMax}`;
  const msg = el('span', 'editmsg');
  const apply = el('button', undefined, 'set gain') as HTMLButtonElement;
  apply.onclick = () => {
    const result = editGain(session, Number(iIn.value), Number(jIn.value),
                            Number(vIn.value));
    msg.textContent = result.ok ? `sent (seq ${result.seq})` : result.error!;
    msg.className = result.ok ? 'editmsg ok' : 'editmsg error';
  };
  editor.append(iIn, jIn, vIn, apply, msg);
  root.append(editor);

  if (view.gains.length > 0) {
    const matrix = el('table', 'gains');
    for (const row of view.gains) {
      const tr = el('tr');
      for (const g of row) {
        const td = el('td');
        td.textContent = g.value.toFixed(2);
        td.style.opacity = String(0.25 + 0.75 * (g.value / (view.gMax || 1)));
        tr.append(td);
      }
      matrix.append(tr);
    }
    root.append(matrix);
  }
}

export function renderRitual(session: ConsoleSession, root: HTMLElement): void {
  const view = ritualView(session);
  root.replaceChildren();
  root.append(el('h2', undefined, 'Ritual'));
  const grid = el('table', 'proximity');
  const header = el('tr');
  header.append(el('th', undefined, '#'), el('th', undefined, 'far'),
                el('th', undefined, 'mid'), el('th', undefined, 'near'),
                el('th', undefined, 'vol'), el('th', undefined, 'lum'));
  grid.append(header);
  view.proximity.forEach((p, idx) => {
    const tr = el('tr');
    tr.append(el('td', undefined, String(p.index)));
    p.lit.forEach((on) => tr.append(el('td', on ? 'cell lit' : 'cell')));
    const vol = view.volumes[idx];
    const lum = view.brightness[idx];
    tr.append(el('td', 'meter', vol.value.toFixed(2)),
              el('td', 'meter', lum.value.toFixed(2)));
    grid.append(tr);
  });
  root.append(grid);

  const curve = el('div', 'trace');
  curve.append(el('span', 'label', 'best reward'),
               el('code', undefined, sparkline(view.rewardCurve.map((p) => ({
                 t: p.episode, value: p.bestReward.value, seq: p.bestReward.seq,
               })))));
  root.append(curve);

  const transport = el('div', 'row');
  const pauseBtn = el('button', undefined,
                      view.paused ? 'resume agent' : 'pause agent') as HTMLButtonElement;
  pauseBtn.onclick = () =>
    session.send(view.paused ? 'agent_resume' : 'agent_pause');
  const sigmaIn = el('input') as HTMLInputElement;
  sigmaIn.type = 'range';
  sigmaIn.min = '0';
  sigmaIn.max = '1.5';
  sigmaIn.step = '0.01';
  if (view.sigma) sigmaIn.value = String(view.sigma.value);
  sigmaIn.onchange = () => session.send('set_sigma', { value: Number(sigmaIn.value) });
  transport.append(pauseBtn, el('span', 'label', 'sigma'), sigmaIn);
  if (view.sigma) {
    transport.append(el('span', undefined,
                        `${view.sigma.value.toFixed(3)} (seq ${view.sigma.seq})`));
  }
  root.append(transport);
}

export function renderTransport(session: ConsoleSession, root: HTMLElement,
                                urlBox: { url: string; apply: (u: string) => void }): void {
  const view = transportView(session);
  root.replaceChildren();
  const head = el('div', 'row');
  head.append(el('h2', undefined, 'Transport'), stalenessBadge(view.stale));
  root.append(head);
  const controls = el('div', 'row');
  const startBtn = el('button', undefined, 'start') as HTMLButtonElement;
  startBtn.onclick = () => session.send('start');
  const stopBtn = el('button', undefined, 'stop') as HTMLButtonElement;
  stopBtn.onclick = () => session.send('stop');
  const takeBtn = el('button', undefined, 'takeover') as HTMLButtonElement;
  takeBtn.onclick = () => session.send('takeover');
  controls.append(startBtn, stopBtn, takeBtn);
  root.append(controls);

  const lines = [
    `connection: ${view.connected ? 'connected' : 'disconnected'}`,
    `running: ${view.running ? `${view.running.value} (seq ${view.running.seq})` : 'unknown'}`,
    `best distance: ${view.bestDistance ? view.bestDistance.value.toFixed(3) : '-'}`,
    `latency: last ${view.latency.lastMs ?? '-'} ms, mean `
      + `${view.latency.meanMs?.toFixed(1) ?? '-'} ms`,
    `pending commands: ${view.pendingCount}`,
    `server seq: ${view.serverSeq}`,
  ];
  for (const line of lines) root.append(el('div', 'stat', line));

  const urlRow = el('div', 'row');
  const urlIn = el('input') as HTMLInputElement;
  urlIn.value = urlBox.url;
  const connectBtn = el('button', undefined, 'reconnect') as HTMLButtonElement;
  connectBtn.onclick = () => urlBox.apply(urlIn.value);
  urlRow.append(el('span', 'label', 'engine URL'), urlIn, connectBtn);
  root.append(urlRow);
}
