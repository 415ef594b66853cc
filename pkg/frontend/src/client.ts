/**
 * Browser transport: one websocket feeding a ConsoleSession, with capped
 * exponential reconnect. The engine URL is configurable at runtime.
 */

import { ConsoleSession } from './session.js';

export class EngineClient {
  private ws: WebSocket | null = null;
  private attempts = 0;
  private closed = false;

  constructor(
    private url: string,
    readonly session: ConsoleSession,
    private readonly onChange: () => void = () => undefined,
  ) {}

  connect(): void {
    this.closed = false;
    this.open();
  }

  setUrl(url: string): void {
    this.url = url;
    this.ws?.close();
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }

  private open(): void {
    this.ws = new WebSocket(this.url);
    this.session.attachSender((raw) => {
      if (this.ws && this.ws.readyState === WebSocket.OPEN) {
        this.ws.send(raw);
      }
    });
    this.ws.onopen = () => {
      this.attempts = 0;
      this.session.markConnected(true);
      this.onChange();
    };
    this.ws.onmessage = (ev) => {
      this.session.ingest(String(ev.data));
      this.onChange();
    };
    this.ws.onclose = () => {
      this.session.markConnected(false);
      this.onChange();
      if (!this.closed) this.reconnect();
    };
    this.ws.onerror = () => {
      this.ws?.close();
    };
  }

  private reconnect(): void {
    const delay = Math.min(500 * 2 ** this.attempts, 10_000);
    this.attempts += 1;
    setTimeout(() => {
      if (!this.closed) this.open();
    }, delay);
  }
}
