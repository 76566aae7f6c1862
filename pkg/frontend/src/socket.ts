/**
 * WebSocket wrapper: collects inbound envelopes into a backlog the render
 * loop drains, reconnects with backoff after a drop, and rate-limits
 * outbound steering. The reader only ever appends to the backlog, so a slow
 * renderer can never stall the socket.
 */

import { Envelope, parseEnvelope, serialize } from "./protocol.js";

type WsLike = {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  readyState: number;
};

export interface SocketOptions {
  /** Constructor to use; defaults to the browser global. Tests inject ws. */
  webSocketImpl?: new (url: string) => WsLike;
  reconnectDelayMs?: number;
  /** Called on every successful (re)connect, before any message arrives. */
  onOpen?: () => void;
  onClose?: () => void;
}

export class SocketClient {
  readonly url: string;
  private ws: WsLike | null = null;
  private backlog: Envelope[] = [];
  private closed = false;
  private readonly impl: new (url: string) => WsLike;
  private readonly delayMs: number;
  private readonly opts: SocketOptions;
  connected = false;
  connects = 0;

  constructor(url: string, opts: SocketOptions = {}) {
    this.url = url;
    this.opts = opts;
    const impl = opts.webSocketImpl
      ?? (globalThis as { WebSocket?: new (url: string) => WsLike }).WebSocket;
    if (!impl) throw new Error("no WebSocket implementation available");
    this.impl = impl;
    this.delayMs = opts.reconnectDelayMs ?? 1000;
    this.open();
  }

  private open(): void {
    const ws = new this.impl(this.url);
    this.ws = ws;
    ws.onopen = () => {
      this.connected = true;
      this.connects += 1;
      this.opts.onOpen?.();
    };
    ws.onmessage = (ev) => {
      const env = parseEnvelope(String(ev.data));
      if (env) this.backlog.push(env);
    };
    ws.onerror = () => { /* onclose follows; reconnect handles it */ };
    ws.onclose = () => {
      this.connected = false;
      this.opts.onClose?.();
      if (!this.closed) setTimeout(() => this.open(), this.delayMs);
    };
  }

  /** Hand the accumulated backlog to the caller and start a fresh one. */
  drain(): Envelope[] {
    if (this.backlog.length === 0) return [];
    const out = this.backlog;
    this.backlog = [];
    return out;
  }

  send(topic: string, data: unknown): boolean {
    if (!this.ws || !this.connected) return false;
    try {
      this.ws.send(serialize(topic, data));
      return true;
    } catch {
      return false;
    }
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}

/** Leading-edge rate limiter for the drag stream (user_target <= 30 Hz). */
export class Throttle {
  private last = -Infinity;
  constructor(private readonly minIntervalMs: number) {}

  ready(nowMs: number): boolean {
    if (nowMs - this.last >= this.minIntervalMs) {
      this.last = nowMs;
      return true;
    }
    return false;
  }
}
