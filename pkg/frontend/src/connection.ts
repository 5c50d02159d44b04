/**
 * Single-socket session connection with exponential-backoff reconnect.
 * The transport is injected so tests can plug in an in-memory fake server;
 * every server frame flows through one handler.
 */

import { decodeServerMessage, encodeMessage, type ClientMessage, type ServerMessage } from "./protocol.js";

export interface TransportLike {
  send(text: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type TransportFactory = (url: string) => TransportLike;

export interface ConnectionEvents {
  onMessage(msg: ServerMessage): void;
  onStatus(status: "connecting" | "connected" | "disconnected", detail?: string): void;
  onProtocolFault?(detail: string): void;
}

const BACKOFF_START_MS = 500;
const BACKOFF_CAP_MS = 8000;

export class SessionConnection {
  private transport: TransportLike | null = null;
  private seq = 0;
  private backoffMs = BACKOFF_START_MS;
  private closed = false;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly url: string,
    private readonly events: ConnectionEvents,
    private readonly factory: TransportFactory,
    private readonly schedule: (fn: () => void, ms: number) => ReturnType<typeof setTimeout> = setTimeout,
  ) {}

  connect(): void {
    if (this.closed) {
      return;
    }
    this.events.onStatus("connecting");
    const transport = this.factory(this.url);
    this.transport = transport;
    transport.onopen = () => {
      this.backoffMs = BACKOFF_START_MS;
      this.events.onStatus("connected");
    };
    transport.onmessage = (event) => {
      let msg: ServerMessage;
      try {
        msg = decodeServerMessage(event.data);
      } catch (err) {
        this.events.onProtocolFault?.(String(err));
        return;
      }
      this.events.onMessage(msg);
    };
    const dropped = () => {
      if (this.transport !== transport) {
        return;
      }
      this.transport = null;
      if (this.closed) {
        return;
      }
      this.events.onStatus("disconnected", `retrying in ${(this.backoffMs / 1000).toFixed(1)} s`);
      this.retryTimer = this.schedule(() => this.connect(), this.backoffMs);
      this.backoffMs = Math.min(this.backoffMs * 2, BACKOFF_CAP_MS);
    };
    transport.onclose = dropped;
    transport.onerror = dropped;
  }

  /** Sends with the next monotone sequence number; false when offline. */
  send(kind: ClientMessage["kind"], payload: Record<string, unknown>): boolean {
    if (!this.transport) {
      return false;
    }
    this.transport.send(encodeMessage({ kind, seq: this.seq++, payload }));
    return true;
  }

  close(): void {
    this.closed = true;
    if (this.retryTimer !== null) {
      clearTimeout(this.retryTimer);
    }
    this.transport?.close();
    this.transport = null;
  }
}

export function browserTransportFactory(url: string): TransportLike {
  const ws = new WebSocket(url);
  return {
    send: (text) => ws.send(text),
    close: () => ws.close(),
    set onopen(fn: (() => void) | null) {
      ws.onopen = fn;
    },
    get onopen() {
      return ws.onopen as (() => void) | null;
    },
    set onmessage(fn: ((event: { data: string }) => void) | null) {
      ws.onmessage = fn ? (event) => fn({ data: String(event.data) }) : null;
    },
    get onmessage() {
      return ws.onmessage as ((event: { data: string }) => void) | null;
    },
    set onclose(fn: (() => void) | null) {
      ws.onclose = fn;
    },
    get onclose() {
      return ws.onclose as (() => void) | null;
    },
    set onerror(fn: (() => void) | null) {
      ws.onerror = fn;
    },
    get onerror() {
      return ws.onerror as (() => void) | null;
    },
  };
}
