/**
 * WebSocket transport. Reconnects with capped backoff; the session
 * layer resubscribes on each reopen. A WebSocket-like constructor can
 * be injected so the node test runner ('ws') and the browser share
 * this code.
 */

import { Transport } from "./session.js";

interface WebSocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
}

type WsCtor = new (url: string) => WebSocketLike;

export class WsTransport implements Transport {
  private socket: WebSocketLike | null = null;
  private lineHandlers: ((line: string) => void)[] = [];
  private stateHandlers: ((connected: boolean) => void)[] = [];
  private closed = false;
  private retryMs = 250;

  constructor(
    private url: string,
    private ctor: WsCtor = (globalThis as { WebSocket?: WsCtor }).WebSocket!,
  ) {
    if (!this.ctor) throw new Error("no WebSocket implementation available");
  }

  connect(): void {
    this.closed = false;
    this.open();
  }

  private open(): void {
    const socket = new this.ctor(this.url);
    this.socket = socket;
    socket.onopen = () => {
      this.retryMs = 250;
      for (const handler of this.stateHandlers) handler(true);
    };
    socket.onmessage = (ev) => {
      const text = typeof ev.data === "string" ? ev.data : String(ev.data);
      for (const raw of text.split("\n")) {
        const line = raw.trim();
        if (!line) continue;
        for (const handler of this.lineHandlers) handler(line);
      }
    };
    const down = () => {
      if (this.socket !== socket) return;
      this.socket = null;
      for (const handler of this.stateHandlers) handler(false);
      if (!this.closed) {
        setTimeout(() => this.open(), this.retryMs);
        this.retryMs = Math.min(this.retryMs * 2, 5000);
      }
    };
    socket.onclose = down;
    socket.onerror = () => {
      /* onclose follows and handles the retry */
    };
  }

  send(line: string): void {
    if (!this.socket) throw new Error("not connected");
    this.socket.send(line);
  }

  onLine(handler: (line: string) => void): void {
    this.lineHandlers.push(handler);
  }

  onState(handler: (connected: boolean) => void): void {
    this.stateHandlers.push(handler);
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }
}
