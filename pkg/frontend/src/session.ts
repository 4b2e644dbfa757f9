/**
 * Console session state over a line transport.
 *
 * Responses to issued commands come back in issue order; EMIT lines
 * interleave and feed the scrollback ring and chart listeners. Rule
 * drafts turn active only on the server's OK; the view never shows an
 * optimistic state. On reconnect the session resubscribes everything
 * it was subscribed to (the engine itself keeps its rules).
 */

import { commands, parseEventLiteral, parseResponse, Response } from "./protocol.js";

export interface Transport {
  send(line: string): void;
  onLine(handler: (line: string) => void): void;
  onState(handler: (connected: boolean) => void): void;
  connect(): void;
  close(): void;
}

export interface RuleDraft {
  ruleId: string;
  text: string;
  lastResponse: string;
  active: boolean;
}

export interface EmitEntry {
  literal: string;
  receivedAt: number;
}

export const SCROLLBACK_LIMIT = 10000;

type CommandReply = { resolve: (r: Response) => void; line: string };

export class ConsoleSession {
  readonly scrollback: EmitEntry[] = [];
  readonly rules = new Map<string, RuleDraft>();
  readonly subscriptions = new Set<string>();
  connected = false;

  private pending: CommandReply[] = [];
  private emitListeners: ((e: EmitEntry) => void)[] = [];
  private stateListeners: ((connected: boolean) => void)[] = [];
  private clock: () => number;

  constructor(private transport: Transport, clock?: () => number) {
    this.clock = clock ?? (() => Date.now());
    transport.onLine((line) => this.handleLine(line));
    transport.onState((connected) => this.handleState(connected));
  }

  start(): void {
    this.transport.connect();
  }

  onEmit(handler: (e: EmitEntry) => void): void {
    this.emitListeners.push(handler);
  }

  onState(handler: (connected: boolean) => void): void {
    this.stateListeners.push(handler);
  }

  /** Send one protocol line and await its (non-EMIT) response. */
  command(line: string): Promise<Response> {
    return new Promise((resolve) => {
      this.pending.push({ resolve, line });
      this.transport.send(line);
    });
  }

  async subscribe(name: string): Promise<Response> {
    const response = await this.command(commands.subscribe(name));
    if (response.kind === "ok") this.subscriptions.add(name);
    return response;
  }

  async injectRule(ruleId: string, text: string): Promise<RuleDraft> {
    const draft: RuleDraft = {
      ruleId,
      text,
      lastResponse: "",
      active: false,
    };
    this.rules.set(ruleId, draft);
    let response: Response;
    try {
      response = await this.command(commands.rule(ruleId, text));
    } catch (err) {
      draft.lastResponse = String(err instanceof Error ? err.message : err);
      return draft;
    }
    draft.lastResponse = formatResponse(response);
    draft.active = response.kind === "ok";
    return draft;
  }

  async removeRule(ruleId: string): Promise<Response> {
    const response = await this.command(commands.unrule(ruleId));
    const draft = this.rules.get(ruleId);
    if (draft && response.kind === "ok") draft.active = false;
    return response;
  }

  private handleLine(rawLine: string): void {
    const response = parseResponse(rawLine);
    if (response.kind === "emit") {
      const entry: EmitEntry = {
        literal: response.literal,
        receivedAt: this.clock(),
      };
      this.scrollback.push(entry);
      if (this.scrollback.length > SCROLLBACK_LIMIT) {
        this.scrollback.splice(0, this.scrollback.length - SCROLLBACK_LIMIT);
      }
      for (const listener of this.emitListeners) listener(entry);
      return;
    }
    const waiter = this.pending.shift();
    if (waiter) waiter.resolve(response);
  }

  private handleState(connected: boolean): void {
    this.connected = connected;
    if (connected) {
      // engine state survives on the server; only our subscriptions
      // are per-session and need replaying
      for (const name of this.subscriptions) {
        this.command(commands.subscribe(name));
      }
    } else {
      // drop waiters so callers see the disconnect rather than hanging
      const dropped = this.pending;
      this.pending = [];
      for (const waiter of dropped) {
        waiter.resolve({ kind: "err", code: "disconnected", message: waiter.line });
      }
    }
    for (const listener of this.stateListeners) listener(connected);
  }
}

export function formatResponse(r: Response): string {
  switch (r.kind) {
    case "ok":
      return r.detail ? `OK ${r.detail}` : "OK";
    case "err":
      return `ERR ${r.code} ${r.message}`.trimEnd();
    case "pong":
      return "PONG";
    case "emit":
      return `EMIT ${r.literal}`;
  }
}

export { parseEventLiteral };
