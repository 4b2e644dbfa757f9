import { describe, expect, it } from "vitest";

import { ConsoleSession, SCROLLBACK_LIMIT, Transport } from "../src/session.js";

class FakeTransport implements Transport {
  sent: string[] = [];
  private lineHandlers: ((line: string) => void)[] = [];
  private stateHandlers: ((connected: boolean) => void)[] = [];

  send(line: string): void {
    this.sent.push(line);
  }
  onLine(h: (line: string) => void): void {
    this.lineHandlers.push(h);
  }
  onState(h: (connected: boolean) => void): void {
    this.stateHandlers.push(h);
  }
  connect(): void {
    this.up();
  }
  close(): void {
    this.down();
  }

  feed(line: string): void {
    for (const h of this.lineHandlers) h(line);
  }
  up(): void {
    for (const h of this.stateHandlers) h(true);
  }
  down(): void {
    for (const h of this.stateHandlers) h(false);
  }
}

function pair(): [ConsoleSession, FakeTransport] {
  const transport = new FakeTransport();
  const session = new ConsoleSession(transport, () => 123);
  return [session, transport];
}

describe("scrollback", () => {
  it("keeps wire arrival order and the ring bound", () => {
    const [session, transport] = pair();
    for (let i = 0; i < SCROLLBACK_LIMIT + 50; i++) {
      transport.feed(`EMIT e[${i}, ${i}]()`);
    }
    expect(session.scrollback.length).toBe(SCROLLBACK_LIMIT);
    expect(session.scrollback[0].literal).toBe("e[50, 50]()");
    expect(session.scrollback.at(-1)!.literal).toBe(
      `e[${SCROLLBACK_LIMIT + 49}, ${SCROLLBACK_LIMIT + 49}]()`,
    );
  });
});

describe("rule drafts", () => {
  it("activates only after the server's OK", async () => {
    const [session, transport] = pair();
    const pending = session.injectRule("r25", "backup[_,_](Y) :- x[_,_](Y)");
    expect(session.rules.get("r25")!.active).toBe(false);
    transport.feed("OK r25");
    const draft = await pending;
    expect(draft.active).toBe(true);
    expect(draft.lastResponse).toBe("OK r25");
  });

  it("shows the server ERR verbatim and stays inactive", async () => {
    const [session, transport] = pair();
    const pending = session.injectRule("bad", "nonsense %%");
    transport.feed("ERR parse expected '[' (pattern timespec) (at offset 9)");
    const draft = await pending;
    expect(draft.active).toBe(false);
    expect(draft.lastResponse).toBe(
      "ERR parse expected '[' (pattern timespec) (at offset 9)",
    );
  });

  it("never sends a non-grammar line even for bad drafts", async () => {
    const [session, transport] = pair();
    const draft = await session.injectRule("bad id", "x");
    expect(draft.active).toBe(false);
    expect(transport.sent).toEqual([]); // rejected client-side
  });
});

describe("emit interleaving", () => {
  it("routes EMITs around command responses", async () => {
    const [session, transport] = pair();
    const pending = session.command("SUB *");
    transport.feed("EMIT a[1, 1]()");
    transport.feed("OK *");
    transport.feed("EMIT b[2, 2]()");
    const response = await pending;
    expect(response).toEqual({ kind: "ok", detail: "*" });
    expect(session.scrollback.map((e) => e.literal)).toEqual([
      "a[1, 1]()",
      "b[2, 2]()",
    ]);
  });
});

describe("reconnect", () => {
  it("resubscribes everything on reopen", async () => {
    const [session, transport] = pair();
    transport.up();
    const pending = session.subscribe("*");
    transport.feed("OK *");
    await pending;
    transport.sent.length = 0;
    transport.down();
    transport.up();
    expect(transport.sent).toEqual(["SUB *"]);
  });

  it("fails pending commands on disconnect instead of hanging", async () => {
    const [session, transport] = pair();
    transport.up();
    const pending = session.command("PING");
    transport.down();
    const response = await pending;
    expect(response.kind).toBe("err");
    expect(session.connected).toBe(false);
  });
});
