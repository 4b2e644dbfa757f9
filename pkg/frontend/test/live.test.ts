/**
 * End-to-end console loop against a live engine node: spawn
 * `edgecep serve`, connect the real session + WebSocket transport,
 * inject the backup rule from the editor path, feed events, and watch
 * the backup emissions render.
 */

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { spawn, ChildProcess } from "node:child_process";
import { createServer } from "node:net";
import WebSocket from "ws";

import { commands } from "../src/protocol.js";
import { ConsoleSession } from "../src/session.js";
import { WsTransport } from "../src/wsTransport.js";

let proc: ChildProcess;
let wsPort: number;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const address = srv.address();
      if (typeof address === "object" && address) {
        const port = address.port;
        srv.close(() => resolve(port));
      } else {
        reject(new Error("no port"));
      }
    });
  });
}

async function waitForServer(port: number, timeoutMs = 15000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      await new Promise<void>((resolve, reject) => {
        const ws = new WebSocket(`ws://127.0.0.1:${port}/ws`);
        ws.on("open", () => {
          ws.close();
          resolve();
        });
        ws.on("error", reject);
      });
      return;
    } catch {
      if (Date.now() > deadline) throw new Error("server never came up");
      await new Promise((r) => setTimeout(r, 100));
    }
  }
}

function connectedSession(): Promise<ConsoleSession> {
  const transport = new WsTransport(
    `ws://127.0.0.1:${wsPort}/ws`,
    WebSocket as never,
  );
  const session = new ConsoleSession(transport);
  return new Promise((resolve) => {
    session.onState((up) => {
      if (up) resolve(session);
    });
    session.start();
  });
}

beforeAll(async () => {
  const tcpPort = await freePort();
  wsPort = await freePort();
  proc = spawn(
    "python3",
    ["-m", "edgecep.cli", "serve", "--port", String(tcpPort),
     "--ws-port", String(wsPort), "--workdir", "/tmp/edgecep-console-test"],
    { stdio: "ignore" },
  );
  await waitForServer(wsPort);
}, 30000);

afterAll(() => {
  proc?.kill();
});

describe("console loop against a running node", () => {
  it("injects rule 2.5, sees OK, and renders backup emissions within 1 s",
     async () => {
    const session = await connectedSession();
    await session.subscribe("*");

    const draft = await session.injectRule(
      "r25",
      "backup[_,_](Y) :- temperature[_,_](Y) and not_occupied[_,_](X) " +
        "where(Y>30) [range 1 s]",
    );
    expect(draft.lastResponse).toBe("OK r25");
    expect(draft.active).toBe(true);

    const rendered = new Promise<number>((resolve) => {
      session.onEmit((entry) => {
        if (entry.literal.startsWith("backup[")) resolve(entry.receivedAt);
      });
    });
    const sentAt = Date.now();
    await session.command(commands.event("temperature[1000, 1000](31.5)"));
    await session.command(commands.event("not_occupied[1200, 1200](-0.4)"));
    const seenAt = await rendered;
    expect(seenAt - sentAt).toBeLessThan(1000);
    expect(
      session.scrollback.some((e) =>
        e.literal.startsWith("backup[1000, 1200](31.5)"),
      ),
    ).toBe(true);
  }, 15000);

  it("renders the server's parser ERR verbatim for a malformed rule",
     async () => {
    const session = await connectedSession();
    const draft = await session.injectRule("broken", "this is not a rule");
    expect(draft.active).toBe(false);
    expect(draft.lastResponse).toMatch(/^ERR parse /);
    // the message is the server's own text, not a client paraphrase
    expect(draft.lastResponse.length).toBeGreaterThan("ERR parse ".length);
  }, 15000);

  it("reports duplicate rule ids from the server", async () => {
    const session = await connectedSession();
    const first = await session.injectRule(
      "dup1", "h[_,_](X) :- e_dup[_,_](X)");
    expect(first.active).toBe(true);
    const second = await session.injectRule(
      "dup1", "h[_,_](X) :- e_dup[_,_](X)");
    expect(second.active).toBe(false);
    expect(second.lastResponse).toMatch(/^ERR dup-rule /);
  }, 15000);
});
