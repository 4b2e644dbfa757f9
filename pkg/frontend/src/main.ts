/** DOM wiring for the console page. */

import { Timelines, mount } from "./charts.js";
import { parseEventLiteral } from "./protocol.js";
import { ConsoleSession } from "./session.js";
import { WsTransport } from "./wsTransport.js";

const LOG_LIMIT = 500;

// pass-through rules that surface ingested-only readings as emissions
// so the raw-score and temperature panels have data to draw
const CHART_TAPS: [string, string][] = [
  ["chart_temp", "temperature_reading[_,_](X) :- temperature[_,_](X)"],
];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function defaultUrl(): string {
  const scheme = location.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${location.host}/ws`;
}

function start(): void {
  const banner = el<HTMLDivElement>("banner");
  const streamLog = el<HTMLDivElement>("stream");
  const streamCount = el<HTMLSpanElement>("stream-count");
  const ruleId = el<HTMLInputElement>("rule-id");
  const ruleText = el<HTMLTextAreaElement>("rule-text");
  const ruleResponse = el<HTMLDivElement>("rule-response");
  const activeRules = el<HTMLUListElement>("active-rules");

  const transport = new WsTransport(defaultUrl());
  const session = new ConsoleSession(transport);
  const timelines = new Timelines();
  const refresh = mount(timelines, el("charts"));

  let shown = 0;
  session.onEmit((entry) => {
    const line = document.createElement("div");
    line.textContent = entry.literal;
    streamLog.appendChild(line);
    shown += 1;
    while (shown > LOG_LIMIT && streamLog.firstChild) {
      streamLog.removeChild(streamLog.firstChild);
      shown -= 1;
    }
    streamLog.scrollTop = streamLog.scrollHeight;
    streamCount.textContent = String(session.scrollback.length);
    const parsed = parseEventLiteral(entry.literal);
    if (parsed && timelines.addEvent(parsed)) refresh();
  });

  session.onState((connected) => {
    banner.textContent = connected
      ? `connected to ${defaultUrl()}`
      : "disconnected, retrying...";
    banner.className = connected ? "banner up" : "banner down";
    if (connected && session.subscriptions.size === 0) {
      session.subscribe("*");
    }
  });

  const renderActiveRules = () => {
    activeRules.textContent = "";
    for (const draft of session.rules.values()) {
      if (!draft.active) continue;
      const item = document.createElement("li");
      const remove = document.createElement("button");
      remove.textContent = "remove";
      remove.onclick = async () => {
        const response = await session.removeRule(draft.ruleId);
        ruleResponse.textContent =
          response.kind === "ok" ? `OK ${draft.ruleId}` : `ERR ${response.code}`;
        renderActiveRules();
      };
      item.textContent = `${draft.ruleId}: ${draft.text} `;
      item.appendChild(remove);
      activeRules.appendChild(item);
    }
  };

  el<HTMLButtonElement>("inject").onclick = async () => {
    const draft = await session.injectRule(ruleId.value, ruleText.value);
    ruleResponse.textContent = draft.lastResponse;
    ruleResponse.className = draft.active ? "response ok" : "response err";
    if (draft.active) timelines.markInjection();
    renderActiveRules();
    refresh();
  };

  el<HTMLButtonElement>("taps").onclick = async () => {
    for (const [id, text] of CHART_TAPS) {
      const draft = await session.injectRule(id, text);
      ruleResponse.textContent = `${id}: ${draft.lastResponse}`;
    }
    renderActiveRules();
  };

  session.start();
}

start();
