/**
 * Wire protocol: command line builders and response line parsing.
 *
 * The console never free-forms protocol text; every UI action goes
 * through one of the builders here, so only grammar-conformant lines
 * ever reach the socket.
 */

export type Response =
  | { kind: "ok"; detail: string }
  | { kind: "err"; code: string; message: string }
  | { kind: "emit"; literal: string }
  | { kind: "pong" };

export interface ParsedEvent {
  name: string;
  startMs: number;
  endMs: number;
  args: (number | string)[];
}

const IDENT = /^[A-Za-z_][A-Za-z0-9_]*$/;

export function isIdentifier(text: string): boolean {
  return IDENT.test(text);
}

function requireIdentifier(text: string, what: string): string {
  const trimmed = text.trim();
  if (!IDENT.test(trimmed)) {
    throw new Error(`${what} must be an identifier, got ${JSON.stringify(text)}`);
  }
  return trimmed;
}

function requireLine(text: string, what: string): string {
  const trimmed = text.trim();
  if (!trimmed) throw new Error(`${what} must not be empty`);
  if (/[\r\n]/.test(trimmed)) throw new Error(`${what} must be one line`);
  return trimmed;
}

export const commands = {
  ping(): string {
    return "PING";
  },
  subscribe(name: string): string {
    return `SUB ${name === "*" ? "*" : requireIdentifier(name, "event name")}`;
  },
  unsubscribe(name: string): string {
    return `UNSUB ${name === "*" ? "*" : requireIdentifier(name, "event name")}`;
  },
  rule(id: string, text: string): string {
    return `RULE ${requireIdentifier(id, "rule id")} ${requireLine(text, "rule text")}`;
  },
  unrule(id: string): string {
    return `UNRULE ${requireIdentifier(id, "rule id")}`;
  },
  event(literal: string): string {
    return `EVENT ${requireLine(literal, "event literal")}`;
  },
  time(ms: number): string {
    if (!Number.isInteger(ms) || ms < 0) throw new Error(`bad timestamp ${ms}`);
    return `TIME ${ms}`;
  },
};

export function parseResponse(line: string): Response {
  if (line === "PONG") return { kind: "pong" };
  if (line.startsWith("EMIT ")) return { kind: "emit", literal: line.slice(5) };
  if (line === "OK" || line.startsWith("OK ")) {
    return { kind: "ok", detail: line.length > 2 ? line.slice(3) : "" };
  }
  if (line.startsWith("ERR ")) {
    const rest = line.slice(4);
    const space = rest.indexOf(" ");
    if (space < 0) return { kind: "err", code: rest, message: "" };
    return { kind: "err", code: rest.slice(0, space), message: rest.slice(space + 1) };
  }
  throw new Error(`unrecognized response line: ${JSON.stringify(line)}`);
}

/** Parse an event literal: name[start, end](arg1, arg2, ...). */
export function parseEventLiteral(literal: string): ParsedEvent | null {
  const m = /^([A-Za-z_][A-Za-z0-9_]*)\[\s*(\d+)\s*,\s*(\d+)\s*\]\((.*)\)$/.exec(
    literal.trim(),
  );
  if (!m) return null;
  const args: (number | string)[] = [];
  const body = m[4].trim();
  if (body.length > 0) {
    for (const raw of body.split(",")) {
      const token = raw.trim();
      if (IDENT.test(token)) {
        args.push(token);
      } else {
        const value = Number(token);
        if (!Number.isFinite(value)) return null;
        args.push(value);
      }
    }
  }
  return { name: m[1], startMs: Number(m[2]), endMs: Number(m[3]), args };
}
