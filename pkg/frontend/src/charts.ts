/**
 * The four scenario timelines: anomaly score (raw + smoothed),
 * warning flag, occupancy flag, and plant temperature, on a shared
 * time axis with rule-injection markers.
 *
 * Data assembly is pure and unit-tested; the uPlot glue lives behind
 * mount() and only runs in the browser. Charts render emissions, so
 * panels fed by ingested-only events (raw anomaly scores, raw
 * temperature readings) expect pass-through rules; the console offers
 * those as one-click taps.
 */

import { ParsedEvent } from "./protocol.js";

export interface PanelSpec {
  title: string;
  series: { label: string; names: string[] }[];
  min?: number;
  max?: number;
}

export const PANELS: PanelSpec[] = [
  {
    title: "anomaly score",
    series: [
      { label: "raw", names: ["anomaly_score"] },
      {
        label: "smoothed",
        names: ["smoothed_anomaly_score", "smoothed_anoamaly_score"],
      },
    ],
  },
  {
    title: "warning",
    series: [{ label: "warning", names: ["warning"] }],
    min: 0,
    max: 1.2,
  },
  {
    title: "occupancy",
    series: [{ label: "present", names: ["occupied", "not_occupied"] }],
    min: 0,
    max: 1.2,
  },
  {
    title: "temperature [C]",
    series: [
      { label: "temperature", names: ["temperature", "temperature_reading"] },
    ],
  },
];

/** Event value for a panel series; occupancy events collapse to 0/1. */
export function seriesValue(e: ParsedEvent): number | null {
  if (e.name === "occupied") return 1;
  if (e.name === "not_occupied") return 0;
  if (e.name === "warning") return 1;
  const first = e.args.find((a): a is number => typeof a === "number");
  return first === undefined ? null : first;
}

type Row = (number | null)[];

export class PanelData {
  /** per-x rows, x ascending; row[i] = series i value or null */
  private rows = new Map<number, Row>();
  private dirty = false;
  private cache: [number[], ...(number | null)[][]] | null = null;

  constructor(readonly spec: PanelSpec) {}

  add(e: ParsedEvent): boolean {
    const idx = this.spec.series.findIndex((s) => s.names.includes(e.name));
    if (idx < 0) return false;
    const value = seriesValue(e);
    if (value === null) return false;
    const x = e.endMs;
    let row = this.rows.get(x);
    if (!row) {
      row = this.spec.series.map(() => null);
      this.rows.set(x, row);
    }
    row[idx] = value;
    this.dirty = true;
    return true;
  }

  /** uPlot-aligned data: [xs, series0, series1, ...]. */
  data(): [number[], ...(number | null)[][]] {
    if (!this.dirty && this.cache) return this.cache;
    const xs = [...this.rows.keys()].sort((a, b) => a - b);
    const cols: (number | null)[][] = this.spec.series.map(() => []);
    for (const x of xs) {
      const row = this.rows.get(x)!;
      row.forEach((v, i) => cols[i].push(v));
    }
    this.cache = [xs, ...cols];
    this.dirty = false;
    return this.cache;
  }

  get pointCount(): number {
    return this.rows.size;
  }
}

export class Timelines {
  readonly panels: PanelData[];
  readonly injectionMarks: number[] = [];
  private lastSeenMs = 0;

  constructor() {
    this.panels = PANELS.map((spec) => new PanelData(spec));
  }

  addEvent(e: ParsedEvent): boolean {
    this.lastSeenMs = Math.max(this.lastSeenMs, e.endMs);
    let hit = false;
    for (const panel of this.panels) {
      if (panel.add(e)) hit = true;
    }
    return hit;
  }

  /** Record a rule injection at the current stream time. */
  markInjection(): number {
    this.injectionMarks.push(this.lastSeenMs);
    return this.lastSeenMs;
  }
}

/* ------------------------------------------------------------------ *
 * Browser glue (uPlot is loaded globally by a script tag).            *
 * ------------------------------------------------------------------ */

declare const uPlot: any;

const COLORS = ["#2f7ed8", "#d84b2f", "#2fa84b", "#a82fd8"];

export function mount(timelines: Timelines, container: HTMLElement): () => void {
  const plots: any[] = [];
  const sync = uPlot.sync("edgecep");
  timelines.panels.forEach((panel, pi) => {
    const host = document.createElement("div");
    host.className = "panel";
    container.appendChild(host);
    const opts = {
      title: panel.spec.title,
      width: host.clientWidth || 900,
      height: 150,
      cursor: { sync: { key: sync.key } },
      scales: {
        x: { time: false },
        y: { range: panelRange(panel.spec) },
      },
      axes: [{ label: "t [ms]" }, {}],
      series: [
        {},
        ...panel.spec.series.map((s, si) => ({
          label: s.label,
          stroke: COLORS[(pi + si) % COLORS.length],
          spanGaps: true,
        })),
      ],
      hooks: {
        drawClear: [
          (u: any) => {
            const ctx = u.ctx;
            ctx.save();
            ctx.strokeStyle = "#c9a400";
            for (const t of timelines.injectionMarks) {
              const x = u.valToPos(t, "x", true);
              ctx.beginPath();
              ctx.moveTo(x, u.bbox.top);
              ctx.lineTo(x, u.bbox.top + u.bbox.height);
              ctx.stroke();
            }
            ctx.restore();
          },
        ],
      },
    };
    const plot = new uPlot(opts, panel.data(), host);
    sync.sub(plot);
    plots.push(plot);
  });
  const refresh = () => {
    timelines.panels.forEach((panel, i) => plots[i].setData(panel.data()));
  };
  return refresh;
}

function panelRange(spec: PanelSpec) {
  if (spec.min === undefined) return undefined;
  return () => [spec.min, spec.max];
}
