/**
 * Minimal deterministic SVG line charts.
 *
 * No timestamps, no randomness: byte-identical output for identical input.
 * Layout constants are tuned for readable single-column figures; styling is
 * not part of any contract.
 */

import { FigureData, Series } from "./figure.js";

const W = 640;
const H = 400;
const ML = 74;
const MR = 24;
const MT = 40;
const MB = 54;
const PW = W - ML - MR;
const PH = H - MT - MB;

const PALETTE = ["#4361ee", "#e63946", "#2d6a4f", "#f77f00", "#7209b7", "#577590"];

// ---------------------------------------------------------------------------
// Scales and ticks
// ---------------------------------------------------------------------------

interface Scale {
  toPx: (v: number) => number;
  ticks: number[];
}

function niceLinearTicks(min: number, max: number, count: number): number[] {
  const range = max - min || Math.abs(max) || 1;
  const rough = range / count;
  const mag = Math.pow(10, Math.floor(Math.log10(rough)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => s >= rough) ?? rough;
  const ticks: number[] = [];
  for (let v = Math.ceil(min / step) * step; v <= max + step * 1e-9; v += step) {
    ticks.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return ticks;
}

function decadeTicks(min: number, max: number): number[] {
  const lo = Math.floor(Math.log10(min));
  const hi = Math.ceil(Math.log10(max));
  const stride = Math.max(1, Math.ceil((hi - lo) / 8));
  const ticks: number[] = [];
  for (let e = lo; e <= hi; e += stride) ticks.push(Math.pow(10, e));
  return ticks;
}

function makeScale(
  values: number[],
  log: boolean,
  pxLo: number,
  pxHi: number
): Scale {
  let min = Math.min(...values);
  let max = Math.max(...values);
  if (log) {
    const ticks = decadeTicks(min, max);
    min = Math.min(min, ticks[0]);
    max = Math.max(max, ticks[ticks.length - 1]);
    const lmin = Math.log10(min);
    const span = Math.log10(max) - lmin || 1;
    return {
      toPx: (v) => pxLo + ((Math.log10(v) - lmin) / span) * (pxHi - pxLo),
      ticks,
    };
  }
  if (min > 0 && min / (max || 1) < 0.5) min = 0; // anchor counts at zero
  const pad = (max - min || Math.abs(max) || 1) * 0.05;
  max += pad;
  const span = max - min || 1;
  return {
    toPx: (v) => pxLo + ((v - min) / span) * (pxHi - pxLo),
    ticks: niceLinearTicks(min, max, 6),
  };
}

function fmtTick(v: number, log: boolean): string {
  if (log) {
    const e = Math.round(Math.log10(v));
    return e >= 0 && e <= 3 ? String(Math.pow(10, e)) : `1e${e}`;
  }
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0);
  return a >= 100 ? v.toFixed(0) : String(Math.round(v * 1000) / 1000);
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

// ---------------------------------------------------------------------------
// Chart
// ---------------------------------------------------------------------------

function polyline(s: Series, xs: Scale, ys: Scale, color: string): string {
  const pts = s.x
    .map((vx, i) => `${xs.toPx(vx).toFixed(2)},${ys.toPx(s.y[i]).toFixed(2)}`)
    .join(" ");
  let out = `<polyline fill="none" stroke="${color}" stroke-width="1.4" points="${pts}"/>\n`;
  if (s.x.length <= 50) {
    for (let i = 0; i < s.x.length; i++) {
      out +=
        `<circle cx="${xs.toPx(s.x[i]).toFixed(2)}" ` +
        `cy="${ys.toPx(s.y[i]).toFixed(2)}" r="2.4" fill="${color}"/>\n`;
    }
  }
  return out;
}

/** Renders the extracted figure to a standalone SVG document. */
export function renderSvg(data: FigureData): string {
  const allX = data.series.flatMap((s) => s.x);
  const allY = data.series.flatMap((s) => s.y);
  const xs = makeScale(allX, data.xScale === "log", ML, ML + PW);
  const ys = makeScale(allY, data.yScale === "log", MT + PH, MT);

  let out = `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${W} ${H}" font-family="Helvetica, Arial, sans-serif">\n`;
  out += `<rect width="${W}" height="${H}" fill="#ffffff"/>\n`;
  out += `<text x="${ML}" y="${MT - 16}" font-size="13" font-weight="600" fill="#222">${esc(data.title)}</text>\n`;

  for (const v of ys.ticks) {
    const y = ys.toPx(v).toFixed(2);
    out += `<line x1="${ML}" y1="${y}" x2="${ML + PW}" y2="${y}" stroke="#eee" stroke-width="0.6"/>\n`;
    out += `<line x1="${ML - 4}" y1="${y}" x2="${ML}" y2="${y}" stroke="#333" stroke-width="0.6"/>\n`;
    out += `<text x="${ML - 7}" y="${(ys.toPx(v) + 3.2).toFixed(2)}" text-anchor="end" font-size="10" fill="#555">${esc(fmtTick(v, data.yScale === "log"))}</text>\n`;
  }
  for (const v of xs.ticks) {
    const x = xs.toPx(v).toFixed(2);
    out += `<line x1="${x}" y1="${MT + PH}" x2="${x}" y2="${MT + PH + 4}" stroke="#333" stroke-width="0.6"/>\n`;
    out += `<text x="${x}" y="${MT + PH + 16}" text-anchor="middle" font-size="10" fill="#555">${esc(fmtTick(v, data.xScale === "log"))}</text>\n`;
  }

  out += `<line x1="${ML}" y1="${MT}" x2="${ML}" y2="${MT + PH}" stroke="#333" stroke-width="0.8"/>\n`;
  out += `<line x1="${ML}" y1="${MT + PH}" x2="${ML + PW}" y2="${MT + PH}" stroke="#333" stroke-width="0.8"/>\n`;
  out += `<text x="${ML + PW / 2}" y="${H - 10}" text-anchor="middle" font-size="11" fill="#333">${esc(data.xLabel)}</text>\n`;
  out += `<text x="16" y="${MT + PH / 2}" text-anchor="middle" font-size="11" fill="#333" transform="rotate(-90,16,${MT + PH / 2})">${esc(data.yLabel)}</text>\n`;

  data.series.forEach((s, i) => {
    out += polyline(s, xs, ys, PALETTE[i % PALETTE.length]);
  });

  const legendW = Math.max(...data.series.map((s) => s.label.length)) * 6.2 + 30;
  const lx = ML + PW - legendW - 6;
  out += `<rect x="${lx}" y="${MT + 6}" width="${legendW}" height="${data.series.length * 15 + 8}" rx="3" fill="#ffffff" fill-opacity="0.88" stroke="#ddd" stroke-width="0.6"/>\n`;
  data.series.forEach((s, i) => {
    const y = MT + 17 + i * 15;
    const color = PALETTE[i % PALETTE.length];
    out += `<line x1="${lx + 7}" y1="${y}" x2="${lx + 23}" y2="${y}" stroke="${color}" stroke-width="1.6"/>\n`;
    out += `<text x="${lx + 28}" y="${y + 3.4}" font-size="10" fill="#333">${esc(s.label)}</text>\n`;
  });

  out += `</svg>\n`;
  return out;
}
