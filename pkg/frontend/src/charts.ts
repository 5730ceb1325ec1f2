// Hand-rolled SVG bar and pie charts. Both render the same slice data, so
// toggling the chart kind can never change the underlying numbers.

export interface Slice {
  label: string;
  value: number;
  title?: string;
  color?: string;
}

export const PALETTE = [
  "#4e79a7",
  "#f28e2b",
  "#59a14f",
  "#e15759",
  "#b07aa1",
  "#76b7b2",
  "#edc948",
  "#9c755f",
  "#bab0ac",
];

export const DEM_BLUE = "#2166ac";
export const REP_RED = "#b2182c";

export function chartTotal(slices: Slice[]): number {
  return slices.reduce((acc, s) => acc + s.value, 0);
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

export function barChartSvg(slices: Slice[], width = 220, height = 120): string {
  const max = Math.max(1, ...slices.map((s) => s.value));
  const barWidth = width / Math.max(1, slices.length);
  const parts: string[] = [];
  slices.forEach((s, i) => {
    const h = (s.value / max) * (height - 24);
    const x = i * barWidth + 3;
    const y = height - 14 - h;
    const color = s.color ?? PALETTE[i % PALETTE.length];
    parts.push(
      `<rect x="${x.toFixed(1)}" y="${y.toFixed(1)}" width="${(barWidth - 6).toFixed(1)}" ` +
        `height="${h.toFixed(1)}" fill="${color}"><title>${esc(s.title ?? s.label)}: ${s.value}</title></rect>`,
      `<text x="${(x + (barWidth - 6) / 2).toFixed(1)}" y="${height - 2}" text-anchor="middle" ` +
        `font-size="9">${esc(s.label)}</text>`,
    );
  });
  return `<svg viewBox="0 0 ${width} ${height}" class="chart chart-bar">${parts.join("")}</svg>`;
}

export function pieChartSvg(slices: Slice[], size = 120): string {
  const total = chartTotal(slices);
  const cx = size / 2;
  const cy = size / 2;
  const r = size / 2 - 4;
  if (total <= 0) {
    return `<svg viewBox="0 0 ${size} ${size}" class="chart chart-pie"><circle cx="${cx}" cy="${cy}" r="${r}" fill="#eee"/></svg>`;
  }
  const parts: string[] = [];
  let angle = -Math.PI / 2;
  slices.forEach((s, i) => {
    if (s.value <= 0) return;
    const sweep = (s.value / total) * Math.PI * 2;
    const x0 = cx + r * Math.cos(angle);
    const y0 = cy + r * Math.sin(angle);
    const x1 = cx + r * Math.cos(angle + sweep);
    const y1 = cy + r * Math.sin(angle + sweep);
    const large = sweep > Math.PI ? 1 : 0;
    const color = s.color ?? PALETTE[i % PALETTE.length];
    const path =
      s.value === total
        ? `<circle cx="${cx}" cy="${cy}" r="${r}" fill="${color}"><title>${esc(s.title ?? s.label)}: ${s.value}</title></circle>`
        : `<path d="M ${cx} ${cy} L ${x0.toFixed(2)} ${y0.toFixed(2)} ` +
          `A ${r} ${r} 0 ${large} 1 ${x1.toFixed(2)} ${y1.toFixed(2)} Z" fill="${color}">` +
          `<title>${esc(s.title ?? s.label)}: ${s.value}</title></path>`;
    parts.push(path);
    angle += sweep;
  });
  return `<svg viewBox="0 0 ${size} ${size}" class="chart chart-pie">${parts.join("")}</svg>`;
}
