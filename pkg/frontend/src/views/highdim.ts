// High-Dimensional View: a Sankey diagram and scatterplot matrix over the
// crosstab of up to four selected questions. Geometry is computed from the
// crosstab cells alone, so link mass always reconciles with the service.

import { CrosstabPayload, QuestionInfo } from "../api.js";
import { PALETTE } from "../charts.js";

export interface SankeyNode {
  dim: number;
  letter: string;
  value: number;
  y0: number;
  y1: number;
}

export interface SankeyLink {
  fromDim: number;
  from: string;
  to: string;
  value: number;
}

export interface SankeyLayout {
  nodes: SankeyNode[];
  links: SankeyLink[];
  total: number;
}

export function computeSankey(crosstab: CrosstabPayload, height = 200): SankeyLayout {
  const nDims = crosstab.dims.length;
  const nodeTotals: Map<string, number>[] = Array.from({ length: nDims }, () => new Map());
  const linkTotals: Map<string, number>[] = Array.from({ length: Math.max(0, nDims - 1) }, () => new Map());
  let total = 0;
  for (const [key, count] of Object.entries(crosstab.cells)) {
    const letters = key.split("|");
    total += count;
    letters.forEach((letter, dim) => {
      nodeTotals[dim].set(letter, (nodeTotals[dim].get(letter) ?? 0) + count);
      if (dim + 1 < nDims) {
        const link = `${letter}|${letters[dim + 1]}`;
        linkTotals[dim].set(link, (linkTotals[dim].get(link) ?? 0) + count);
      }
    });
  }
  const nodes: SankeyNode[] = [];
  for (let dim = 0; dim < nDims; dim += 1) {
    const letters = [...nodeTotals[dim].keys()].sort();
    let y = 0;
    const scale = total > 0 ? height / total : 0;
    for (const letter of letters) {
      const value = nodeTotals[dim].get(letter) ?? 0;
      nodes.push({ dim, letter, value, y0: y, y1: y + value * scale });
      y += value * scale + 6;
    }
  }
  const links: SankeyLink[] = [];
  linkTotals.forEach((dimLinks, dim) => {
    for (const [key, value] of [...dimLinks.entries()].sort()) {
      const [from, to] = key.split("|");
      links.push({ fromDim: dim, from, to, value });
    }
  });
  return { nodes, links, total };
}

export interface ScatterCell {
  xDim: number;
  yDim: number;
  x: string;
  y: string;
  count: number;
}

export function computeScatterMatrix(crosstab: CrosstabPayload): ScatterCell[] {
  const out = new Map<string, ScatterCell>();
  for (const [key, count] of Object.entries(crosstab.cells)) {
    const letters = key.split("|");
    for (let i = 0; i < letters.length; i += 1) {
      for (let j = i + 1; j < letters.length; j += 1) {
        const mapKey = `${i}|${j}|${letters[i]}|${letters[j]}`;
        const cell =
          out.get(mapKey) ?? { xDim: i, yDim: j, x: letters[i], y: letters[j], count: 0 };
        cell.count += count;
        out.set(mapKey, cell);
      }
    }
  }
  return [...out.values()].sort(
    (a, b) => a.xDim - b.xDim || a.yDim - b.yDim || a.x.localeCompare(b.x) || a.y.localeCompare(b.y),
  );
}

export function renderHighDim(
  el: HTMLElement,
  crosstab: CrosstabPayload | null,
  questions: QuestionInfo[],
  selectedDims: string[],
  onSetDims: (dims: string[]) => void,
): void {
  const checkboxes = questions
    .map((q) => {
      const checked = selectedDims.includes(q.id) ? "checked" : "";
      return `<label><input type="checkbox" value="${q.id}" ${checked}/>${q.id}</label>`;
    })
    .join(" ");
  let body = '<span class="muted">select 2-4 questions</span>';
  if (crosstab && crosstab.dims.length >= 2) {
    const layout = computeSankey(crosstab);
    const width = 440;
    const colWidth = width / crosstab.dims.length;
    const nodeRects = layout.nodes
      .map((n) => {
        const x = n.dim * colWidth + 8;
        return (
          `<rect x="${x}" y="${n.y0.toFixed(1)}" width="14" height="${Math.max(2, n.y1 - n.y0).toFixed(1)}" ` +
          `fill="${PALETTE[n.dim % PALETTE.length]}"><title>${crosstab.dims[n.dim]}=${n.letter}: ${n.value}</title></rect>` +
          `<text x="${x + 18}" y="${(n.y0 + 10).toFixed(1)}" font-size="9">${n.letter} (${n.value})</text>`
        );
      })
      .join("");
    const offsets = new Map<string, number>();
    const nodeAt = (dim: number, letter: string) =>
      layout.nodes.find((n) => n.dim === dim && n.letter === letter);
    const linkPaths = layout.links
      .map((link) => {
        const from = nodeAt(link.fromDim, link.from);
        const to = nodeAt(link.fromDim + 1, link.to);
        if (!from || !to || layout.total === 0) return "";
        const scale = 200 / layout.total;
        const keyFrom = `s${link.fromDim}|${link.from}`;
        const keyTo = `t${link.fromDim + 1}|${link.to}`;
        const yFrom = from.y0 + (offsets.get(keyFrom) ?? 0);
        const yTo = to.y0 + (offsets.get(keyTo) ?? 0);
        const h = link.value * scale;
        offsets.set(keyFrom, (offsets.get(keyFrom) ?? 0) + h);
        offsets.set(keyTo, (offsets.get(keyTo) ?? 0) + h);
        const x0 = link.fromDim * colWidth + 22;
        const x1 = (link.fromDim + 1) * colWidth + 8;
        const mid = (x0 + x1) / 2;
        return (
          `<path d="M ${x0} ${(yFrom + h / 2).toFixed(1)} C ${mid} ${(yFrom + h / 2).toFixed(1)}, ` +
          `${mid} ${(yTo + h / 2).toFixed(1)}, ${x1} ${(yTo + h / 2).toFixed(1)}" stroke="#9bb7d4" ` +
          `stroke-width="${Math.max(1, h).toFixed(1)}" fill="none" opacity="0.6">` +
          `<title>${link.from} -> ${link.to}: ${link.value}</title></path>`
        );
      })
      .join("");
    const scatter = computeScatterMatrix(crosstab);
    const maxCount = Math.max(1, ...scatter.map((c) => c.count));
    const scatterHtml = scatter
      .filter((c) => c.xDim === 0 && c.yDim === 1)
      .map((c) => {
        const r = 3 + 9 * (c.count / maxCount);
        return (
          `<span class="scatter-dot" title="${crosstab.dims[0]}=${c.x}, ${crosstab.dims[1]}=${c.y}: ${c.count}" ` +
          `style="width:${2 * r}px;height:${2 * r}px">${c.x}${c.y}</span>`
        );
      })
      .join("");
    body = `
      <svg viewBox="0 0 ${width} 212" class="sankey">${linkPaths}${nodeRects}</svg>
      <div class="scatter-row">${scatterHtml}</div>
      <div class="muted">sampled ${crosstab.sampled} of ${crosstab.population}</div>
    `;
  }
  el.innerHTML = `<div class="dim-picker">${checkboxes}</div>${body}`;
  el.querySelectorAll<HTMLInputElement>(".dim-picker input").forEach((box) => {
    box.addEventListener("change", () => {
      const dims = [...el.querySelectorAll<HTMLInputElement>(".dim-picker input:checked")].map(
        (b) => b.value,
      );
      if (dims.length >= 1 && dims.length <= 4) onSetDims(dims);
    });
  });
}
