// Map Filter: a tile cartogram (works for any state set, real or synthetic)
// whose color intensity encodes the filtered population per state, a support
// banner for the two parties, and up to two pinned question distributions
// with a bar/pie toggle.

import {
  DistributionPayload,
  PopulationSummary,
  QuestionInfo,
} from "../api.js";
import { DEM_BLUE, REP_RED, Slice, barChartSvg, chartTotal, pieChartSvg } from "../charts.js";
import { ChartMode } from "../store.js";

export interface Tile {
  state: string;
  count: number;
  intensity: number; // 0..1 against the max state count in view
  selected: boolean;
}

export function computeTiles(
  perState: Record<string, number>,
  allStates: string[],
  selectedState: string | null,
): Tile[] {
  const max = Math.max(1, ...allStates.map((s) => perState[s] ?? 0));
  return allStates.map((state) => ({
    state,
    count: perState[state] ?? 0,
    intensity: (perState[state] ?? 0) / max,
    selected: state === selectedState,
  }));
}

export interface SupportBanner {
  demPct: string;
  repPct: string;
  validVotes: number;
}

export function computeSupportBanner(population: PopulationSummary | null): SupportBanner {
  const support = population?.support;
  const fmt = (v: number | null | undefined) =>
    v === null || v === undefined ? "-" : `${(100 * v).toFixed(1)}%`;
  return {
    demPct: fmt(support?.dem),
    repPct: fmt(support?.rep),
    validVotes: support?.valid_votes ?? 0,
  };
}

export function distributionSlices(
  dist: DistributionPayload,
  question: QuestionInfo,
): Slice[] {
  const totals: Record<string, number> = {};
  for (const stateDist of Object.values(dist.states)) {
    for (const [letter, value] of Object.entries(stateDist.values)) {
      totals[letter] = (totals[letter] ?? 0) + value;
    }
  }
  return question.options.map((opt) => ({
    label: opt.letter,
    title: opt.text,
    value: totals[opt.letter] ?? 0,
  }));
}

function tileColor(tile: Tile): string {
  const alpha = 0.15 + 0.85 * tile.intensity;
  return `rgba(33, 102, 172, ${alpha.toFixed(3)})`;
}

export function renderMap(
  el: HTMLElement,
  population: PopulationSummary | null,
  allStates: string[],
  selectedState: string | null,
  onToggleState: (state: string) => void,
): void {
  const tiles = computeTiles(population?.per_state ?? {}, allStates, selectedState);
  const banner = computeSupportBanner(population);
  el.innerHTML = `
    <div class="support-banner">
      <span class="dem" style="color:${DEM_BLUE}">Dem ${banner.demPct}</span>
      <span class="rep" style="color:${REP_RED}">Rep ${banner.repPct}</span>
      <span class="muted">${banner.validVotes} valid votes</span>
    </div>
    <div class="tile-grid"></div>
    <p class="muted">Click a state to focus every panel on it; click again for the national view.</p>
  `;
  const grid = el.querySelector(".tile-grid") as HTMLElement;
  for (const tile of tiles) {
    const button = document.createElement("button");
    button.className = "tile" + (tile.selected ? " selected" : "");
    button.style.background = tileColor(tile);
    button.title = `${tile.state}: ${tile.count}`;
    button.dataset.state = tile.state;
    button.dataset.count = String(tile.count);
    button.innerHTML = `<span class="tile-name">${tile.state}</span><span class="tile-count">${tile.count}</span>`;
    button.addEventListener("click", () => onToggleState(tile.state));
    grid.appendChild(button);
  }
}

export function renderPinnedCharts(
  el: HTMLElement,
  pinned: string[],
  distributions: Record<string, DistributionPayload>,
  questions: QuestionInfo[],
  chartModes: Record<string, ChartMode>,
  onToggleMode: (questionId: string) => void,
): void {
  el.innerHTML = "";
  for (const qid of pinned) {
    const dist = distributions[qid];
    const question = questions.find((q) => q.id === qid);
    if (!dist || !question) continue;
    const slices = distributionSlices(dist, question);
    const mode = chartModes[qid] ?? "bar";
    const svg = mode === "bar" ? barChartSvg(slices) : pieChartSvg(slices);
    const box = document.createElement("div");
    box.className = "pinned-chart";
    box.innerHTML = `
      <div class="chart-head">
        <abbr title="${question.text.replace(/"/g, "&quot;")}">${question.id}</abbr>
        <button class="toggle" data-question="${question.id}">${mode === "bar" ? "pie" : "bar"}</button>
      </div>
      ${svg}
      <div class="muted">n=${chartTotal(slices)}</div>
    `;
    box.querySelector(".toggle")?.addEventListener("click", () => onToggleMode(qid));
    el.appendChild(box);
  }
}
