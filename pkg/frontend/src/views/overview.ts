// Distribution Overview: the modal option per state for a chosen question
// (shaded by its within-state share), and nine topic-class bubbles whose size
// shrinks with the DK/RF share and whose height tracks the answered options'
// mean polarity.

import { DistributionPayload, QuestionInfo } from "../api.js";
import { PALETTE } from "../charts.js";

export interface ModalCell {
  state: string;
  modal: string;
  modalText: string;
  share: number; // within-state proportion of the modal option
  others: Record<string, number>;
}

export function computeModalMap(
  dist: DistributionPayload | null,
  question: QuestionInfo | undefined,
): ModalCell[] {
  if (!dist || !question) return [];
  const textOf = new Map(question.options.map((o) => [o.letter, o.text]));
  return Object.entries(dist.states)
    .map(([state, payload]) => ({
      state,
      modal: payload.modal,
      modalText: textOf.get(payload.modal) ?? payload.modal,
      share: payload.values[payload.modal] ?? 0,
      others: payload.values,
    }))
    .sort((a, b) => a.state.localeCompare(b.state));
}

// Nine issue classes; topics fall into the last bucket when nothing matches.
export const BUBBLE_CLASSES = [
  ["Economy & Welfare", ["economy", "taxes", "social welfare", "social security", "inequality", "aid to poor"]],
  ["Rights & Identity", ["lgbtq", "gender", "abortion", "aid to blacks", "group"]],
  ["Immigration", ["immigration"]],
  ["Environment", ["environment", "infrastructure"]],
  ["Government & Elections", ["government", "democratic norms", "election", "voting"]],
  ["Health & Education", ["health", "education", "parental leave"]],
  ["Justice & Safety", ["criminal justice", "unrest", "defense"]],
  ["World Affairs", ["us position in world", "foreign"]],
  ["Other", []],
] as const;

export function bubbleClassOf(topic: string): string {
  const lowered = topic.toLowerCase();
  for (const [name, needles] of BUBBLE_CLASSES) {
    if (needles.some((n) => lowered.includes(n))) return name;
  }
  return "Other";
}

export interface Bubble {
  category: string;
  engagement: number; // 1 - DK/RF share, in [0,1]; drives bubble size
  polarity: number; // count-weighted mean polarity of answered options
  responses: number;
  questions: number;
}

export const MIN_BUBBLE = 0.08; // all-refusal categories keep a visible dot

export function computeBubbles(
  questions: QuestionInfo[],
  countsByQuestion: Record<string, Record<string, number>>,
): Bubble[] {
  interface Acc {
    total: number;
    refusals: number;
    polaritySum: number;
    polarityWeight: number;
    questions: number;
  }
  const acc = new Map<string, Acc>();
  for (const question of questions) {
    const scored = question.options.some((o) => o.polarity !== null && o.polarity !== undefined);
    if (!scored) continue; // unscored questions stay out of this view
    const counts = countsByQuestion[question.id];
    if (!counts) continue;
    const cls = bubbleClassOf(question.topic);
    const entry = acc.get(cls) ?? {
      total: 0,
      refusals: 0,
      polaritySum: 0,
      polarityWeight: 0,
      questions: 0,
    };
    entry.questions += 1;
    for (const opt of question.options) {
      const n = counts[opt.letter] ?? 0;
      entry.total += n;
      if (opt.refusal) {
        entry.refusals += n;
      } else if (opt.polarity !== null && opt.polarity !== undefined) {
        entry.polaritySum += n * opt.polarity;
        entry.polarityWeight += n;
      }
    }
    acc.set(cls, entry);
  }
  const bubbles: Bubble[] = [];
  for (const [category, entry] of acc) {
    if (entry.total === 0) continue;
    const engagement = 1 - entry.refusals / entry.total;
    bubbles.push({
      category,
      engagement,
      polarity: entry.polarityWeight > 0 ? entry.polaritySum / entry.polarityWeight : 0,
      responses: entry.total,
      questions: entry.questions,
    });
  }
  return bubbles.sort((a, b) => a.category.localeCompare(b.category));
}

export function bubbleRadius(bubble: Bubble, maxRadius = 34): number {
  return maxRadius * Math.max(MIN_BUBBLE, bubble.engagement);
}

export function renderOverview(
  el: HTMLElement,
  dist: DistributionPayload | null,
  question: QuestionInfo | undefined,
  questions: QuestionInfo[],
  countsByQuestion: Record<string, Record<string, number>>,
  onPickQuestion: (questionId: string) => void,
): void {
  const cells = computeModalMap(dist, question);
  const bubbles = computeBubbles(questions, countsByQuestion);
  const options = questions
    .map(
      (q) =>
        `<option value="${q.id}" ${q.id === question?.id ? "selected" : ""}>${q.id} - ${q.topic}</option>`,
    )
    .join("");
  const cellHtml = cells
    .map((c) => {
      const alpha = 0.2 + 0.8 * c.share;
      const tip = Object.entries(c.others)
        .map(([letter, v]) => `${letter}: ${(100 * v).toFixed(1)}%`)
        .join(", ");
      return (
        `<div class="modal-cell" style="background: rgba(89,161,79,${alpha.toFixed(3)})" ` +
        `title="${tip}"><b>${c.state}</b><span>${c.modal} (${(100 * c.share).toFixed(0)}%)</span></div>`
      );
    })
    .join("");
  const width = 460;
  const height = 180;
  const polarities = bubbles.map((b) => Math.abs(b.polarity));
  const span = Math.max(1, ...polarities);
  const bubbleSvg = bubbles
    .map((b, i) => {
      const x = ((i + 0.5) / Math.max(1, bubbles.length)) * width;
      const y = height / 2 - (b.polarity / span) * (height / 2 - 40);
      const r = bubbleRadius(b);
      const color = PALETTE[i % PALETTE.length];
      return (
        `<circle cx="${x.toFixed(1)}" cy="${y.toFixed(1)}" r="${r.toFixed(1)}" fill="${color}" opacity="0.8">` +
        `<title>${b.category}: engagement ${(100 * b.engagement).toFixed(0)}%, polarity ${b.polarity.toFixed(2)}</title></circle>` +
        `<text x="${x.toFixed(1)}" y="${(y + r + 12).toFixed(1)}" text-anchor="middle" font-size="9">${b.category}</text>`
      );
    })
    .join("");
  el.innerHTML = `
    <div class="chart-head">
      <select class="overview-question">${options}</select>
      <span class="muted">modal option per state</span>
    </div>
    <div class="modal-grid">${cellHtml || '<span class="muted">no answers in view</span>'}</div>
    <svg viewBox="0 0 ${width} ${height}" class="bubbles">
      <line x1="0" y1="${height / 2}" x2="${width}" y2="${height / 2}" stroke="#ccc" stroke-dasharray="4 3"/>
      ${bubbleSvg}
    </svg>
    <p class="muted">Bubble size grows with engagement (fewer DK/RF answers); higher means more radical, lower more conservative.</p>
  `;
  el.querySelector(".overview-question")?.addEventListener("change", (ev) => {
    onPickQuestion((ev.target as HTMLSelectElement).value);
  });
}
