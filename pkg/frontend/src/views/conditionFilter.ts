// Condition Filter: conjunctive (question, option) conditions that narrow
// every panel to voters who answered that way.

import { Condition, QuestionInfo } from "../api.js";

export function renderConditionFilter(
  el: HTMLElement,
  questions: QuestionInfo[],
  conditions: Condition[],
  onAdd: (condition: Condition) => void,
  onRemove: (index: number) => void,
): void {
  const chips = conditions
    .map(
      (c, i) =>
        `<span class="chip">${c.question_id}=${c.letter} <button data-index="${i}" title="remove">x</button></span>`,
    )
    .join("");
  const questionOptions = questions
    .map((q) => `<option value="${q.id}">${q.id} - ${q.topic}</option>`)
    .join("");
  el.innerHTML = `
    <div class="chips">${chips || '<span class="muted">no conditions</span>'}</div>
    <form class="condition-form">
      <select name="question">${questionOptions}</select>
      <select name="letter"></select>
      <button type="submit">Add</button>
    </form>
  `;
  const questionSelect = el.querySelector<HTMLSelectElement>("select[name=question]")!;
  const letterSelect = el.querySelector<HTMLSelectElement>("select[name=letter]")!;
  const fillLetters = () => {
    const q = questions.find((x) => x.id === questionSelect.value);
    letterSelect.innerHTML = (q?.options ?? [])
      .map((o) => `<option value="${o.letter}">${o.letter}. ${o.text}</option>`)
      .join("");
  };
  fillLetters();
  questionSelect.addEventListener("change", fillLetters);
  el.querySelector<HTMLFormElement>(".condition-form")?.addEventListener("submit", (ev) => {
    ev.preventDefault();
    onAdd({ question_id: questionSelect.value, letter: letterSelect.value });
  });
  el.querySelectorAll<HTMLButtonElement>(".chip button").forEach((button) => {
    button.addEventListener("click", () => onRemove(Number(button.dataset.index)));
  });
}
