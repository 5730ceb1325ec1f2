// Individual Information: up to 100 voter cards from the current selection,
// a detail pane for the chosen voter, and a chat transcript bound to a
// service session (switching voters starts a fresh session).

import { ChatTurn, VoterCard } from "../api.js";

export function cardLabel(card: VoterCard): string {
  const bits = ["gender", "age", "race"]
    .map((k) => card.tags[k])
    .filter((v): v is string => Boolean(v));
  return bits.length ? `${card.id} (${bits.join(", ")})` : card.id;
}

export function renderIndividuals(
  el: HTMLElement,
  cards: VoterCard[],
  selected: VoterCard | null,
  transcript: ChatTurn[],
  onSelect: (card: VoterCard) => void,
  onSend: (text: string) => void,
): void {
  const list = cards
    .map((card) => {
      const cls = selected?.id === card.id ? "voter selected" : "voter";
      return `<li class="${cls}" data-id="${card.id}">${cardLabel(card)}</li>`;
    })
    .join("");
  const detail = selected
    ? `
      <h4>${selected.id} ${selected.state ? `- ${selected.state}` : ""}</h4>
      <dl>${Object.entries(selected.tags)
        .map(([k, v]) => `<dt>${k}</dt><dd>${v ?? "?"}</dd>`)
        .join("")}</dl>
      <h5>Sample posts</h5>
      <ul class="posts">${selected.posts
        .slice(0, 5)
        .map((p) => `<li>${p}</li>`)
        .join("")}</ul>
    `
    : '<span class="muted">pick a voter to inspect and chat</span>';
  const turns = transcript
    .map((t) => `<div class="turn ${t.role}"><b>${t.role === "user" ? "you" : "voter"}:</b> ${t.text}</div>`)
    .join("");
  el.innerHTML = `
    <div class="individuals-grid">
      <ul class="voter-list">${list}</ul>
      <div class="voter-detail">${detail}</div>
    </div>
    <div class="chat">
      <div class="transcript">${turns || '<span class="muted">no messages yet</span>'}</div>
      <form class="chat-form">
        <input type="text" name="message" placeholder="Ask the voter something" ${selected ? "" : "disabled"}/>
        <button type="submit" ${selected ? "" : "disabled"}>Send</button>
      </form>
    </div>
  `;
  el.querySelectorAll<HTMLLIElement>(".voter-list .voter").forEach((li) => {
    li.addEventListener("click", () => {
      const card = cards.find((c) => c.id === li.dataset.id);
      if (card) onSelect(card);
    });
  });
  el.querySelector<HTMLFormElement>(".chat-form")?.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const input = (ev.target as HTMLFormElement).elements.namedItem("message") as HTMLInputElement;
    const text = input.value.trim();
    if (text) {
      onSend(text);
      input.value = "";
    }
  });
}
