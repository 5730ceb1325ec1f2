// App entry: wires the shared store to the five panels. The only
// configuration is the service base URL (?api=, localStorage, or default).

import { ApiClient } from "./api.js";
import { Store } from "./store.js";
import { renderConditionFilter } from "./views/conditionFilter.js";
import { renderHighDim } from "./views/highdim.js";
import { renderIndividuals } from "./views/individuals.js";
import { renderMap, renderPinnedCharts } from "./views/mapView.js";
import { renderOverview } from "./views/overview.js";

function baseUrl(): string {
  const fromQuery = new URLSearchParams(window.location.search).get("api");
  if (fromQuery) {
    window.localStorage.setItem("pollsim-api", fromQuery);
    return fromQuery;
  }
  return window.localStorage.getItem("pollsim-api") ?? "http://127.0.0.1:8000";
}

async function boot(): Promise<void> {
  const api = new ApiClient(baseUrl());
  const store = new Store(api);

  const el = (id: string) => document.getElementById(id) as HTMLElement;
  const runSelect = el("run-select") as unknown as HTMLSelectElement;
  const status = el("status");

  store.subscribe((state) => {
    status.textContent = state.loading
      ? "loading..."
      : state.error
        ? state.error
        : state.population
          ? `${state.population.size} voters in view`
          : "";
    const questions = state.summary?.questions ?? [];
    renderMap(el("map-panel"), state.population, state.summary?.states ?? [], state.selectedState, (s) => {
      void store.toggleState(s);
    });
    renderPinnedCharts(
      el("pinned-panel"),
      state.pinnedQuestions,
      state.distributions,
      questions,
      state.chartModes,
      (qid) => store.toggleChartMode(qid),
    );
    renderConditionFilter(
      el("condition-panel"),
      questions,
      state.conditions,
      (c) => void store.addCondition(c),
      (i) => void store.removeCondition(i),
    );
    renderIndividuals(
      el("individuals-panel"),
      state.cards,
      state.selectedVoter,
      state.transcript,
      (card) => void store.selectVoter(card),
      (text) => void store.sendChat(text),
    );
    renderOverview(
      el("overview-panel"),
      state.overviewDistribution,
      questions.find((q) => q.id === state.overviewQuestion),
      questions,
      state.bubbleCounts,
      (qid) => void store.setOverviewQuestion(qid),
    );
    renderHighDim(
      el("highdim-panel"),
      state.crosstab,
      questions,
      state.crosstabDims,
      (dims) => void store.setCrosstabDims(dims),
    );
  });

  const runs = await api.listRuns();
  runSelect.innerHTML = runs
    .map((r) => `<option value="${r.run_id}">${r.run_id} (${r.mode})</option>`)
    .join("");
  runSelect.addEventListener("change", () => void store.loadRun(runSelect.value));
  if (runs.length) {
    await store.loadRun(runs[0].run_id);
  } else {
    status.textContent = `no runs at ${api.baseUrl}`;
  }
}

void boot();
