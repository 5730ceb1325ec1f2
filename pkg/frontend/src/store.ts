// Central view state. Every panel renders from this one store, so panels can
// never disagree on the population; each filter mutation triggers exactly one
// refetch cycle, and an in-flight cycle is cancelled when a newer one starts.

import {
  ApiClient,
  ChatTurn,
  Condition,
  CrosstabPayload,
  DistributionPayload,
  FilterSpec,
  PopulationSummary,
  RunSummary,
  VoterCard,
} from "./api.js";

export const MAX_PINNED_QUESTIONS = 2;
export const MAX_CROSSTAB_DIMS = 4;

export type ChartMode = "bar" | "pie";

export interface ViewState {
  runId: string | null;
  summary: RunSummary | null;
  selectedState: string | null;
  conditions: Condition[];
  pinnedQuestions: string[];
  overviewQuestion: string | null;
  crosstabDims: string[];
  population: PopulationSummary | null;
  distributions: Record<string, DistributionPayload>;
  overviewDistribution: DistributionPayload | null;
  bubbleCounts: Record<string, Record<string, number>>;
  cards: VoterCard[];
  crosstab: CrosstabPayload | null;
  selectedVoter: VoterCard | null;
  chatSessionId: string | null;
  transcript: ChatTurn[];
  chartModes: Record<string, ChartMode>;
  loading: boolean;
  error: string | null;
  fetchCycles: number;
}

function initialState(): ViewState {
  return {
    runId: null,
    summary: null,
    selectedState: null,
    conditions: [],
    pinnedQuestions: [],
    overviewQuestion: null,
    crosstabDims: [],
    population: null,
    distributions: {},
    overviewDistribution: null,
    bubbleCounts: {},
    cards: [],
    crosstab: null,
    selectedVoter: null,
    chatSessionId: null,
    transcript: [],
    chartModes: {},
    loading: false,
    error: null,
    fetchCycles: 0,
  };
}

type Listener = (state: ViewState) => void;

export class Store {
  state: ViewState = initialState();
  private listeners = new Set<Listener>();
  private cycleToken = 0;
  private abort: AbortController | null = null;

  constructor(
    private api: ApiClient,
    private cardSeed = 0,
  ) {}

  subscribe(fn: Listener): () => void {
    this.listeners.add(fn);
    return () => this.listeners.delete(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn(this.state);
  }

  filterSpec(): FilterSpec {
    return { state: this.state.selectedState, conditions: [...this.state.conditions] };
  }

  private scoredQuestionIds(): string[] {
    if (!this.state.summary) return [];
    return this.state.summary.questions
      .filter((q) => q.options.some((o) => o.polarity !== null && o.polarity !== undefined))
      .map((q) => q.id);
  }

  async loadRun(runId: string): Promise<void> {
    const summary = await this.api.runSummary(runId);
    this.state = {
      ...initialState(),
      runId,
      summary,
      overviewQuestion: summary.questions[0]?.id ?? null,
      pinnedQuestions: summary.questions.slice(0, MAX_PINNED_QUESTIONS).map((q) => q.id),
      crosstabDims: summary.questions.slice(0, 2).map((q) => q.id),
    };
    await this.refetch();
  }

  // Map Filter: click selects the state; clicking it again restores national.
  async toggleState(state: string): Promise<void> {
    this.state = {
      ...this.state,
      selectedState: this.state.selectedState === state ? null : state,
    };
    await this.refetch();
  }

  async addCondition(condition: Condition): Promise<void> {
    this.state = { ...this.state, conditions: [...this.state.conditions, condition] };
    await this.refetch();
  }

  async removeCondition(index: number): Promise<void> {
    const conditions = this.state.conditions.filter((_, i) => i !== index);
    this.state = { ...this.state, conditions };
    await this.refetch();
  }

  async pinQuestion(questionId: string): Promise<void> {
    if (this.state.pinnedQuestions.includes(questionId)) return;
    const pinned = [...this.state.pinnedQuestions, questionId].slice(-MAX_PINNED_QUESTIONS);
    this.state = { ...this.state, pinnedQuestions: pinned };
    await this.refetch();
  }

  async setOverviewQuestion(questionId: string): Promise<void> {
    this.state = { ...this.state, overviewQuestion: questionId };
    await this.refetch();
  }

  async setCrosstabDims(dims: string[]): Promise<void> {
    if (dims.length > MAX_CROSSTAB_DIMS) {
      throw new Error(`at most ${MAX_CROSSTAB_DIMS} crosstab dimensions`);
    }
    this.state = { ...this.state, crosstabDims: dims };
    await this.refetch();
  }

  toggleChartMode(questionId: string): void {
    const current = this.state.chartModes[questionId] ?? "bar";
    this.state = {
      ...this.state,
      chartModes: { ...this.state.chartModes, [questionId]: current === "bar" ? "pie" : "bar" },
    };
    this.emit();
  }

  // One cycle: population, pinned/overview distributions, bubble inputs,
  // voter cards, and the crosstab, fetched together against one FilterSpec.
  private async refetch(): Promise<void> {
    const { runId } = this.state;
    if (!runId) return;
    this.abort?.abort();
    const controller = new AbortController();
    this.abort = controller;
    const token = ++this.cycleToken;
    const spec = this.filterSpec();
    this.state = { ...this.state, loading: true, error: null };
    this.emit();
    try {
      const pinned = this.state.pinnedQuestions;
      const scored = this.scoredQuestionIds();
      const overviewQ = this.state.overviewQuestion;
      const dims = this.state.crosstabDims;
      const [population, pinnedDists, overviewDist, scoredDists, cards, crosstab] =
        await Promise.all([
          this.api.filterPopulation(runId, spec, controller.signal),
          Promise.all(
            pinned.map((qid) =>
              this.api.questionDistribution(runId, qid, "absolute", spec, controller.signal),
            ),
          ),
          overviewQ
            ? this.api.questionDistribution(runId, overviewQ, "relative", spec, controller.signal)
            : Promise.resolve(null),
          Promise.all(
            scored.map((qid) =>
              this.api.questionDistribution(runId, qid, "absolute", spec, controller.signal),
            ),
          ),
          this.api.sampleIndividuals(runId, spec, 100, this.cardSeed, controller.signal),
          dims.length
            ? this.api.crosstab(runId, dims, spec, this.cardSeed, controller.signal)
            : Promise.resolve(null),
        ]);
      if (token !== this.cycleToken) return; // a newer cycle superseded this one
      const distributions: Record<string, DistributionPayload> = {};
      pinned.forEach((qid, i) => {
        distributions[qid] = pinnedDists[i];
      });
      const bubbleCounts: Record<string, Record<string, number>> = {};
      scored.forEach((qid, i) => {
        const totals: Record<string, number> = {};
        for (const stateDist of Object.values(scoredDists[i].states)) {
          for (const [letter, count] of Object.entries(stateDist.values)) {
            totals[letter] = (totals[letter] ?? 0) + count;
          }
        }
        bubbleCounts[qid] = totals;
      });
      this.state = {
        ...this.state,
        population,
        distributions,
        overviewDistribution: overviewDist,
        bubbleCounts,
        cards: cards.cards,
        crosstab,
        loading: false,
        fetchCycles: this.state.fetchCycles + 1,
      };
      this.emit();
    } catch (err) {
      if (controller.signal.aborted || token !== this.cycleToken) return;
      this.state = { ...this.state, loading: false, error: String(err) };
      this.emit();
    }
  }

  // Individual Information: selecting a voter opens a fresh chat session;
  // switching voters resets the transcript.
  async selectVoter(card: VoterCard): Promise<void> {
    const { runId } = this.state;
    if (!runId) return;
    const session = await this.api.openChat(runId, card.id);
    this.state = {
      ...this.state,
      selectedVoter: card,
      chatSessionId: session.session_id,
      transcript: [],
    };
    this.emit();
  }

  async sendChat(text: string): Promise<void> {
    const sid = this.state.chatSessionId;
    if (!sid) throw new Error("no voter selected");
    const reply = await this.api.sendChat(sid, text);
    this.state = { ...this.state, transcript: reply.history };
    this.emit();
  }
}
